# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- testing utilities
# :Created:   mar 20 ott 2026 15:22:10 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

import random
import struct

import pytest

from metapensiero.raccoon.rpcacc.apps import ImageWorkloadSpec, image_workload
from metapensiero.raccoon.rpcacc.compiler import compile_proto
from metapensiero.raccoon.rpcacc.context import SimContext
from metapensiero.raccoon.rpcacc.message import Message
from metapensiero.raccoon.rpcacc.simulator import Simulation
from metapensiero.raccoon.rpcacc.workload import (WorkloadSpec,
                                                  generate_workload)


SAMPLE_PROTO = """\
syntax = "proto3";

message Address {
  string street = 1;
  int32 number = 2;
}

message Person {
  int64 id = 1;
  string name = 2;
  bytes photo = 3 [Acc];
  repeated int32 scores = 4;
  Address home = 5;
  repeated string tags = 6;
  double weight = 7;
  bool active = 8;
  Address office = 9 [Acc];
}
"""

# every kind, labels and nesting
ALL_KINDS_PROTO = """\
syntax = "proto3";

message Leaf {
  int32 i32 = 1;
  int64 i64 = 2;
  uint64 u64 = 3;
  double d = 4;
  float f = 5;
  bool b = 6;
  string s = 7;
  bytes raw = 8 [Acc];
}

message Node {
  Leaf leaf = 1;
  repeated Leaf leaves = 2;
  repeated int64 ids = 3;
  repeated double ds = 4 [Acc];
  repeated bytes blobs = 5;
  repeated bool flags = 6;
  Node next = 7;
  uint64 tag = 8;
  string label = 9 [Acc];
  repeated float fs = 10;
}
"""

# name: spec; a thousand requests in all
WORKLOAD_REGIMES = {
    'host-only': WorkloadSpec(requests=300, depth_min=1, depth_max=6),
    'mixed': WorkloadSpec(requests=300, depth_min=1, depth_max=6,
                          acc_fraction=0.5, repeated_probability=0.3),
    'large': WorkloadSpec(requests=100, depth_min=1, depth_max=2,
                          fields_min=1, fields_max=4, field_size_min=4000,
                          field_size_max=5000, small_fields=False,
                          acc_fraction=0.3),
    'accel-only': WorkloadSpec(requests=300, depth_min=1, depth_max=4,
                               field_size_min=0, field_size_max=300,
                               acc_fraction=1.0, repeated_probability=0.5,
                               scalar_fraction=0.5),
}

_FLOAT = struct.Struct('<f')


def random_scalar(rng, kind):
    if kind == 'int32':
        return rng.choice((0, 1, -1, rng.randint(-(1 << 31), (1 << 31) - 1)))
    if kind == 'int64':
        return rng.choice((0, -1, rng.randint(-(1 << 63), (1 << 63) - 1)))
    if kind == 'uint64':
        return rng.choice((0, 127, 128, rng.getrandbits(64)))
    if kind == 'bool':
        return rng.random() < 0.5
    if kind == 'double':
        return rng.uniform(-1e9, 1e9)
    if kind == 'float':
        return _FLOAT.unpack(_FLOAT.pack(rng.uniform(-1e6, 1e6)))[0]
    size = rng.choice((0, 1, rng.randint(2, 300)))
    if kind == 'string':
        return ''.join(rng.choice('abcxyzàè日') for _ in range(size))
    return bytes(rng.getrandbits(8) for _ in range(size))


def random_message(rng, schema, depth=3, presence=0.7):
    """A random :class:`~.message.Message` of `schema`, sub-messages going
    at most `depth` levels down."""
    values = {}
    for desc in schema.fields:
        if rng.random() > presence:
            continue
        if desc.is_message:
            if depth <= 1:
                continue
            count = rng.randint(1, 3) if desc.repeated else 1
            items = [random_message(rng, desc.message_type, depth - 1,
                                    presence)
                     for _ in range(count)]
            values[desc.number] = items if desc.repeated else items[0]
        elif desc.repeated:
            values[desc.number] = [random_scalar(rng, desc.kind)
                                   for _ in range(rng.randint(1, 5))]
        else:
            values[desc.number] = random_scalar(rng, desc.kind)
    return Message(schema, values)


@pytest.fixture
def ctx():
    return SimContext()


@pytest.fixture
def sample_table():
    return compile_proto(SAMPLE_PROTO)


@pytest.fixture
def kinds_table():
    return compile_proto(ALL_KINDS_PROTO)


@pytest.fixture
def sim(sample_table, ctx):
    return Simulation(sample_table, ctx)


@pytest.fixture
def kinds_sim(kinds_table, ctx):
    return Simulation(kinds_table, ctx)


@pytest.fixture
def person(sample_table):
    person = sample_table.by_name('Person')
    address = sample_table.by_name('Address')
    return Message(person, id=42, name='Ada', photo=b'\x89PNG' * 64,
                   scores=[10, -3, 250], tags=['a', 'bb'],
                   home=Message(address, street='Via Roma', number=7),
                   office=Message(address, street='Corso Italia', number=1),
                   weight=61.5, active=True)


@pytest.fixture
def rng():
    return random.Random(20261017)


@pytest.fixture
def small_workload():
    return generate_workload(WorkloadSpec(requests=4, depth_min=2,
                                          depth_max=3, acc_fraction=0.3,
                                          repeated_probability=0.2), seed=1)


@pytest.fixture
def image_wl():
    return image_workload(ImageWorkloadSpec(requests=3, image_size=8192),
                          seed=3)
