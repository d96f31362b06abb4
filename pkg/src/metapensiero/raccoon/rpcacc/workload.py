# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- synthetic workloads
# :Created:   lun 19 ott 2026 10:31:47 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Parameterized generator of request streams.

A workload is a chain of message classes ``Level1 -> Level2 -> ...``, each
with up to ``fields_max`` value fields and a ``child`` field pointing to the
next level, plus the stream of request messages built on it. Everything is
a function of the spec and the seed.
"""

from collections import namedtuple
import configparser
from dataclasses import asdict, dataclass, fields
import json
import logging
import os
import random
import struct

from .compiler import compile_proto
from .message import Message, encode_message
from .schema import serialize_schema_table
from .wire import frame


logger = logging.getLogger(__name__)

SMALL_FIELD_LIMIT = 1024
MAX_DEPTH = 64
MAX_FIELDS = 200

_SCALAR_KINDS = ('int32', 'int64', 'uint64', 'double', 'float', 'bool')
_FLOAT = struct.Struct('<f')


class InvalidSpec(Exception):
    """The workload spec has unknown keys or values out of range."""


@dataclass
class WorkloadSpec:
    """Shape of the generated messages.

    Field sizes are those of string and bytes values; packed arrays have
    about the same size in 8 bytes elements. With `small_fields` sizes are
    capped at 1 KB.
    """

    requests: int = 10
    depth_min: int = 1
    depth_max: int = 1
    fields_min: int = 4
    fields_max: int = 8
    field_size_min: int = 1
    field_size_max: int = 64
    small_fields: bool = True
    acc_fraction: float = 0.0
    repeated_probability: float = 0.0
    scalar_fraction: float = 0.25

    def validate(self):
        """Check the ranges.

        :returns: the spec itself
        :raises InvalidSpec: if a value is out of range
        """
        if self.requests < 0:
            raise InvalidSpec("requests must not be negative")
        if not 1 <= self.depth_min <= self.depth_max <= MAX_DEPTH:
            raise InvalidSpec("Depth range must be within 1 and {max}".format(
                max=MAX_DEPTH))
        if not 1 <= self.fields_min <= self.fields_max <= MAX_FIELDS:
            raise InvalidSpec("Fields range must be within 1 and {max}".format(
                max=MAX_FIELDS))
        if not 0 <= self.field_size_min <= self.field_size_max:
            raise InvalidSpec("Invalid field size range")
        if self.small_fields and self.field_size_min > SMALL_FIELD_LIMIT:
            raise InvalidSpec("Small fields can't be larger than {max} bytes"
                              .format(max=SMALL_FIELD_LIMIT))
        for name in ('acc_fraction', 'repeated_probability',
                     'scalar_fraction'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidSpec("{name} must be within 0 and 1".format(
                    name=name))
        return self

    @property
    def size_max(self):
        if self.small_fields:
            return min(self.field_size_max, SMALL_FIELD_LIMIT)
        return self.field_size_max

    @classmethod
    def from_mapping(cls, values):
        """Build a spec from a mapping of (possibly string) values.

        :raises InvalidSpec: on unknown keys or bad values
        """
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in values.items():
            type_ = types.get(key)
            if type_ is None:
                raise InvalidSpec("Unknown workload key {key!r}".format(
                    key=key))
            try:
                if type_ is bool and isinstance(value, str):
                    value = configparser.ConfigParser.BOOLEAN_STATES[
                        value.lower()]
                kwargs[key] = type_(value)
            except (KeyError, TypeError, ValueError):
                raise InvalidSpec("Invalid value {value!r} for {key}".format(
                    value=value, key=key)) from None
        return cls(**kwargs).validate()

    @classmethod
    def from_file(cls, path):
        """Read a spec from an INI file with a single ``[workload]``
        section."""
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding='utf-8') as f:
                parser.read_file(f)
        except (OSError, configparser.Error) as e:
            raise InvalidSpec("Cannot read workload spec {path}: {e}".format(
                path=path, e=e)) from e
        if parser.sections() != ['workload']:
            raise InvalidSpec("A workload spec needs exactly one [workload] "
                              "section")
        return cls.from_mapping(dict(parser.items('workload')))

    def as_dict(self):
        return asdict(self)


Workload = namedtuple('Workload', 'spec seed table root messages stats')
"""A generated workload: the compiled table, its root schema, the request
messages and the realized statistics."""


_FieldPlan = namedtuple('_FieldPlan', 'name number kind repeated acc')


def _plan_level(rng, spec):
    plan = []
    for i in range(spec.fields_max):
        number = i + 1
        if rng.random() < spec.scalar_fraction:
            kind = rng.choice(_SCALAR_KINDS)
            repeated = rng.random() < spec.repeated_probability
        else:
            kind = rng.choice(('string', 'bytes'))
            repeated = rng.random() < spec.repeated_probability
        deref = repeated or kind in ('string', 'bytes')
        acc = deref and rng.random() < spec.acc_fraction
        plan.append(_FieldPlan('f{n}'.format(n=number), number, kind,
                               repeated, acc))
    return plan


def _proto_text(plans):
    lines = ['syntax = "proto3";', '']
    depth = len(plans)
    for level, plan in enumerate(plans, 1):
        lines.append('message Level{level} {{'.format(level=level))
        for f in plan:
            lines.append('  {rep}{kind} {name} = {number}{acc};'.format(
                rep='repeated ' if f.repeated else '', kind=f.kind,
                name=f.name, number=f.number,
                acc=' [Acc]' if f.acc else ''))
        if level < depth:
            lines.append('  Level{next} child = {number};'.format(
                next=level + 1, number=len(plan) + 1))
        lines.append('}')
        lines.append('')
    return '\n'.join(lines)


def _random_bytes(rng, size):
    return rng.getrandbits(8 * size).to_bytes(size, 'little') if size else b''


def _random_text(rng, size):
    return ''.join(rng.choice('abcdefghijklmnopqrstuvwxyz0123456789')
                   for _ in range(size))


def _scalar(rng, kind):
    if kind == 'int32':
        return rng.randint(-(1 << 31), (1 << 31) - 1)
    if kind == 'int64':
        return rng.randint(-(1 << 63), (1 << 63) - 1)
    if kind == 'uint64':
        return rng.getrandbits(64)
    if kind == 'bool':
        return rng.random() < 0.5
    value = rng.uniform(-1e6, 1e6)
    if kind == 'float':
        # representable in 32 bits
        value = _FLOAT.unpack(_FLOAT.pack(value))[0]
    return value


class _Builder:

    def __init__(self, rng, spec):
        self.rng = rng
        self.spec = spec
        self.sizes = []

    def size(self):
        return self.rng.randint(self.spec.field_size_min, self.spec.size_max)

    def value(self, desc):
        rng = self.rng
        if desc.kind in ('string', 'bytes'):
            count = rng.randint(1, 4) if desc.repeated else 1
            values = []
            for _ in range(count):
                size = self.size()
                self.sizes.append(size)
                values.append(_random_text(rng, size) if desc.kind == 'string'
                              else _random_bytes(rng, size))
            return values if desc.repeated else values[0]
        if desc.repeated:
            count = max(1, self.size() // 8)
            self.sizes.append(8 * count)
            return [_scalar(rng, desc.kind) for _ in range(count)]
        self.sizes.append(8)
        return _scalar(rng, desc.kind)

    def message(self, schema, depth):
        rng = self.rng
        spec = self.spec
        value_fields = [d for d in schema.fields if not d.is_message]
        count = min(len(value_fields),
                    rng.randint(spec.fields_min, spec.fields_max))
        chosen = sorted(rng.sample(range(len(value_fields)), count))
        values = {}
        for i in chosen:
            desc = value_fields[i]
            values[desc.number] = self.value(desc)
        if depth > 1:
            child = schema.get_field_named('child')
            values[child.number] = self.message(child.message_type, depth - 1)
        return Message(schema, values)


def generate_workload(spec, seed=0):
    """Generate the schema and the request stream described by `spec`.

    :param spec: a :class:`WorkloadSpec`
    :param int seed: the random seed
    :returns: a :class:`Workload`
    :raises InvalidSpec: if the spec is invalid
    """
    spec.validate()
    rng = random.Random(seed)
    plans = [_plan_level(rng, spec) for _ in range(spec.depth_max)]
    table = compile_proto(_proto_text(plans))
    root = table.by_name('Level1')
    builder = _Builder(rng, spec)
    messages = [builder.message(root, rng.randint(spec.depth_min,
                                                  spec.depth_max))
                for _ in range(spec.requests)]
    sizes = builder.sizes
    stats = {
        'messages': len(messages),
        'mean_field_size': sum(sizes) / len(sizes) if sizes else 0.0,
        'mean_depth': (sum(m.depth() for m in messages) / len(messages)
                       if messages else 0.0),
        'fields': sum(m.count_fields() for m in messages),
    }
    logger.debug("Generated workload with seed %d: %s", seed, stats)
    return Workload(spec, seed, table, root, messages, stats)


def materialize(workload, directory):
    """Write a workload to `directory`: the schema table image, one framed
    wire file per request and a ``workload.json`` summary.

    :returns: the list of the written file names
    """
    os.makedirs(directory, exist_ok=True)
    written = []
    path = os.path.join(directory, 'schema.rpct')
    with open(path, 'wb') as f:
        f.write(serialize_schema_table(workload.table))
    written.append(path)
    for i, message in enumerate(workload.messages):
        path = os.path.join(directory, 'request-{i:05d}.bin'.format(i=i))
        with open(path, 'wb') as f:
            f.write(frame(message.schema.class_id, encode_message(message)))
        written.append(path)
    path = os.path.join(directory, 'workload.json')
    with open(path, 'w', encoding='utf-8') as f:
        json.dump({'seed': workload.seed, 'spec': workload.spec.as_dict(),
                   'stats': workload.stats}, f, indent=2, sort_keys=True)
    written.append(path)
    return written
