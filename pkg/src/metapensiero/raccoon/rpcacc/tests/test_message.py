# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- message value tests
# :Created:   sab 17 ott 2026 19:12:38 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

import pytest

from metapensiero.raccoon.rpcacc.memory import MemorySystem, Region
from metapensiero.raccoon.rpcacc.message import (
    CELL_SIZE, Message, decode_cell, decode_message, encode_cell,
    encode_message, load_message, store_message)
from metapensiero.raccoon.rpcacc.testing import random_message
from metapensiero.raccoon.rpcacc.wire import MalformedWire, TypeMismatch
from metapensiero.raccoon.rpcacc.workload import (WorkloadSpec,
                                                  generate_workload)


def test_message_values(sample_table, person):
    assert person['name'] == 'Ada'
    assert person[2] == 'Ada'
    assert 'photo' in person and 'nope' not in person
    assert person.get('nope') is None
    assert len(person) == 9
    assert person.depth() == 2
    assert person.count_fields() == 13
    with pytest.raises(KeyError):
        person[99]
    person.set('tags', [])
    assert 'tags' not in person
    person.set('name', None)
    assert 'name' not in person


@pytest.mark.parametrize('name, value', [
    ('id', 'x'),
    ('scores', 'abc'),
    ('scores', [1, 'x']),
    ('home', b'x'),
])
def test_message_type_checks(person, name, value):
    with pytest.raises(TypeMismatch):
        person.set(name, value)


def test_sub_message_schema_is_checked(sample_table, person):
    with pytest.raises(TypeMismatch):
        person.set('home', Message(sample_table.by_name('Person')))


def test_encode_decode(person):
    payload = encode_message(person)
    assert payload.startswith(b'\x08\x2a\x12\x03Ada')
    assert decode_message(payload, person.schema) == person


def test_last_singular_occurrence_wins(sample_table):
    person = sample_table.by_name('Person')
    decoded = decode_message(b'\x08\x01\x08\x02\x20\x01\x20\x02', person)
    assert decoded['id'] == 2
    assert decoded['scores'] == [1, 2]


def test_max_depth(kinds_table):
    node = kinds_table.by_name('Node')
    msg = Message(node, tag=1)
    for _ in range(5):
        msg = Message(node, next=msg)
    payload = encode_message(msg)
    assert decode_message(payload, node, max_depth=6) == msg
    with pytest.raises(MalformedWire):
        decode_message(payload, node, max_depth=5)


def test_random_round_trips(kinds_table, rng):
    node = kinds_table.by_name('Node')
    for _ in range(50):
        msg = random_message(rng, node, depth=4)
        assert decode_message(encode_message(msg), node) == msg


ROUND_TRIP_SPEC = WorkloadSpec(requests=500, depth_min=1, depth_max=12,
                               fields_min=1, field_size_min=0,
                               field_size_max=32, repeated_probability=0.3,
                               scalar_fraction=0.5)


def test_generated_round_trips():
    count = 0
    for seed in range(20):
        workload = generate_workload(ROUND_TRIP_SPEC, seed)
        for msg in workload.messages:
            assert msg.depth() <= 12
            assert decode_message(encode_message(msg), workload.root) == msg
            count += 1
    assert count == 10000


def test_cells():
    assert len(encode_cell('int32', -1)) == CELL_SIZE
    assert decode_cell('int32', encode_cell('int32', -1)) == -1
    assert decode_cell('bool', encode_cell('bool', True)) is True
    assert decode_cell('uint64', encode_cell('uint64', 2 ** 64 - 1)) == (
        2 ** 64 - 1)
    with pytest.raises(TypeMismatch):
        encode_cell('int32', 2 ** 40)


def test_store_and_load(person):
    memory = MemorySystem(host_pool_bytes=4096 * 16,
                          accel_pool_bytes=4096 * 16)
    value = store_message(person, memory)
    assert value.region is Region.HOST
    assert value.slots[3].region is Region.ACCEL
    assert value.slots[9].region is Region.ACCEL
    assert value.slots[5].region is Region.HOST
    # id, weight and active share the body
    assert value.body.length == 3 * CELL_SIZE
    assert value.slots[1].address == value.body.address
    assert load_message(memory, value) == person
    assert [o.schema.name for o in value.objects()] == ['Person', 'Address',
                                                        'Address']
    paths = [p for p, _ in value.handles()]
    assert paths[0] == ()
    assert (5,) in paths and (9, 1) in paths
    value.release()
    assert memory.host.outstanding == 0
    assert memory.accel.outstanding == 0


def test_store_random_graphs(kinds_table, rng):
    memory = MemorySystem(host_pool_bytes=4096 * 64,
                          accel_pool_bytes=4096 * 64)
    node = kinds_table.by_name('Node')
    for _ in range(20):
        msg = random_message(rng, node, depth=3)
        value = store_message(msg, memory)
        assert load_message(memory, value) == msg
        value.release()
    assert memory.host.outstanding == 0
