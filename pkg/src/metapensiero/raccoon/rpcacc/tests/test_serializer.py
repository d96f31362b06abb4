# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- serializer tests
# :Created:   dom 18 ott 2026 13:25:50 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

import struct

import pytest

from metapensiero.raccoon.rpcacc.interconnect import TxnKind
from metapensiero.raccoon.rpcacc.memory import Lease, Region
from metapensiero.raccoon.rpcacc.message import (Message, encode_message,
                                                 store_message)
from metapensiero.raccoon.rpcacc.serializer import (
    BadAccPtr, DanglingHandle, PreSerializedBuffer, RecordKind,
    SerializerError, Strategy, UnknownStrategy, iter_records)
from metapensiero.raccoon.rpcacc.oracle import ref_encode
from metapensiero.raccoon.rpcacc.simulator import Simulation
from metapensiero.raccoon.rpcacc.testing import (WORKLOAD_REGIMES,
                                                 random_message)
from metapensiero.raccoon.rpcacc.wire import RpcHeader
from metapensiero.raccoon.rpcacc.workload import generate_workload


STRATEGIES = [s.value for s in Strategy]


def stored(sim, message):
    return store_message(message, sim.memory,
                         sim.table.snapshot(message.schema.class_id))


@pytest.mark.parametrize('strategy', STRATEGIES)
def test_strategies_give_the_same_bytes(sim, person, strategy):
    root = stored(sim, person)
    res = sim.serializer.serialize(root, strategy)
    assert res.strategy is Strategy(strategy)
    assert res.wire == encode_message(person)
    assert res.arena.header == RpcHeader(person.schema.class_id, 0,
                                         len(res.wire))


def test_random_messages_all_strategies(kinds_sim, kinds_table, rng):
    node = kinds_table.by_name('Node')
    for _ in range(20):
        msg = random_message(rng, node, depth=4)
        root = stored(kinds_sim, msg)
        expected = encode_message(msg)
        for strategy in STRATEGIES:
            res = kinds_sim.serializer.serialize(root, strategy)
            assert res.wire == expected, strategy
        root.release()


@pytest.mark.parametrize('regime', sorted(WORKLOAD_REGIMES))
def test_generated_messages_all_strategies(regime, ctx):
    workload = generate_workload(WORKLOAD_REGIMES[regime], seed=11)
    sim = Simulation(workload.table, ctx)
    for msg in workload.messages:
        root = stored(sim, msg)
        expected = ref_encode(msg)
        for strategy in STRATEGIES:
            res = sim.serializer.serialize(root, strategy)
            assert res.wire == expected, strategy
        root.release()


def test_memory_affinity_transactions(sim, person):
    root = stored(sim, person)
    res = sim.serializer.serialize(root, Strategy.MEMORY_AFFINITY)
    # doorbell, buffer fetch and the host string of the accelerator
    # resident office
    assert res.ledger[TxnKind.MMIO_WRITE].count == 1
    assert res.ledger[TxnKind.DMA_READ].count == 2
    assert res.ledger.events == 3
    assert res.proxy.fields_visited == 11
    assert res.proxy.bytes_copied_by_cpu == 70
    assert res.proxy.encode_ops_on_cpu == 0
    assert res.timing.host_ns > 0 and res.timing.device_ns > 0


def test_memory_affinity_two_events(sim, person):
    sim.table.set_placement(person.schema.class_id, (9, 1), True)
    root = stored(sim, person)
    res = sim.serializer.serialize(root, 'memory-affinity')
    assert res.ledger.events == 2
    assert res.wire == encode_message(person)


def test_accel_only_chases_pointers(sim, person):
    root = stored(sim, person)
    res = sim.serializer.serialize(root, 'accel-only')
    assert res.ledger[TxnKind.DMA_READ].count == 8
    assert res.ledger.events == 8
    assert res.proxy.bytes_copied_by_cpu == 0
    assert res.timing.host_ns == 0


def test_cpu_only_fetches_and_sends(sim, person):
    root = stored(sim, person)
    res = sim.serializer.serialize(root, 'cpu_only')
    assert res.ledger[TxnKind.DMA_READ].count == 2
    assert res.ledger[TxnKind.DMA_WRITE].count == 1
    assert res.proxy.encoded_bytes_on_cpu == len(res.wire)
    assert res.proxy.encode_ops_on_cpu == person.count_fields()


def test_no_acc_fields_memory_affinity(sample_table, sim):
    address = sample_table.by_name('Address')
    msg = Message(address, street='Via Po', number=3)
    root = stored(sim, msg)
    res = sim.serializer.serialize(root)
    assert res.wire == encode_message(msg)
    assert res.ledger.events == 2


def test_pre_serialized_records(sim, person):
    root = stored(sim, person)
    buf, proxy, timing = sim.serializer.pre_serialize(root)
    kinds = [(r.kind, r.field_number) for r in buf.iter_records()]
    assert kinds[:3] == [(RecordKind.RAW, 1), (RecordKind.RAW, 2),
                         (RecordKind.ACCPTR, 3)]
    assert (RecordKind.BEGIN, 5) in kinds and (RecordKind.END, 5) in kinds
    assert kinds[-1] == (RecordKind.ACCPTR, 9)
    assert buf.records == len(kinds)
    assert len(buf.accel_objects) == 1
    photo = [r for r in buf.iter_records() if r.field_number == 3][0]
    assert photo.length == 256
    assert struct.unpack('<Q', photo.payload)[0] == root.slots[3].address
    # the image really is in host memory
    assert sim.memory.read(Region.HOST, buf.address, len(buf)) == buf.image
    arena, device = sim.serializer.accel_serialize(buf)
    assert arena.payload == encode_message(person)
    buf.release()


def test_encoding_offload_off(sim, person):
    root = stored(sim, person)
    res = sim.serializer.serialize(root, encoding_offload=False)
    assert res.wire == encode_message(person)
    assert res.proxy.encode_ops_on_cpu > 0
    assert res.proxy.bytes_copied_by_cpu == 0
    buf, _, _ = sim.serializer.pre_serialize(root, encoding_offload=False)
    assert RecordKind.ENCODED in {r.kind for r in buf.iter_records()}
    buf.release()


def test_memcpy_threshold(sim, person):
    root = stored(sim, person)
    res = sim.serializer.serialize(root, memcpy_threshold=8)
    assert res.proxy.bytes_copied_by_memcpy_engine == 64
    assert res.proxy.largest_cpu_copy == 3
    res = sim.serializer.serialize(root, memcpy_offload=False)
    assert res.proxy.bytes_copied_by_memcpy_engine == 0


@pytest.mark.parametrize('strategy', STRATEGIES)
def test_dangling_handle(sim, person, strategy):
    root = stored(sim, person)
    root.release()
    with pytest.raises(DanglingHandle):
        sim.serializer.serialize(root, strategy)


def _buffer(sim, schema, image, accel_objects=()):
    lease = Lease()
    address = sim.memory.host.alloc_chunk()
    sim.memory.write(Region.HOST, address, image)
    return PreSerializedBuffer(schema, address, image, 1,
                               list(accel_objects), lease)


def test_bad_acc_pointer(sim, sample_table):
    person = sample_table.by_name('Person')
    free_chunk = sim.memory.accel.base + 1000 * sim.memory.chunk_size
    image = (struct.pack('<BBHII', RecordKind.ACCPTR, 0, 0, 3, 16) +
             struct.pack('<Q', free_chunk))
    with pytest.raises(BadAccPtr):
        sim.serializer.accel_serialize(_buffer(sim, person, image))
    image = (struct.pack('<BBHII', RecordKind.ACCPTR, 1, 0, 9, 0) +
             struct.pack('<Q', 5))
    with pytest.raises(BadAccPtr):
        sim.serializer.accel_serialize(_buffer(sim, person, image))


def test_malformed_images(sim, sample_table):
    person = sample_table.by_name('Person')
    with pytest.raises(SerializerError):
        list(iter_records(b'\x01\x00'))
    with pytest.raises(SerializerError):
        list(iter_records(struct.pack('<BBHII', 9, 0, 0, 1, 0)))
    with pytest.raises(SerializerError):
        list(iter_records(struct.pack('<BBHII', RecordKind.RAW, 0, 0, 1, 8)))
    unbalanced = struct.pack('<BBHII', RecordKind.BEGIN, 0, 0, 5, 0)
    with pytest.raises(SerializerError):
        sim.serializer.accel_serialize(_buffer(sim, person, unbalanced))
    not_a_message = struct.pack('<BBHII', RecordKind.BEGIN, 0, 0, 2, 0)
    with pytest.raises(SerializerError):
        sim.serializer.accel_serialize(_buffer(sim, person, not_a_message))


def test_unknown_strategy(sim, person):
    with pytest.raises(UnknownStrategy):
        Strategy.of('gpu-only')
    with pytest.raises(ValueError):
        sim.serializer.serialize(stored(sim, person), 'gpu-only')
