# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- memory model tests
# :Created:   sab 17 ott 2026 18:20:44 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

import pytest

from metapensiero.raccoon.rpcacc.memory import (
    ChunkAllocator, ChunkCursor, Lease, MemoryModelError, MemorySystem,
    OutOfBounds, OutOfChunks, Region, Tlb, TlbMiss, UnallocatedAccess)


def small(region=Region.HOST, chunks=4, size=64):
    return ChunkAllocator(region, chunks * size, size)


def test_regions_do_not_overlap():
    host = small(Region.HOST)
    accel = small(Region.ACCEL)
    assert host.base != accel.base
    assert host.alloc_chunk() != accel.alloc_chunk()


def test_fifo_free_list():
    alloc = small()
    first = alloc.alloc_chunk()
    second = alloc.alloc_chunk()
    assert second == first + 64
    alloc.release(first)
    # the freed chunk goes to the tail
    assert alloc.alloc_chunk() == first + 128
    assert alloc.alloc_chunk() == first + 192
    assert alloc.alloc_chunk() == first
    with pytest.raises(OutOfChunks):
        alloc.alloc_chunk()
    assert alloc.stats()['outstanding'] == 4


def test_chunks_are_zeroed():
    alloc = small()
    base = alloc.alloc_chunk()
    alloc.write(base, b'\xff' * 64)
    alloc.release(base)
    for _ in range(4):
        again = alloc.alloc_chunk()
    assert again == base
    assert alloc.read(base, 64) == bytes(64)


def test_reference_counts():
    alloc = small()
    base = alloc.alloc_chunk()
    alloc.retain(base)
    assert not alloc.release(base)
    assert alloc.release(base)
    with pytest.raises(UnallocatedAccess):
        alloc.release(base)
    with pytest.raises(UnallocatedAccess):
        alloc.retain(base)


def test_access_checks():
    alloc = small()
    base = alloc.alloc_chunk()
    alloc.write(base + 60, b'abcd')
    assert alloc.read(base + 60, 4) == b'abcd'
    # crosses into a free chunk
    with pytest.raises(UnallocatedAccess):
        alloc.write(base + 62, b'abcd')
    with pytest.raises(OutOfBounds):
        alloc.read(base - 1, 2)
    with pytest.raises(OutOfBounds):
        alloc.read(alloc.limit, 1)
    assert alloc.read(base, 0) == b''
    assert alloc.is_allocated(base, 64)
    assert not alloc.is_allocated(base, 65)


def test_span_reads_across_chunks():
    alloc = small()
    base = alloc.alloc_span(3)
    data = bytes(range(150))
    alloc.write(base + 10, data)
    assert alloc.read(base + 10, 150) == data
    assert alloc.outstanding == 3
    with pytest.raises(OutOfChunks):
        alloc.alloc_span(2)


def test_span_needs_contiguous_run():
    alloc = small()
    chunks = [alloc.alloc_chunk() for _ in range(4)]
    alloc.release(chunks[0])
    alloc.release(chunks[2])
    with pytest.raises(OutOfChunks):
        alloc.alloc_span(2)
    alloc.release(chunks[3])
    assert alloc.alloc_span(2) == chunks[2]


def test_invalid_pool():
    with pytest.raises(MemoryModelError):
        ChunkAllocator(Region.HOST, 10, 64)


def test_cursor_and_lease():
    alloc = small(chunks=8)
    cursor = ChunkCursor(alloc)
    lease = Lease()
    a = cursor.reserve(40, lease)
    b = cursor.reserve(20, lease)
    assert b == a + 40
    # doesn't fit in the 4 bytes left
    c = cursor.reserve(10, lease)
    assert alloc.chunk_of(c) != alloc.chunk_of(a)
    big = cursor.reserve(130, lease)
    assert alloc.is_allocated(big, 130)
    assert len(lease) == 5
    lease.release()
    cursor.close()
    assert alloc.outstanding == 0
    assert alloc.frees == alloc.allocs


def test_cursor_empty_range():
    alloc = small()
    cursor = ChunkCursor(alloc)
    lease = Lease()
    a = cursor.reserve(0, lease)
    assert alloc.chunk_of(a) == cursor.chunk


def test_fragmentation():
    alloc = small()
    cursor = ChunkCursor(alloc)
    lease = Lease()
    cursor.reserve(16, lease)
    assert alloc.fragmentation() == pytest.approx(0.75)
    lease.release()
    cursor.close()
    assert alloc.stats()['fragmentation'] == pytest.approx(0.75)


def test_tlb():
    tlb = Tlb(capacity=4, page_size=64)
    with pytest.raises(TlbMiss):
        tlb.translate(0)
    tlb.map_range(0x1000, 0x8000, 2)
    assert tlb.translate(0x1010) == 0x8010
    with pytest.raises(TlbMiss):
        tlb.translate(0x1080)
    assert tlb.lookup(0x1000, 100.0) == (0x8000, 0.0)
    assert tlb.lookup(0x2000, 100.0) == (0x2000, 100.0)
    assert (tlb.hits, tlb.misses) == (1, 1)
    with pytest.raises(MemoryModelError):
        tlb.map_range(0, 0, 5)
    with pytest.raises(MemoryModelError):
        tlb.map_range(1, 0, 1)


def test_memory_system():
    mem = MemorySystem(host_pool_bytes=4096 * 4, accel_pool_bytes=4096 * 2)
    host = mem.alloc_chunk(Region.HOST)
    accel = mem.alloc_chunk(Region.ACCEL)
    mem.write(Region.HOST, host, b'hi')
    mem.write(Region.ACCEL, accel, b'yo')
    assert mem.read(Region.HOST, host, 2) == b'hi'
    assert mem.read(Region.ACCEL, accel, 2) == b'yo'
    assert mem.tlb.translate(host) == host
    stats = mem.stats()
    assert stats['host']['outstanding'] == 1
    assert stats['accel']['free'] == 1
