# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- host and accelerator memory model
# :Created:   sab 17 ott 2026 14:12:40 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""The two address spaces, carved in fixed size chunks handed out by FIFO
free lists, and the TLB used by the accelerator to reach host memory.

Addresses are flat within a region: a range spanning adjacent allocated
chunks is valid. Each region has its own base address so that host and
accelerator addresses never coincide.
"""

from collections import deque
import enum
import logging


logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 4096
DEFAULT_POOL_BYTES = 64 * 1024 * 1024
DEFAULT_TLB_ENTRIES = 16384


class MemoryModelError(Exception):
    """Base of the memory model errors."""


class OutOfChunks(MemoryModelError):
    """The free list is empty."""


class OutOfBounds(MemoryModelError):
    """The range isn't inside the region."""


class UnallocatedAccess(MemoryModelError):
    """The range touches a chunk that isn't allocated."""


class TlbMiss(MemoryModelError):
    """The virtual address is outside the mapped range."""


class Region(enum.Enum):
    HOST = 'host'
    ACCEL = 'accel'

    @property
    def base(self):
        return REGION_BASES[self]


REGION_BASES = {
    Region.HOST: 0x1000000000,
    Region.ACCEL: 0x2000000000,
}


class ChunkAllocator:
    """Fixed size chunk allocator over a region.

    :param region: the :class:`Region` served
    :param int pool_bytes: size of the region
    :param int chunk_size: size of a chunk, the pool is truncated to a
      multiple of it

    Chunks are reference counted: :meth:`alloc_chunk` returns a chunk with
    one reference, :meth:`release` pushes it back onto the free list when
    the last reference goes away.
    """

    def __init__(self, region, pool_bytes=DEFAULT_POOL_BYTES,
                 chunk_size=DEFAULT_CHUNK_SIZE):
        if chunk_size <= 0 or pool_bytes < chunk_size:
            raise MemoryModelError("Invalid pool of {pool} bytes with "
                                   "{size} bytes chunks".format(
                                       pool=pool_bytes, size=chunk_size))
        self.region = region
        self.chunk_size = chunk_size
        self.base = region.base
        self.n_chunks = pool_bytes // chunk_size
        self.limit = self.base + self.n_chunks * chunk_size
        self.free_list = deque(self.base + i * chunk_size
                               for i in range(self.n_chunks))
        self._chunks = {}
        self._refs = {}
        self._used = {}
        self.allocs = 0
        self.frees = 0
        self.used_bytes_freed = 0
        self.wasted_bytes_freed = 0

    def __repr__(self):
        return '<{cname} {region} {out}/{n} chunks>'.format(
            cname=type(self).__name__, region=self.region.value,
            out=self.outstanding, n=self.n_chunks)

    @property
    def outstanding(self):
        return len(self._chunks)

    @property
    def free_count(self):
        return len(self.free_list)

    def _take(self, base):
        self._chunks[base] = bytearray(self.chunk_size)
        self._refs[base] = 1
        self._used[base] = 0
        self.allocs += 1

    def alloc_chunk(self):
        """Pop a chunk from the free list.

        :returns: the chunk base address, its contents are zeroed
        :raises OutOfChunks: if the free list is empty
        """
        if not self.free_list:
            raise OutOfChunks("No free chunks left in {region} memory".format(
                region=self.region.value))
        base = self.free_list.popleft()
        self._take(base)
        return base

    def alloc_span(self, count):
        """Allocate `count` contiguous chunks.

        :returns: the base address of the first one
        :raises OutOfChunks: if there's no run long enough
        """
        if count == 1:
            return self.alloc_chunk()
        free = sorted(self.free_list)
        run_start = 0
        for i in range(1, len(free) + 1):
            if i - run_start == count:
                chosen = set(free[run_start:i])
                self.free_list = deque(c for c in self.free_list
                                       if c not in chosen)
                for base in free[run_start:i]:
                    self._take(base)
                return free[run_start]
            if i < len(free) and free[i] != free[i - 1] + self.chunk_size:
                run_start = i
        raise OutOfChunks("No run of {count} free chunks in {region} memory"
                          .format(count=count, region=self.region.value))

    def chunks_for(self, size):
        "Number of chunks needed to hold `size` bytes."
        return max(1, -(-size // self.chunk_size))

    def chunk_of(self, address):
        "Base address of the chunk containing `address`."
        if not self.base <= address < self.limit:
            raise OutOfBounds("Address {addr:#x} is outside {region} memory"
                              .format(addr=address, region=self.region.value))
        return address - (address - self.base) % self.chunk_size

    def retain(self, base):
        if base not in self._refs:
            raise UnallocatedAccess("Chunk {base:#x} isn't allocated".format(
                base=base))
        self._refs[base] += 1

    def release(self, base):
        """Drop a reference to the chunk at `base`, freeing it when no
        references are left.

        :returns: ``True`` if the chunk went back to the free list
        """
        refs = self._refs.get(base)
        if refs is None:
            raise UnallocatedAccess("Chunk {base:#x} isn't allocated".format(
                base=base))
        if refs > 1:
            self._refs[base] = refs - 1
            return False
        used = self._used.pop(base)
        del self._refs[base]
        del self._chunks[base]
        self.used_bytes_freed += used
        self.wasted_bytes_freed += self.chunk_size - used
        self.frees += 1
        self.free_list.append(base)
        return True

    free_chunk = release

    def account(self, address, size):
        "Record `size` bytes from `address` as used, for fragmentation stats."
        while size > 0:
            base = self.chunk_of(address)
            take = min(size, base + self.chunk_size - address)
            if base in self._used:
                self._used[base] = min(self.chunk_size,
                                       self._used[base] + take)
            address += take
            size -= take

    def _segments(self, address, size):
        if size < 0:
            raise OutOfBounds("Negative length")
        if address < self.base or address + size > self.limit:
            raise OutOfBounds("Range {addr:#x}+{size} is outside {region} "
                              "memory".format(addr=address, size=size,
                                              region=self.region.value))
        while size > 0:
            base = self.chunk_of(address)
            chunk = self._chunks.get(base)
            if chunk is None:
                raise UnallocatedAccess("Address {addr:#x} of {region} memory "
                                        "isn't allocated".format(
                                            addr=address,
                                            region=self.region.value))
            offset = address - base
            take = min(size, self.chunk_size - offset)
            yield chunk, offset, take
            address += take
            size -= take

    def is_allocated(self, address, size):
        try:
            for _ in self._segments(address, max(size, 1)):
                pass
        except MemoryModelError:
            return False
        return True

    def read(self, address, size):
        """Read `size` bytes at `address`.

        :raises OutOfBounds: if the range isn't inside the region
        :raises UnallocatedAccess: if the range touches a free chunk
        """
        if size == 0:
            self.chunk_of(address)
            return b''
        return b''.join(bytes(chunk[offset:offset + take])
                        for chunk, offset, take in self._segments(address,
                                                                  size))

    def write(self, address, data):
        "Write `data` at `address`, same errors as :meth:`read`."
        data = memoryview(bytes(data))
        pos = 0
        for chunk, offset, take in self._segments(address, len(data)):
            chunk[offset:offset + take] = data[pos:pos + take]
            pos += take

    def wasted_bytes(self):
        "Unused bytes of the chunks currently allocated."
        return sum(self.chunk_size - used for used in self._used.values())

    def fragmentation(self):
        """Wasted bytes over allocated bytes, over every chunk handed out so
        far."""
        used = self.used_bytes_freed + sum(self._used.values())
        wasted = self.wasted_bytes_freed + self.wasted_bytes()
        total = used + wasted
        return wasted / total if total else 0.0

    def stats(self):
        return {
            'allocs': self.allocs,
            'frees': self.frees,
            'outstanding': self.outstanding,
            'free': self.free_count,
            'fragmentation': round(self.fragmentation(), 6),
        }


class Lease:
    """The chunks referenced by one object graph, released together."""

    __slots__ = ('_held',)

    def __init__(self):
        self._held = {}

    def __len__(self):
        return len(self._held)

    def hold(self, allocator, base):
        "Take a reference to a chunk, once per lease."
        key = (allocator.region, base)
        if key not in self._held:
            allocator.retain(base)
            self._held[key] = allocator

    def release(self):
        for (_, base), allocator in self._held.items():
            allocator.release(base)
        self._held.clear()


class ChunkCursor:
    """Bump allocator handing out ranges of the current chunk, fetching a new
    chunk from the free list when the current one is exhausted.

    The cursor itself holds a reference on its current chunk; ranges are
    charged to a :class:`Lease`.
    """

    def __init__(self, allocator, prefetch=True):
        self.allocator = allocator
        self.chunk = None
        self.offset = 0
        self.refills = 0
        if prefetch:
            self._refill()

    def _refill(self):
        chunk = self.allocator.alloc_chunk()
        if self.chunk is not None:
            self.allocator.release(self.chunk)
        self.chunk = chunk
        self.offset = 0
        self.refills += 1

    def reserve(self, size, lease):
        """Reserve `size` bytes.

        :returns: the address of the range
        :raises OutOfChunks: when the free list is exhausted
        """
        alloc = self.allocator
        if size > alloc.chunk_size:
            count = alloc.chunks_for(size)
            base = alloc.alloc_span(count)
            for i in range(count):
                chunk = base + i * alloc.chunk_size
                lease.hold(alloc, chunk)
                alloc.release(chunk)
            alloc.account(base, size)
            return base
        # an empty range still needs an address inside the chunk
        if self.chunk is None or self.offset + max(size, 1) > alloc.chunk_size:
            self._refill()
        address = self.chunk + self.offset
        self.offset += size
        lease.hold(alloc, self.chunk)
        alloc.account(address, size)
        return address

    def close(self):
        if self.chunk is not None:
            self.allocator.release(self.chunk)
            self.chunk = None


class Tlb:
    """Address translation for accelerator accesses to host memory.

    Only one contiguous range of pages is mapped at a time.

    :param int capacity: number of entries
    :param int page_size: bytes per page
    """

    def __init__(self, capacity=DEFAULT_TLB_ENTRIES,
                 page_size=DEFAULT_CHUNK_SIZE):
        self.capacity = capacity
        self.page_size = page_size
        self.virtual_base = None
        self.physical_base = None
        self.pages = 0
        self.hits = 0
        self.misses = 0

    def map_range(self, virtual_base, physical_base, pages):
        """Install the mapping of `pages` contiguous pages, replacing the
        current one."""
        if pages > self.capacity:
            raise MemoryModelError("Cannot map {pages} pages in a {cap} "
                                   "entries TLB".format(pages=pages,
                                                        cap=self.capacity))
        if virtual_base % self.page_size or physical_base % self.page_size:
            raise MemoryModelError("Mapping bases must be page aligned")
        self.virtual_base = virtual_base
        self.physical_base = physical_base
        self.pages = pages

    def translate(self, address):
        """Translate a virtual host address.

        :raises TlbMiss: if the address is outside the mapped range
        """
        if (self.virtual_base is None or not
                self.virtual_base <= address <
                self.virtual_base + self.pages * self.page_size):
            raise TlbMiss("Address {addr:#x} isn't mapped".format(
                addr=address))
        return self.physical_base + (address - self.virtual_base)

    def lookup(self, address, miss_penalty_ns):
        """Translate `address` charging a miss as extra latency.

        On a miss the page walk resolves the address as an identity mapping.

        :returns: a pair ``(physical, penalty_ns)``
        """
        try:
            physical = self.translate(address)
        except TlbMiss:
            self.misses += 1
            logger.warning("TLB miss on %#x, charging %.1f ns", address,
                           miss_penalty_ns)
            return address, miss_penalty_ns
        self.hits += 1
        return physical, 0.0


class MemorySystem:
    """Host and accelerator memory plus the TLB.

    The TLB starts with an identity mapping of the whole host pool, when it
    fits.
    """

    def __init__(self, host_pool_bytes=DEFAULT_POOL_BYTES,
                 accel_pool_bytes=DEFAULT_POOL_BYTES,
                 chunk_size=DEFAULT_CHUNK_SIZE,
                 tlb_entries=DEFAULT_TLB_ENTRIES):
        self.host = ChunkAllocator(Region.HOST, host_pool_bytes, chunk_size)
        self.accel = ChunkAllocator(Region.ACCEL, accel_pool_bytes, chunk_size)
        self.tlb = Tlb(tlb_entries, chunk_size)
        self.tlb.map_range(self.host.base, self.host.base,
                           min(self.host.n_chunks, tlb_entries))

    @property
    def chunk_size(self):
        return self.host.chunk_size

    def allocator(self, region):
        return self.host if region is Region.HOST else self.accel

    def alloc_chunk(self, region):
        return self.allocator(region).alloc_chunk()

    def read(self, region, address, size):
        return self.allocator(region).read(address, size)

    def write(self, region, address, data):
        self.allocator(region).write(address, data)

    def cursor(self, region, prefetch=True):
        return ChunkCursor(self.allocator(region), prefetch)

    def stats(self):
        return {
            'host': self.host.stats(),
            'accel': self.accel.stats(),
            'tlb': {'hits': self.tlb.hits, 'misses': self.tlb.misses},
        }
