# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- host/accelerator link cost model
# :Created:   sab 17 ott 2026 15:02:31 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Affine cost model of the link between host and accelerator.

A transfer of ``n`` bytes costs::

  latency_ns + per_txn_overhead_ns * txns + n / bandwidth_bytes_per_ns

where ``txns = max(1, ceil(n / max_txn_payload))``. Reads and writes cost
the same; an MMIO doorbell costs ``mmio_write_ns``. Every operation is
recorded in a :class:`TxnLedger`.
"""

from collections import deque, namedtuple
from dataclasses import asdict, dataclass, replace
import enum
import logging
import math

from .memory import Region


logger = logging.getLogger(__name__)

MMIO_BYTES = 8


class LinkError(Exception):
    """Base of the link errors."""


class UnknownProfile(LinkError):
    """The link profile name is unknown."""


class InvalidLinkConfig(LinkError):
    """A link parameter is out of range."""


@dataclass(frozen=True)
class LinkConfig:
    """Parameters of the link. The bandwidth is in bytes per nanosecond,
    that is GB/s."""

    latency_ns: float = 1250.0
    bandwidth_bytes_per_ns: float = 12.8
    per_txn_overhead_ns: float = 0.0
    mmio_write_ns: float = None
    max_txn_payload: int = 4096

    def __post_init__(self):
        if self.mmio_write_ns is None:
            object.__setattr__(self, 'mmio_write_ns', self.latency_ns)
        for name in ('latency_ns', 'bandwidth_bytes_per_ns', 'mmio_write_ns',
                     'max_txn_payload'):
            if not getattr(self, name) > 0:
                raise InvalidLinkConfig("{name} must be positive".format(
                    name=name))
        if self.per_txn_overhead_ns < 0:
            raise InvalidLinkConfig("per_txn_overhead_ns must not be negative")

    def transactions(self, length):
        "Number of transactions needed to move `length` bytes."
        return max(1, math.ceil(length / self.max_txn_payload))

    def cost_dma(self, length):
        return cost_dma(length, self)

    def as_dict(self):
        return asdict(self)


def cost_dma(length, cfg):
    """Simulated nanoseconds needed to move `length` bytes over the link
    described by `cfg`."""
    if length < 0:
        raise ValueError("Negative length")
    return (cfg.latency_ns +
            cfg.per_txn_overhead_ns * cfg.transactions(length) +
            length / cfg.bandwidth_bytes_per_ns)


PROFILES = {
    'pcie': {'latency_ns': 1250.0, 'bandwidth_bytes_per_ns': 12.8},
    'upi': {'latency_ns': 125.0, 'bandwidth_bytes_per_ns': 19.2},
    'onchip-70ns': {'latency_ns': 70.0, 'bandwidth_bytes_per_ns': 64.0},
}


def with_profile(name, **overrides):
    """Return the :class:`LinkConfig` of a named profile.

    :param str name: one of ``pcie``, ``upi``, ``onchip-70ns`` or
      ``custom``; the latter starts from the defaults
    :param overrides: replacement values for single parameters
    :raises UnknownProfile: if the name is unknown
    """
    if name == 'custom':
        params = {}
    else:
        try:
            params = dict(PROFILES[name])
        except KeyError:
            raise UnknownProfile("Unknown link profile {name!r}".format(
                name=name)) from None
    params.update((k, v) for k, v in overrides.items() if v is not None)
    return LinkConfig(**params)


class TxnKind(enum.Enum):
    DMA_READ = 'dma_read'
    DMA_WRITE = 'dma_write'
    MMIO_WRITE = 'mmio_write'


LedgerEntry = namedtuple('LedgerEntry', 'kind region address nbytes txns ns '
                         'tag')


class LedgerTotals(namedtuple('LedgerTotals', 'count txns bytes ns')):
    """Totals of one transaction kind: operations, transactions, bytes
    and nanoseconds."""

    __slots__ = ()

    def __sub__(self, other):
        return type(self)(*(a - b for a, b in zip(self, other)))

    def __add__(self, other):
        return type(self)(*(a + b for a, b in zip(self, other)))


_ZERO = LedgerTotals(0, 0, 0, 0.0)


class LedgerSnapshot(dict):
    """Totals per :class:`TxnKind`, supporting difference and sum."""

    def __sub__(self, other):
        return LedgerSnapshot((k, self[k] - other.get(k, _ZERO)) for k in self)

    def __add__(self, other):
        return LedgerSnapshot((k, self.get(k, _ZERO) + other.get(k, _ZERO))
                              for k in TxnKind)

    @classmethod
    def empty(cls):
        return cls((k, _ZERO) for k in TxnKind)

    @property
    def events(self):
        "Operations of every kind."
        return sum(t.count for t in self.values())

    @property
    def link_bytes(self):
        return sum(t.bytes for t in self.values())

    @property
    def link_ns(self):
        return sum(t.ns for t in self.values())

    def as_dict(self):
        return {k.value: t._asdict() for k, t in self.items()}


class TxnLedger:
    """Totals of every operation carried by the link.

    :param int keep_entries: how many of the most recent operations to keep
      as :class:`LedgerEntry` in :attr:`entries`, none by default
    """

    def __init__(self, keep_entries=0):
        self.entries = deque(maxlen=keep_entries)
        self._totals = {k: _ZERO for k in TxnKind}

    def __getitem__(self, kind):
        return self._totals[TxnKind(kind)]

    def record(self, kind, region, address, nbytes, txns, ns, tag=None):
        self._totals[kind] += LedgerTotals(1, txns, nbytes, ns)
        if self.entries.maxlen:
            self.entries.append(LedgerEntry(kind, region, address, nbytes,
                                            txns, ns, tag))

    def snapshot(self):
        return LedgerSnapshot(self._totals)

    def count(self, kind):
        return self[kind].count


class Interconnect:
    """The link between host and accelerator.

    :param config: a :class:`LinkConfig`
    :param memory: the :class:`~.memory.MemorySystem` the transfers act on
    :param float tlb_miss_penalty_ns: extra time charged when the TLB
      misses on a host address, by default a round trip
    """

    def __init__(self, config, memory, ledger=None, tlb_miss_penalty_ns=None):
        self.config = config
        self.memory = memory
        self.ledger = ledger if ledger is not None else TxnLedger()
        if tlb_miss_penalty_ns is None:
            tlb_miss_penalty_ns = 2 * config.latency_ns
        self.tlb_miss_penalty_ns = tlb_miss_penalty_ns
        self.registers = {}

    def reconfigure(self, **params):
        "Replace some link parameters, keeping the ledger."
        self.config = replace(self.config, **params)

    def _translate(self, region, address):
        if region is Region.HOST:
            return self.memory.tlb.lookup(address, self.tlb_miss_penalty_ns)
        return address, 0.0

    def _charge(self, kind, region, address, nbytes, tag, extra_ns=0.0):
        ns = cost_dma(nbytes, self.config) + extra_ns
        self.ledger.record(kind, region, address, nbytes,
                           self.config.transactions(nbytes), ns, tag)
        return ns

    def dma_write(self, address, data, region=Region.HOST, tag=None):
        """Move `data` across the link into `region` at `address`.

        :returns: a pair ``(None, elapsed_ns)``
        """
        physical, penalty = self._translate(region, address)
        self.memory.write(region, physical, data)
        return None, self._charge(TxnKind.DMA_WRITE, region, address,
                                  len(data), tag, penalty)

    def dma_write_scatter(self, segments, region=Region.HOST, tag=None):
        """Move several buffers in a single transfer, each landing at its own
        address of `region`.

        :param segments: a sequence of ``(address, data)`` pairs
        :returns: the elapsed nanoseconds
        """
        penalty = 0.0
        total = 0
        first = None
        for address, data in segments:
            physical, extra = self._translate(region, address)
            penalty += extra
            self.memory.write(region, physical, data)
            total += len(data)
            if first is None:
                first = address
        return self._charge(TxnKind.DMA_WRITE, region, first, total, tag,
                            penalty)

    def dma_read(self, address, length, region=Region.HOST, tag=None):
        """Move `length` bytes at `address` of `region` across the link.

        A read of zero bytes is a control only transaction and may have no
        address.

        :returns: a pair ``(data, elapsed_ns)``
        """
        if length == 0:
            return b'', self._charge(TxnKind.DMA_READ, region, address, 0, tag)
        physical, penalty = self._translate(region, address)
        data = self.memory.read(region, physical, length)
        return data, self._charge(TxnKind.DMA_READ, region, address, length,
                                  tag, penalty)

    def dma_read_gather(self, segments, region=Region.HOST, tag=None):
        """Read several ranges of `region` in a single transfer.

        :param segments: a sequence of ``(address, length)`` pairs
        :returns: a pair ``(chunks, elapsed_ns)``, `chunks` being the list
          of the bytes read, one item per segment
        """
        penalty = 0.0
        total = 0
        first = None
        chunks = []
        for address, length in segments:
            if length:
                physical, extra = self._translate(region, address)
                penalty += extra
                chunks.append(self.memory.read(region, physical, length))
            else:
                chunks.append(b'')
            total += length
            if first is None:
                first = address
        return chunks, self._charge(TxnKind.DMA_READ, region, first, total,
                                    tag, penalty)

    def mmio_write(self, register, value, tag=None):
        """Write a device register.

        :returns: a pair ``(None, elapsed_ns)``
        """
        self.registers[register] = value
        ns = self.config.mmio_write_ns
        self.ledger.record(TxnKind.MMIO_WRITE, Region.ACCEL, None, MMIO_BYTES,
                           1, ns, tag)
        return None, ns
