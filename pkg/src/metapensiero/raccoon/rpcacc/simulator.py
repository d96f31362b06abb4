# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- simulation instance
# :Created:   lun 19 ott 2026 09:05:14 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""A host, an accelerator and the link between them, built from a
:class:`~.context.SimContext`."""

import logging

from .compute import ComputeUnit
from .context import SimContext
from .deserializer import Deserializer
from .interconnect import Interconnect, with_profile
from .memory import MemorySystem
from .metrics import AccelConfig, HostConfig
from .runtime import HostRuntime
from .schema import SchemaTable
from .serializer import Serializer


logger = logging.getLogger(__name__)


def link_config(ctx):
    "The :class:`~.interconnect.LinkConfig` described by `ctx`."
    return with_profile(
        ctx['link.profile'],
        latency_ns=ctx['link.latency_ns'],
        bandwidth_bytes_per_ns=ctx['link.bandwidth_gbps'],
        max_txn_payload=ctx['link.max_txn_payload'],
        per_txn_overhead_ns=ctx['link.per_txn_overhead_ns'],
        mmio_write_ns=ctx['link.mmio_write_ns'])


def kernel_list(value):
    """Split the ``cu.kernel`` value: unit ``i`` is programmed with item ``i``
    modulo the number of items."""
    names = [n.strip() for n in value.split(',') if n.strip()]
    return names or ['identity']


class Simulation:
    """Every simulated component, sharing one memory system, one link and
    one schema table.

    :param table: the :class:`~.schema.SchemaTable`, an empty one if missing
    :param ctx: the :class:`~.context.SimContext`, the defaults if missing
    """

    def __init__(self, table=None, ctx=None):
        ctx = ctx or SimContext()
        self.ctx = ctx
        self.table = table if table is not None else SchemaTable()
        self.host = HostConfig(**ctx.section('host'))
        self.accel = AccelConfig(**ctx.section('accel'))
        self.link = link_config(ctx)
        self.memory = MemorySystem(
            host_pool_bytes=ctx['memory.host_pool_bytes'],
            accel_pool_bytes=ctx['memory.accel_pool_bytes'],
            chunk_size=ctx['memory.chunk_size'],
            tlb_entries=ctx['memory.tlb_entries'])
        self.interconnect = Interconnect(
            self.link, self.memory,
            tlb_miss_penalty_ns=ctx['memory.tlb_miss_penalty_ns'])
        self.deserializer = Deserializer(
            self.table, self.memory, self.interconnect,
            lanes=ctx['deserializer.lanes'],
            temp_capacity=ctx['deserializer.temp_capacity'],
            max_depth=ctx['deserializer.max_depth'],
            mode=ctx['deserializer.mode'], accel=self.accel,
            record_bytes=ctx['deserializer.dispatch_record_bytes'])
        self.serializer = Serializer(
            self.memory, self.interconnect, self.host, self.accel,
            memcpy_threshold=ctx['serializer.memcpy_threshold'],
            memcpy_offload=ctx['serializer.memcpy_offload'],
            encoding_offload=ctx['serializer.encoding_offload'])
        kernels = kernel_list(ctx['cu.kernel'])
        self.units = [
            ComputeUnit(i, self.memory, self.interconnect,
                        kernel=kernels[i % len(kernels)],
                        throughput=ctx['cu.kernel_throughput_bytes_per_ns'],
                        reprogram_ns=ctx['cu.reprogram_us'] * 1000.0,
                        ring_entries=ctx['cu.ring_entries'])
            for i in range(ctx['cu.count'])]
        self.runtime = HostRuntime(self.table, self.memory, self.interconnect,
                                   auto_update=ctx['runtime.auto_update'])
        self.runtime.attach(self.deserializer)
        logger.debug("New simulation over %r", self.link)

    @property
    def ledger(self):
        return self.interconnect.ledger

    def unit(self, kernel_type=None):
        """The first compute unit, or the first programmed with
        `kernel_type`."""
        for unit in self.units:
            if kernel_type is None or unit.get_type() == kernel_type:
                return unit

    def stats(self):
        "Allocation and TLB statistics."
        return self.memory.stats()
