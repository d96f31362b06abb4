# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- reconfigurable compute units
# :Created:   dom 18 ott 2026 15:20:36 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Compute units running offloaded kernels on accelerator memory.

The host submits a :class:`Descriptor` with an MMIO write into the unit's
descriptor ring; the unit consumes descriptors in order, runs its kernel
reading and writing accelerator memory only, and reports the result length
with one DMA write into the notification ring, which lives in host memory.
"""

from collections import deque
from dataclasses import dataclass
import logging
import struct

from metapensiero.signal import SignalAndHandlerInitMeta, signal

from .kernels import REGISTRY, KernelError
from .memory import Region


logger = logging.getLogger(__name__)

DEFAULT_RING_ENTRIES = 64
DEFAULT_THROUGHPUT = 8.0
DEFAULT_REPROGRAM_NS = 100_000.0

STATUS_OK = 0
STATUS_OUTPUT_OVERFLOW = 1
STATUS_KERNEL_ERROR = 2

NOTIFICATION_ENTRY = struct.Struct('<IBBHQ')


class ComputeUnitError(Exception):
    """Base of the compute unit errors."""


class CuBusy(ComputeUnitError):
    """The unit has tasks in flight."""


class CuUnavailable(ComputeUnitError):
    """The unit isn't programmed with a usable kernel."""


class RingFull(ComputeUnitError):
    """The descriptor ring has no free entry."""


class DescriptorInvalid(ComputeUnitError):
    """The descriptor ranges aren't allocated or overlap."""


@dataclass(frozen=True)
class Descriptor:
    """A task: input and output ranges of accelerator memory."""

    input_addr: int
    input_size: int
    output_addr: int
    output_buf_size: int


class TaskEvent:
    """Handle of a submitted task.

    `notify_address` is the host address of its notification entry;
    `completed_at` is the simulated time of the completion, known once the
    task has run.
    """

    def __init__(self, seq, unit, descriptor, notify_address, submitted_at):
        self.seq = seq
        self.unit = unit
        self.descriptor = descriptor
        self.notify_address = notify_address
        self.submitted_at = submitted_at
        self.started_at = None
        self.completed_at = None
        self.done = False
        self.result_len = None
        self.status = None

    def __repr__(self):
        return '<{cname} {unit}#{seq} {state}>'.format(
            cname=type(self).__name__, unit=self.unit.id, seq=self.seq,
            state='done' if self.done else 'pending')

    @property
    def ok(self):
        return self.done and self.status == STATUS_OK


def _overlap(a, asize, b, bsize):
    return a < b + bsize and b < a + asize


class ComputeUnit(metaclass=SignalAndHandlerInitMeta):
    """A reconfigurable block of the accelerator.

    :param int cu_id: the unit number
    :param memory: the :class:`~.memory.MemorySystem`
    :param interconnect: the :class:`~.interconnect.Interconnect`
    :param kernel: the kernel the unit starts programmed with, a name or a
      :class:`~.kernels.Kernel`
    :param float throughput: kernel bytes per ns
    :param float reprogram_ns: time taken by :meth:`program`
    :param int ring_entries: size of both rings
    """

    @signal
    def on_program(self, unit, kernel_type):
        """Signal emitted after the unit is programmed. Callbacks receive the
        `unit` and the new `kernel_type` name."""

    @signal
    def on_task_complete(self, event):
        """Signal emitted when a task completes, with the :class:`TaskEvent`
        as `event`."""

    def __init__(self, cu_id, memory, interconnect, kernel='identity',
                 throughput=DEFAULT_THROUGHPUT,
                 reprogram_ns=DEFAULT_REPROGRAM_NS,
                 ring_entries=DEFAULT_RING_ENTRIES):
        self.id = cu_id
        self.memory = memory
        self.interconnect = interconnect
        self.kernel = REGISTRY[kernel]
        self.throughput = throughput
        self.reprogram_ns = reprogram_ns
        self.ring_entries = ring_entries
        self.ring = deque()
        self.notify_base = memory.alloc_chunk(Region.HOST)
        self.busy_until = 0.0
        self.seq = 0
        self.completed = 0

    def __repr__(self):
        return '<{cname} {id} {type}, {n} in flight>'.format(
            cname=type(self).__name__, id=self.id, type=self.get_type(),
            n=len(self.ring))

    @property
    def in_flight(self):
        return len(self.ring)

    @property
    def available(self):
        return self.kernel.available

    def get_type(self):
        "The type name of the kernel the unit is programmed with."
        return self.kernel.type_name

    def program(self, kernel, now=0.0):
        """Swap the kernel of the unit.

        :param kernel: a kernel name, type name or :class:`~.kernels.Kernel`
        :param float now: the current simulated time
        :returns: the reconfiguration time in ns
        :raises CuBusy: if tasks are in flight
        """
        if self.ring:
            raise CuBusy("Unit {id} has {n} tasks in flight".format(
                id=self.id, n=len(self.ring)))
        self.kernel = REGISTRY[kernel]
        self.busy_until = max(self.busy_until, now) + self.reprogram_ns
        logger.info("Unit %d programmed with %s", self.id, self.kernel.name)
        self.on_program.notify(unit=self, kernel_type=self.get_type())
        return self.reprogram_ns

    def _check(self, desc):
        accel = self.memory.accel
        if desc.input_size < 0 or desc.output_buf_size < 0:
            raise DescriptorInvalid("Negative sizes in {desc}".format(
                desc=desc))
        if not accel.is_allocated(desc.input_addr, desc.input_size):
            raise DescriptorInvalid("Input range {addr:#x}+{size} isn't "
                                    "allocated".format(
                                        addr=desc.input_addr,
                                        size=desc.input_size))
        if not accel.is_allocated(desc.output_addr, desc.output_buf_size):
            raise DescriptorInvalid("Output range {addr:#x}+{size} isn't "
                                    "allocated".format(
                                        addr=desc.output_addr,
                                        size=desc.output_buf_size))
        if _overlap(desc.input_addr, desc.input_size, desc.output_addr,
                    desc.output_buf_size):
            raise DescriptorInvalid("Input and output ranges overlap")

    def submit_task(self, desc, now=0.0):
        """Put a descriptor in the ring with an MMIO write.

        :param desc: the :class:`Descriptor`
        :param float now: the current simulated time
        :returns: the :class:`TaskEvent`, not done yet
        :raises CuUnavailable: if the unit has no usable kernel
        :raises RingFull: if the descriptor ring is full
        :raises DescriptorInvalid: if the ranges are wrong
        """
        if not self.available:
            raise CuUnavailable("Unit {id} is programmed with {name}".format(
                id=self.id, name=self.kernel.name))
        if len(self.ring) >= self.ring_entries:
            raise RingFull("Descriptor ring of unit {id} is full".format(
                id=self.id))
        self._check(desc)
        _, ns = self.interconnect.mmio_write(
            'cu{id}.descriptor'.format(id=self.id),
            (desc.input_addr, desc.input_size, desc.output_addr,
             desc.output_buf_size), tag='cu-submit')
        slot = self.seq % self.ring_entries
        event = TaskEvent(self.seq, self, desc,
                          self.notify_base + slot * NOTIFICATION_ENTRY.size,
                          now + ns)
        self.seq += 1
        self.ring.append(event)
        return event

    def poll(self, event):
        """Wait for `event` to complete, running the tasks ahead of it.

        :returns: the result length
        """
        while not event.done:
            if not self.ring:
                raise ComputeUnitError("Task {seq} isn't queued on unit {id}"
                                       .format(seq=event.seq, id=self.id))
            self._run_next()
        return event.result_len

    def _run_next(self):
        event = self.ring[0]
        desc = event.descriptor
        start = max(event.submitted_at, self.busy_until)
        data = self.memory.read(Region.ACCEL, desc.input_addr, desc.input_size)
        try:
            out = self.kernel(data)
        except KernelError as e:
            logger.warning("Task %d of unit %d failed: %s", event.seq, self.id,
                           e)
            out = b''
            status = STATUS_KERNEL_ERROR
        else:
            if len(out) > desc.output_buf_size:
                logger.warning("Task %d of unit %d needs %d bytes of output, "
                               "%d available", event.seq, self.id, len(out),
                               desc.output_buf_size)
                status = STATUS_OUTPUT_OVERFLOW
            else:
                self.memory.write(Region.ACCEL, desc.output_addr, out)
                status = STATUS_OK
        compute_ns = desc.input_size / self.throughput
        entry = NOTIFICATION_ENTRY.pack(len(out), 1, status, 0, event.seq)
        _, notify_ns = self.interconnect.dma_write(event.notify_address,
                                                   entry, tag='cu-notify')
        self.ring.popleft()
        event.started_at = start
        event.completed_at = start + compute_ns + notify_ns
        event.result_len = len(out)
        event.status = status
        event.done = True
        self.busy_until = event.completed_at
        self.completed += 1
        self.on_task_complete.notify(event=event)

    def read_notification(self, event):
        """Read the notification entry of `event` from host memory.

        :returns: a triple ``(result_len, done, status)``
        """
        raw = self.memory.read(Region.HOST, event.notify_address,
                               NOTIFICATION_ENTRY.size)
        result_len, done, status, _, seq = NOTIFICATION_ENTRY.unpack(raw)
        if seq != event.seq:
            return 0, False, STATUS_OK
        return result_len, bool(done), status
