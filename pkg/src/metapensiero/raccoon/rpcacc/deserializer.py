# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- target aware deserializer
# :Created:   dom 18 ott 2026 09:12:44 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Deserializer lanes of the accelerator.

A lane parses an incoming message against the schema table and places
every field according to its placement bit: accelerator bound fields are
written straight into accelerator memory, host bound ones are staged into
the lane's temp buffer and reach host memory with as few DMA writes as
possible (*one shot* mode) or with one DMA write each (*field by field*
mode, the baseline).

The units moved to the host are: the body of a host object (its direct
scalars, 8 bytes each), each string or bytes value and each packed
array. Units are appended to the temp buffer in the order their host
addresses are assigned, so a flush is a single transfer into a staging
window mirroring the buffer. Units larger than the temp buffer bypass it
with a transfer of their own, after the pending ones are flushed.
"""

from collections import namedtuple
import enum
import logging
import struct

from metapensiero.signal import SignalAndHandlerInitMeta, signal

from .memory import Lease, Region
from .message import (Handle, MessageValue, encode_cell, encode_payload,
                      layout_body)
from .metrics import AccelConfig, Timing
from .schema import UnknownClassId
from .wire import MalformedWire, RpcHeader, WireError, decode_field


logger = logging.getLogger(__name__)

DEFAULT_LANES = 4
DEFAULT_TEMP_CAPACITY = 4096
DEFAULT_MAX_DEPTH = 64
DISPATCH_RECORD_BYTES = 64

_RECORD_HEAD = struct.Struct('<HHIQQ')


class DeserializeMode(enum.Enum):
    ONE_SHOT = 'one-shot'
    FIELD_BY_FIELD = 'field-by-field'

    @classmethod
    def of(cls, value):
        if isinstance(value, cls):
            return value
        return cls(value.replace('_', '-'))


class DeserializerError(Exception):
    """Base of the deserializer errors."""


class LaneBusy(DeserializerError):
    """The lane is parsing another message."""


class TempBuffer:
    """The lane's append only staging buffer.

    `pending` lists ``(host address, offset, length)`` triples, one per
    appended piece.
    """

    def __init__(self, capacity=DEFAULT_TEMP_CAPACITY):
        self.capacity = capacity
        self.data = bytearray(capacity)
        self.cursor = 0
        self.pending = []

    @property
    def free(self):
        return self.capacity - self.cursor

    def append(self, address, data):
        """Append as much of `data` as fits.

        :returns: the number of bytes taken
        """
        take = min(len(data), self.free)
        if take:
            self.data[self.cursor:self.cursor + take] = data[:take]
            self.pending.append((address, self.cursor, take))
            self.cursor += take
        return take

    def segments(self):
        return [(address, bytes(self.data[offset:offset + size]))
                for address, offset, size in self.pending]

    def reset(self):
        self.cursor = 0
        self.pending = []


class DeserializerLane:
    """One computing lane: temp buffer, pre allocated chunks and the schema
    stack."""

    def __init__(self, lane_id, memory, temp_capacity=DEFAULT_TEMP_CAPACITY):
        self.id = lane_id
        self.temp = TempBuffer(temp_capacity)
        self.host_cursor = memory.cursor(Region.HOST)
        self.accel_cursor = memory.cursor(Region.ACCEL)
        self.stack = []
        self.busy = False

    def __repr__(self):
        return '<{cname} {id}{busy}>'.format(
            cname=type(self).__name__, id=self.id,
            busy=' busy' if self.busy else '')


DispatchRecord = namedtuple('DispatchRecord',
                            'seq lane class_id root address')
"""The completion record delivered to the host: the host copy carries the
object graph, `address` is where the fixed size record landed."""


class DeserializeStats:
    """Counters of one deserialization."""

    __slots__ = ('fields', 'host_fields', 'host_bytes', 'host_dma_writes',
                 'flushes', 'accel_writes', 'accel_bytes', 'max_depth',
                 'wire_bytes')

    def __init__(self):
        for name in self.__slots__:
            setattr(self, name, 0)

    def as_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}


DeserializeResult = namedtuple('DeserializeResult',
                               'root record stats timing ledger')


class _Parse:
    # state of one message being parsed

    def __init__(self, lane, mode, view, lease):
        self.lane = lane
        self.mode = mode
        self.view = view
        self.lease = lease
        self.stats = DeserializeStats()
        self.link_ns = 0.0


class Deserializer(metaclass=SignalAndHandlerInitMeta):
    """The accelerator's deserialization engine.

    :param table: the :class:`~.schema.SchemaTable`
    :param memory: the :class:`~.memory.MemorySystem`
    :param interconnect: the :class:`~.interconnect.Interconnect`
    :param int lanes: number of lanes
    :param int temp_capacity: bytes of each temp buffer
    :param int max_depth: capacity of the schema stack
    :param mode: default :class:`DeserializeMode`
    :param accel: the :class:`~.metrics.AccelConfig`
    """

    @signal
    def on_message_dispatched(self, record):
        """Signal emitted when the completion record of a message reaches
        the host. Callbacks receive the :class:`DispatchRecord` as the
        `record` keyword parameter."""

    def __init__(self, table, memory, interconnect, lanes=DEFAULT_LANES,
                 temp_capacity=DEFAULT_TEMP_CAPACITY,
                 max_depth=DEFAULT_MAX_DEPTH, mode=DeserializeMode.ONE_SHOT,
                 accel=None, record_bytes=DISPATCH_RECORD_BYTES):
        if lanes < 1:
            raise DeserializerError("At least one lane is needed")
        self.table = table
        self.memory = memory
        self.interconnect = interconnect
        self.max_depth = max_depth
        self.mode = DeserializeMode.of(mode)
        self.accel = accel or AccelConfig()
        self.record_bytes = record_bytes
        self.lanes = [DeserializerLane(i, memory, temp_capacity)
                      for i in range(lanes)]
        self.notify_base = memory.alloc_chunk(Region.HOST)
        self.notify_slots = max(1, memory.chunk_size // record_bytes)
        self.seq = 0

    def idle_lane(self):
        "The lowest numbered idle lane, or ``None``."
        for lane in self.lanes:
            if not lane.busy:
                return lane

    def deserialize(self, wire, header, mode=None, lane=0):
        """Parse `wire` and place its fields.

        :param bytes wire: the message payload
        :param header: the :class:`~.wire.RpcHeader` (or anything with
          `class_id` and `msg_len`)
        :param mode: a :class:`DeserializeMode`, by default the engine one
        :param lane: the lane number
        :returns: a :class:`DeserializeResult`, whose `root` owns the
          chunks it lives in
        :raises UnknownClassId: if the class id isn't in the table
        :raises MalformedWire: if the payload doesn't decode
        :raises OutOfChunks: if memory is exhausted
        """
        mode = self.mode if mode is None else DeserializeMode.of(mode)
        lane = self.lanes[lane] if isinstance(lane, int) else lane
        if lane.busy:
            raise LaneBusy("Lane {id} is busy".format(id=lane.id))
        schema = self.table[header.class_id]
        if header.msg_len != len(wire):
            raise MalformedWire("Header declares {exp} bytes, {got} received"
                                .format(exp=header.msg_len, got=len(wire)))
        start = self.interconnect.ledger.snapshot()
        ctx = _Parse(lane, mode, self.table.snapshot(header.class_id),
                     Lease())
        ctx.stats.wire_bytes = len(wire)
        lane.busy = True
        try:
            root = self._parse_object(ctx, bytes(wire), schema, Region.HOST,
                                      (), 1)
            if lane.temp.pending:
                ctx.link_ns += self.flush_temp_buffer(lane, ctx)
            root.lease = ctx.lease
            record, ns = self.dispatch(lane, root)
            ctx.link_ns += ns
        except Exception:
            lane.temp.reset()
            ctx.lease.release()
            raise
        finally:
            lane.stack.clear()
            lane.busy = False
        cycles = (self.accel.cycles_for(len(wire)) + ctx.stats.fields)
        timing = Timing(device_ns=self.accel.ns_for(cycles),
                        link_ns=ctx.link_ns)
        ledger = self.interconnect.ledger.snapshot() - start
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug("Lane %d parsed class %d in %s mode: %s",
                         lane.id, header.class_id, mode.value,
                         ctx.stats.as_dict())
        return DeserializeResult(root, record, ctx.stats, timing, ledger)

    def deserialize_frame(self, data, mode=None, lane=0):
        "Like :meth:`deserialize`, on a message prefixed by its header."
        header = RpcHeader.unpack(data)
        return self.deserialize(data[RpcHeader.SIZE:], header, mode, lane)

    def _parse_object(self, ctx, buf, schema, region, path, depth):
        if depth > self.max_depth:
            raise MalformedWire("Message nesting deeper than {max}".format(
                max=self.max_depth))
        lane = ctx.lane
        lane.stack.append(schema)
        ctx.stats.max_depth = max(ctx.stats.max_depth, depth)
        values = {}
        pos = 0
        end = len(buf)
        while pos < end:
            try:
                num, value, used = decode_field(buf, schema, pos, end)
            except WireError as e:
                raise MalformedWire("Cannot decode {name} at offset {pos}: "
                                    "{e}".format(name=schema.name, pos=pos,
                                                 e=e)) from e
            pos += used
            if value is None:
                continue
            ctx.stats.fields += 1
            desc = schema.field(num)
            if desc.is_message:
                p = path + (num,)
                where = Region.ACCEL if ctx.view.is_acc(p, desc) else \
                    Region.HOST
                children = [self._parse_object(ctx, v, desc.message_type,
                                               where, p, depth + 1)
                            for v in (value if desc.repeated else [value])]
                if desc.repeated:
                    values.setdefault(num, []).extend(children)
                else:
                    values[num] = children[0]
            elif desc.repeated:
                values.setdefault(num, []).extend(value)
            else:
                values[num] = value
        lane.stack.pop()
        return self._place_object(ctx, schema, region, path, values)

    def _place_object(self, ctx, schema, region, path, values):
        slots = {}
        cells = []
        derefs = []
        for num in sorted(values):
            desc = schema.field(num)
            value = values[num]
            if desc.is_message:
                slots[num] = value
            elif desc.is_dereference:
                derefs.append((desc, value))
            else:
                cells.append((num, encode_cell(desc.kind, value)))
        body = None
        if cells:
            body = self._place(ctx, region,
                               [c for _, c in cells])
            slots.update(layout_body(region, body.address,
                                     [n for n, _ in cells]))
        for desc, value in derefs:
            p = path + (desc.number,)
            where = Region.ACCEL if ctx.view.is_acc(p, desc) else Region.HOST
            if desc.repeated and not desc.is_packed:
                slots[desc.number] = [
                    self._place(ctx, where, [encode_payload(desc, v)])
                    for v in value]
            else:
                slots[desc.number] = self._place(
                    ctx, where, [encode_payload(desc, value)])
        return MessageValue(schema, region, body, slots)

    def _place(self, ctx, region, pieces):
        """Place a unit made of `pieces` (the cells of a body, or a single
        payload) in `region`.

        :returns: the :class:`~.message.Handle` of the unit
        """
        size = sum(len(p) for p in pieces)
        lane = ctx.lane
        stats = ctx.stats
        if region is Region.ACCEL:
            address = lane.accel_cursor.reserve(size, ctx.lease)
            if size:
                self.memory.write(Region.ACCEL, address, b''.join(pieces))
                stats.accel_writes += 1
                stats.accel_bytes += size
            return Handle(region, address, size)
        address = lane.host_cursor.reserve(size, ctx.lease)
        if not size:
            return Handle(region, address, 0)
        stats.host_fields += len(pieces)
        stats.host_bytes += size
        if ctx.mode is DeserializeMode.FIELD_BY_FIELD:
            offset = address
            for piece in pieces:
                _, ns = self.interconnect.dma_write(offset, piece,
                                                    tag='field')
                ctx.link_ns += ns
                stats.host_dma_writes += 1
                offset += len(piece)
        else:
            data = b''.join(pieces)
            temp = lane.temp
            if size > temp.capacity:
                ctx.link_ns += self.flush_temp_buffer(lane, ctx)
                _, ns = self.interconnect.dma_write(address, data,
                                                    tag='large-field')
                ctx.link_ns += ns
                stats.host_dma_writes += 1
            else:
                done = 0
                while done < size:
                    done += temp.append(address + done, data[done:])
                    if not temp.free:
                        ctx.link_ns += self.flush_temp_buffer(lane, ctx)
        return Handle(region, address, size)

    def flush_temp_buffer(self, lane, ctx=None):
        """Write the used part of the lane's temp buffer to host memory with
        one DMA transfer.

        :returns: the elapsed nanoseconds, ``0`` when nothing is pending
        """
        lane = self.lanes[lane] if isinstance(lane, int) else lane
        temp = lane.temp
        if not temp.pending:
            return 0.0
        ns = self.interconnect.dma_write_scatter(temp.segments(), tag='flush')
        if ctx is not None:
            ctx.stats.host_dma_writes += 1
            ctx.stats.flushes += 1
        temp.reset()
        return ns

    def dispatch(self, lane, root):
        """Notify the host runtime of a completed message, writing a fixed
        size record in the host notification area.

        :returns: a pair ``(record, elapsed_ns)``
        """
        seq = self.seq
        self.seq += 1
        address = (self.notify_base +
                   (seq % self.notify_slots) * self.record_bytes)
        body = root.body.address if root.body is not None else 0
        raw = _RECORD_HEAD.pack(root.class_id, lane.id, seq & 0xFFFFFFFF,
                                body, len(root.slots))
        raw = raw.ljust(self.record_bytes, b'\0')
        _, ns = self.interconnect.dma_write(address, raw, tag='dispatch')
        record = DispatchRecord(seq, lane.id, root.class_id, root, address)
        self.on_message_dispatched.notify(record=record)
        return record, ns
