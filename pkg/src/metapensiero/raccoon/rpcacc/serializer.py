# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- serialization strategies
# :Created:   dom 18 ott 2026 11:37:09 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Three ways of turning an in memory :class:`~.message.MessageValue` into
wire bytes, all producing the same bytes:

``cpu-only``
  the host fetches every accelerator resident range, encodes the whole
  message and DMA writes the result to the accelerator for transmission;

``accel-only``
  the accelerator walks the object graph by itself, paying a dependent DMA
  read for every host resident object and value it meets;

``memory-affinity``
  the host copies its own fields, unencoded, into a contiguous
  *pre-serialized* buffer, leaving pointers in place of the accelerator
  resident ones, and rings a doorbell; the accelerator fetches the buffer
  with a single DMA read, reads its own fields locally and encodes
  everything.

The pre-serialized buffer is a byte image made of records, each a 12 bytes
header (kind, flags, field number, length) followed by its payload:

======= ==========================================================
RAW     the unencoded host value: an 8 bytes cell, or the payload
ENCODED a field already encoded by the host
ACCPTR  8 bytes: the accelerator address of a value of `length`
        bytes or, with the ``FLAG_MESSAGE`` flag, the index of an
        accelerator resident sub-message
BEGIN   start of a host resident sub-message, no payload
END     its end, no payload
======= ==========================================================

Records follow ascending field numbers, depth first.
"""

from collections import namedtuple
import enum
import logging
import struct

from .memory import Lease, MemoryModelError, Region
from .message import (Handle, decode_cell, decode_payload, encode_message,
                      load_message)
from .metrics import AccelConfig, CpuCycleProxy, HostConfig, Timing
from .wire import RpcHeader, encode_field, encode_tlv, frame


logger = logging.getLogger(__name__)

DEFAULT_MEMCPY_THRESHOLD = 512
FLAG_MESSAGE = 0x01

_RECORD_HEADER = struct.Struct('<BBHII')
_POINTER = struct.Struct('<Q')


class SerializerError(Exception):
    """Base of the serializer errors."""


class DanglingHandle(SerializerError):
    """A handle of the message points to memory that isn't readable."""


class BadAccPtr(SerializerError):
    """An accelerator pointer of the pre-serialized buffer doesn't lead to
    allocated accelerator memory."""


class UnknownStrategy(SerializerError, ValueError):
    """The serialization strategy name is unknown."""


class Strategy(enum.Enum):
    CPU_ONLY = 'cpu-only'
    ACCEL_ONLY = 'accel-only'
    MEMORY_AFFINITY = 'memory-affinity'

    @classmethod
    def of(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(value.replace('_', '-'))
        except ValueError:
            raise UnknownStrategy("Unknown serialization strategy {value!r}"
                                  .format(value=value)) from None


class RecordKind(enum.IntEnum):
    RAW = 1
    ENCODED = 2
    ACCPTR = 3
    BEGIN = 4
    END = 5


Record = namedtuple('Record', 'kind flags field_number length payload')


def iter_records(image):
    """Parse a pre-serialized image.

    :returns: an iterator over :class:`Record` tuples
    :raises SerializerError: if the image is malformed
    """
    pos = 0
    end = len(image)
    while pos < end:
        if pos + _RECORD_HEADER.size > end:
            raise SerializerError("Truncated record header at offset {pos}"
                                  .format(pos=pos))
        kind, flags, _, number, length = _RECORD_HEADER.unpack_from(image, pos)
        pos += _RECORD_HEADER.size
        try:
            kind = RecordKind(kind)
        except ValueError:
            raise SerializerError("Unknown record kind {kind} at offset {pos}"
                                  .format(kind=kind, pos=pos)) from None
        if kind is RecordKind.ACCPTR:
            size = _POINTER.size
        elif kind in (RecordKind.BEGIN, RecordKind.END):
            size = 0
        else:
            size = length
        if pos + size > end:
            raise SerializerError("Truncated record payload at offset {pos}"
                                  .format(pos=pos))
        yield Record(kind, flags, number, length, bytes(image[pos:pos + size]))
        pos += size


class _RecordWriter:

    def __init__(self):
        self.data = bytearray()
        self.count = 0
        self.accel_objects = []

    def add(self, kind, number, payload=b'', flags=0, length=None):
        if length is None:
            length = len(payload)
        self.data += _RECORD_HEADER.pack(kind, flags, 0, number, length)
        self.data += payload
        self.count += 1

    def accel_pointer(self, number, handle):
        self.add(RecordKind.ACCPTR, number, _POINTER.pack(handle.address),
                 length=handle.length)

    def accel_object(self, number, value):
        self.add(RecordKind.ACCPTR, number,
                 _POINTER.pack(len(self.accel_objects)), flags=FLAG_MESSAGE,
                 length=0)
        self.accel_objects.append(value)


class PreSerializedBuffer:
    """The image built by :meth:`Serializer.pre_serialize`, living in a host
    DMA safe buffer at `address`.

    :param schema: the root :class:`~.schema.MessageSchema`
    :param int address: host address of the image
    :param bytes image: the records
    :param int records: number of records
    :param list accel_objects: the accelerator resident sub-messages the
      ``FLAG_MESSAGE`` pointers index
    """

    def __init__(self, schema, address, image, records, accel_objects,
                 lease=None):
        self.schema = schema
        self.address = address
        self.image = image
        self.records = records
        self.accel_objects = accel_objects
        self.lease = lease

    def __len__(self):
        return len(self.image)

    def __repr__(self):
        return '<{cname} {name}, {n} records, {size} bytes at {addr:#x}>'\
            .format(cname=type(self).__name__, name=self.schema.name,
                    n=self.records, size=len(self.image), addr=self.address)

    @property
    def class_id(self):
        return self.schema.class_id

    def iter_records(self):
        return iter_records(self.image)

    def release(self):
        if self.lease is not None:
            self.lease.release()
            self.lease = None


class TxArena(namedtuple('TxArena', 'address frame')):
    """The framed message as left in the accelerator staging area, ready to
    be handed to the transport."""

    __slots__ = ()

    @property
    def header(self):
        return RpcHeader.unpack(self.frame)

    @property
    def payload(self):
        return self.frame[RpcHeader.SIZE:]


SerializeResult = namedtuple('SerializeResult',
                             'strategy wire arena proxy timing ledger')


def _encode_raw(desc, raw):
    # encode the memory image of a value
    if desc.is_dereference:
        value = decode_payload(desc, raw)
        if desc.repeated and not desc.is_packed:
            value = [value]
    else:
        value = decode_cell(desc.kind, raw)
    return encode_field(desc, value)


class _DeviceWalk:
    """Encoding of an object graph done by the accelerator on its own: its
    memory is read locally, host memory with dependent DMA reads."""

    def __init__(self, serializer, tag, local_error=DanglingHandle):
        self.memory = serializer.memory
        self.interconnect = serializer.interconnect
        self.accel = serializer.accel
        self.tag = tag
        self.local_error = local_error
        self.cycles = 0
        self.link_ns = 0.0

    def read(self, handle):
        if handle.region is Region.ACCEL:
            try:
                data = self.memory.read(Region.ACCEL, handle.address,
                                        handle.length)
            except MemoryModelError as e:
                raise self.local_error(
                    "Cannot read {size} bytes of accelerator memory at "
                    "{addr:#x}: {e}".format(size=handle.length,
                                            addr=handle.address, e=e)) from e
            self.cycles += self.accel.cycles_for(handle.length)
            return data
        try:
            data, ns = self.interconnect.dma_read(handle.address,
                                                  handle.length, tag=self.tag)
        except MemoryModelError as e:
            raise DanglingHandle("Cannot read {size} bytes of host memory at "
                                 "{addr:#x}: {e}".format(
                                     size=handle.length, addr=handle.address,
                                     e=e)) from e
        self.link_ns += ns
        return data

    def encode(self, value):
        "Encode `value`, returning its payload."
        cells = b''
        if value.body is not None:
            cells = self.read(value.body)
        elif value.region is Region.HOST and _points_to_host(value):
            # the pointers must be fetched anyway
            _, ns = self.interconnect.dma_read(None, 0, tag=self.tag)
            self.link_ns += ns
        out = bytearray()
        for desc, slot in value.fields():
            if desc.is_message:
                if desc.repeated:
                    out += encode_field(desc, [self.encode(c) for c in slot])
                else:
                    out += encode_field(desc, self.encode(slot))
            elif desc.is_dereference:
                if isinstance(slot, list):
                    out += encode_field(desc, [
                        decode_payload(desc, self.read(h)) for h in slot])
                else:
                    out += encode_field(desc,
                                        decode_payload(desc, self.read(slot)))
            else:
                out += encode_field(desc, decode_cell(
                    desc.kind, cells, slot.address - value.body.address))
        return bytes(out)


def _points_to_host(value):
    for desc, slot in value.fields():
        if desc.is_message:
            children = slot if desc.repeated else [slot]
            if any(c.region is Region.HOST for c in children):
                return True
        elif desc.is_dereference:
            handles = slot if isinstance(slot, list) else [slot]
            if any(h.region is Region.HOST for h in handles):
                return True
    return False


class Serializer:
    """The serialization engine, host and accelerator halves.

    :param memory: the :class:`~.memory.MemorySystem`
    :param interconnect: the :class:`~.interconnect.Interconnect`
    :param host: the :class:`~.metrics.HostConfig`
    :param accel: the :class:`~.metrics.AccelConfig`
    :param int memcpy_threshold: copies of at least this size go to the
      memcpy engine
    :param bool memcpy_offload: whether the memcpy engine is used at all
    :param bool encoding_offload: whether the accelerator encodes the host
      fields; when off the host encodes them during pre-serialization
    """

    def __init__(self, memory, interconnect, host=None, accel=None,
                 memcpy_threshold=DEFAULT_MEMCPY_THRESHOLD,
                 memcpy_offload=True, encoding_offload=True):
        self.memory = memory
        self.interconnect = interconnect
        self.host = host or HostConfig()
        self.accel = accel or AccelConfig()
        self.memcpy_threshold = memcpy_threshold
        self.memcpy_offload = memcpy_offload
        self.encoding_offload = encoding_offload
        self.host_cursor = memory.cursor(Region.HOST, prefetch=False)
        self.accel_cursor = memory.cursor(Region.ACCEL, prefetch=False)

    def serialize(self, root, strategy=Strategy.MEMORY_AFFINITY, **options):
        """Serialize `root` with the given strategy.

        :returns: a :class:`SerializeResult`
        """
        strategy = Strategy.of(strategy)
        if strategy is Strategy.CPU_ONLY:
            return self.serialize_cpu_only(root)
        elif strategy is Strategy.ACCEL_ONLY:
            return self.serialize_accel_only(root)
        return self.serialize_memory_affinity(root, **options)

    # memory affinity

    def pre_serialize(self, root, memcpy_threshold=None, memcpy_offload=None,
                      encoding_offload=None):
        """Host stage: build the pre-serialized buffer and ring the doorbell.

        Host resident values are copied as they are, accelerator resident
        ones are replaced by pointers; nothing is encoded unless encoding
        offload is off.

        :returns: a triple ``(buffer, proxy, timing)``
        :raises DanglingHandle: if a host resident value can't be read
        """
        options = {
            'threshold': (self.memcpy_threshold if memcpy_threshold is None
                          else memcpy_threshold),
            'memcpy_offload': (self.memcpy_offload if memcpy_offload is None
                               else memcpy_offload),
            'encoding_offload': (self.encoding_offload
                                 if encoding_offload is None
                                 else encoding_offload),
        }
        proxy = CpuCycleProxy()
        writer = _RecordWriter()
        try:
            self._pre_object(root, writer, proxy, options)
        except MemoryModelError as e:
            raise DanglingHandle("Cannot read a host field of {name}: {e}"
                                 .format(name=root.schema.name, e=e)) from e
        image = bytes(writer.data)
        lease = Lease()
        address = self.host_cursor.reserve(len(image), lease)
        if image:
            self.memory.write(Region.HOST, address, image)
        buf = PreSerializedBuffer(root.schema, address, image, writer.count,
                                  writer.accel_objects, lease)
        _, ns = self.interconnect.mmio_write('serializer.doorbell',
                                             (address, len(image)),
                                             tag='doorbell')
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug("Pre-serialized %r: %s", buf, proxy.as_dict())
        return buf, proxy, Timing(host_ns=proxy.cpu_ns(self.host), link_ns=ns)

    def _pre_object(self, value, writer, proxy, options):
        for desc, slot in value.fields():
            proxy.fields_visited += 1
            num = desc.number
            if desc.is_message:
                for child in (slot if desc.repeated else [slot]):
                    if child.region is Region.ACCEL:
                        writer.accel_object(num, child)
                    else:
                        writer.add(RecordKind.BEGIN, num)
                        self._pre_object(child, writer, proxy, options)
                        writer.add(RecordKind.END, num)
            elif desc.is_dereference:
                for handle in (slot if isinstance(slot, list) else [slot]):
                    if handle.region is Region.ACCEL:
                        writer.accel_pointer(num, handle)
                    else:
                        self._pre_host(desc, self._read(handle), writer,
                                       proxy, options)
            else:
                self._pre_host(desc, self._read(slot), writer, proxy, options)

    def _read(self, handle):
        return self.memory.read(handle.region, handle.address, handle.length)

    def _pre_host(self, desc, raw, writer, proxy, options):
        if options['encoding_offload']:
            proxy.copy(len(raw), options['threshold'],
                       options['memcpy_offload'])
            writer.add(RecordKind.RAW, desc.number, raw)
        else:
            encoded = _encode_raw(desc, raw)
            proxy.encode(len(encoded))
            writer.add(RecordKind.ENCODED, desc.number, encoded)

    def accel_serialize(self, buf, flags=0):
        """Accelerator stage: fetch the pre-serialized buffer with one DMA
        read, encode it merging the local fields and leave the framed
        message in the TX arena.

        :returns: a pair ``(arena, timing)``
        :raises BadAccPtr: if a pointer doesn't lead to allocated
          accelerator memory
        """
        image, link_ns = self.interconnect.dma_read(buf.address, len(buf),
                                                    tag='pre-serialized')
        walk = _DeviceWalk(self, 'accptr-host', local_error=BadAccPtr)
        stack = [(buf.schema, bytearray(), None)]
        for record in iter_records(image):
            schema, out, _ = stack[-1]
            if record.kind is RecordKind.END:
                if len(stack) == 1:
                    raise SerializerError("Unbalanced END record")
                _, payload, number = stack.pop()
                parent = stack[-1][1]
                parent += encode_tlv(number, payload)
                continue
            desc = schema.field(record.field_number)
            if desc is None:
                raise SerializerError("Message {name} has no field number "
                                      "{num}".format(name=schema.name,
                                                     num=record.field_number))
            if record.kind is RecordKind.BEGIN:
                if not desc.is_message:
                    raise SerializerError("Field {name} isn't a message"
                                          .format(name=desc.name))
                stack.append((desc.message_type, bytearray(), desc.number))
            elif record.kind is RecordKind.RAW:
                out += _encode_raw(desc, record.payload)
            elif record.kind is RecordKind.ENCODED:
                out += record.payload
            else:
                pointer = _POINTER.unpack(record.payload)[0]
                if record.flags & FLAG_MESSAGE:
                    if pointer >= len(buf.accel_objects):
                        raise BadAccPtr("No accelerator object {idx}".format(
                            idx=pointer))
                    obj = buf.accel_objects[pointer]
                    if obj.region is not Region.ACCEL:
                        raise BadAccPtr("Object {obj!r} isn't in accelerator "
                                        "memory".format(obj=obj))
                    out += encode_tlv(desc.number, walk.encode(obj))
                else:
                    raw = walk.read(Handle(Region.ACCEL, pointer,
                                           record.length))
                    out += _encode_raw(desc, raw)
        if len(stack) != 1:
            raise SerializerError("Unbalanced BEGIN record")
        arena = self._to_arena(buf.class_id, stack[0][1], flags)
        cycles = self.accel.cycles_for(len(image)) + walk.cycles
        return arena, Timing(device_ns=self.accel.ns_for(cycles),
                             link_ns=link_ns + walk.link_ns)

    def serialize_memory_affinity(self, root, **options):
        """Pre-serialization on the host followed by encoding on the
        accelerator.

        :param options: the switches of :meth:`pre_serialize`
        :returns: a :class:`SerializeResult`
        """
        start = self.interconnect.ledger.snapshot()
        buf, proxy, host_timing = self.pre_serialize(root, **options)
        try:
            arena, device_timing = self.accel_serialize(buf)
        finally:
            buf.release()
        return self._result(Strategy.MEMORY_AFFINITY, arena, proxy,
                            host_timing + device_timing, start)

    # the other strategies

    def serialize_cpu_only(self, root):
        """Fetch the accelerator resident ranges, encode on the host, write
        the message to the accelerator.

        :returns: a :class:`SerializeResult`
        """
        start = self.interconnect.ledger.snapshot()
        link_ns = 0.0
        try:
            for _, handle in root.handles():
                if handle.region is Region.ACCEL and handle.length:
                    _, ns = self.interconnect.dma_read(
                        handle.address, handle.length, region=Region.ACCEL,
                        tag='fetch')
                    link_ns += ns
            message = load_message(self.memory, root)
        except MemoryModelError as e:
            raise DanglingHandle("Cannot fetch {name}: {e}".format(
                name=root.schema.name, e=e)) from e
        payload = encode_message(message)
        proxy = CpuCycleProxy()
        proxy.fields_visited = proxy.encode_ops_on_cpu = \
            message.count_fields()
        proxy.encoded_bytes_on_cpu = len(payload)
        arena, ns = self._to_arena(root.class_id, payload, remote=True)
        timing = Timing(host_ns=proxy.cpu_ns(self.host),
                        link_ns=link_ns + ns)
        return self._result(Strategy.CPU_ONLY, arena, proxy, timing, start)

    def serialize_accel_only(self, root):
        """The accelerator chases the pointers of the graph by itself.

        :returns: a :class:`SerializeResult`, with an empty cpu proxy
        """
        start = self.interconnect.ledger.snapshot()
        walk = _DeviceWalk(self, 'pointer-chase')
        payload = walk.encode(root)
        arena = self._to_arena(root.class_id, payload)
        cycles = self.accel.cycles_for(len(payload)) + walk.cycles
        timing = Timing(device_ns=self.accel.ns_for(cycles),
                        link_ns=walk.link_ns)
        return self._result(Strategy.ACCEL_ONLY, arena, CpuCycleProxy(),
                            timing, start)

    # helpers

    def _to_arena(self, class_id, payload, flags=0, remote=False):
        """Write the framed message in the TX arena and hand it over.

        :returns: the :class:`TxArena`, with the transfer time too when
          `remote`
        """
        data = frame(class_id, payload, flags)
        lease = Lease()
        try:
            address = self.accel_cursor.reserve(len(data), lease)
            if remote:
                _, ns = self.interconnect.dma_write(address, data,
                                                    region=Region.ACCEL,
                                                    tag='send')
            else:
                self.memory.write(Region.ACCEL, address, data)
            arena = TxArena(address, self.memory.read(Region.ACCEL, address,
                                                      len(data)))
        finally:
            lease.release()
        if remote:
            return arena, ns
        return arena

    def _result(self, strategy, arena, proxy, timing, start):
        ledger = self.interconnect.ledger.snapshot() - start
        logger.debug("Serialized %d bytes with %s in %.1f ns",
                     len(arena.payload), strategy.value, timing.total)
        return SerializeResult(strategy, arena.payload, arena, proxy, timing,
                               ledger)
