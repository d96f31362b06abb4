# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- message values
# :Created:   sab 17 ott 2026 16:05:50 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Two representations of a message.

:class:`Message` is a plain tree of Python values, what the application
code builds and reads. :class:`MessageValue` is the object graph as laid
out in simulated memory: each object has a *body* holding its direct
scalars in 8 bytes cells, dereference fields point to separate ranges, each
in the region chosen by its placement bit.

Every field present in a :class:`Message` is encoded, zero values
included; empty repeated fields are never present.
"""

from collections import namedtuple
import struct

from .memory import Lease, Region
from .wire import (PACKABLE_KINDS, MalformedWire, TypeMismatch, decode_field,
                   encode_field, encode_scalar)


CELL_SIZE = 8
DEFAULT_MAX_DEPTH = 64

_CELL_FORMATS = {
    'int32': struct.Struct('<q'),
    'int64': struct.Struct('<q'),
    'uint64': struct.Struct('<Q'),
    'bool': struct.Struct('<Q'),
    'double': struct.Struct('<d'),
    'float': struct.Struct('<d'),
}


def _check(desc, value):
    # raises TypeMismatch when the value doesn't fit the field
    if desc.is_message:
        if not isinstance(value, Message):
            raise TypeMismatch("Field {name} needs a Message, got {value!r}"
                               .format(name=desc.name, value=value))
        if value.schema is not desc.message_type:
            raise TypeMismatch("Field {name} needs a {exp} message, got {got}"
                               .format(name=desc.name, exp=desc.type_name,
                                       got=value.schema.name))
    else:
        encode_scalar(desc.kind, value)


class Message:
    """A message as a tree of plain values.

    :param schema: the :class:`~.schema.MessageSchema`
    :param values: a mapping of field numbers (or names) to values; repeated
      fields take sequences, message fields take :class:`Message`
      instances. ``None`` values and empty sequences mean absent
    """

    __slots__ = ('schema', '_values')

    def __init__(self, schema, values=None, **by_name):
        self.schema = schema
        self._values = {}
        if values:
            for key, value in dict(values).items():
                self.set(key, value)
        for key, value in by_name.items():
            self.set(key, value)

    def _desc(self, key):
        if isinstance(key, int):
            desc = self.schema.field(key)
            if desc is None:
                raise KeyError("Message {name} has no field number {num}"
                               .format(name=self.schema.name, num=key))
            return desc
        desc = self.schema.get_field_named(key)
        if desc is None:
            raise KeyError("Message {name} has no field {key!r}".format(
                name=self.schema.name, key=key))
        return desc

    def set(self, key, value):
        """Set a field, checking the value against its kind.

        :raises TypeMismatch: if the value doesn't fit the field
        """
        desc = self._desc(key)
        if value is None:
            self._values.pop(desc.number, None)
            return
        if desc.repeated:
            if isinstance(value, (str, bytes, bytearray, Message)):
                raise TypeMismatch("Field {name} is repeated".format(
                    name=desc.name))
            value = list(value)
            for v in value:
                _check(desc, v)
            if not value:
                self._values.pop(desc.number, None)
                return
        else:
            _check(desc, value)
            if isinstance(value, (bytearray, memoryview)):
                value = bytes(value)
        self._values[desc.number] = value

    def __contains__(self, key):
        try:
            return self._desc(key).number in self._values
        except KeyError:
            return False

    def __eq__(self, other):
        if not isinstance(other, Message):
            return NotImplemented
        return (self.schema.class_id == other.schema.class_id and
                self.schema.name == other.schema.name and
                self._values == other._values)

    __hash__ = None

    def __getitem__(self, key):
        desc = self._desc(key)
        return self._values[desc.number]

    def __len__(self):
        return len(self._values)

    def __repr__(self):
        return '<{cname} {name} {values}>'.format(
            cname=type(self).__name__, name=self.schema.name,
            values={self.schema.field(n).name: v
                    for n, v in sorted(self._values.items())})

    def get(self, key, default=None):
        try:
            return self[key]
        except KeyError:
            return default

    def items(self):
        "Yield ``(descriptor, value)`` pairs in ascending field number."
        for num in sorted(self._values):
            yield self.schema.field(num), self._values[num]

    def depth(self):
        "Nesting depth, ``1`` for a message without sub-messages."
        children = [0]
        for desc, value in self.items():
            if desc.is_message:
                for v in (value if desc.repeated else [value]):
                    children.append(v.depth())
        return 1 + max(children)

    def count_fields(self):
        "Present fields, those of the sub-messages included."
        count = 0
        for desc, value in self.items():
            count += 1
            if desc.is_message:
                for v in (value if desc.repeated else [value]):
                    count += v.count_fields()
        return count


def encode_message(message):
    """Encode `message` in ascending field number, depth first.

    :returns: the payload bytes
    """
    out = bytearray()
    for desc, value in message.items():
        if desc.is_message:
            if desc.repeated:
                value = [encode_message(v) for v in value]
            else:
                value = encode_message(value)
        out += encode_field(desc, value)
    return bytes(out)


def decode_message(buf, schema, max_depth=DEFAULT_MAX_DEPTH, _depth=1):
    """Decode `buf` as a `schema` message.

    Repeated fields accumulate, for singular ones the last occurrence wins.

    :raises WireError: on malformed input; :class:`~.wire.MalformedWire`
      when nesting exceeds `max_depth`
    """
    if _depth > max_depth:
        raise MalformedWire("Message nesting deeper than {max}".format(
            max=max_depth))
    values = {}
    pos = 0
    end = len(buf)
    while pos < end:
        num, value, used = decode_field(buf, schema, pos, end)
        pos += used
        if value is None:
            continue
        desc = schema.field(num)
        if desc.is_message:
            if desc.repeated:
                value = [decode_message(v, desc.message_type, max_depth,
                                        _depth + 1) for v in value]
            else:
                value = decode_message(value, desc.message_type, max_depth,
                                       _depth + 1)
        if desc.repeated:
            values.setdefault(num, []).extend(value)
        else:
            values[num] = value
    return Message(schema, values)


# Memory layout

Handle = namedtuple('Handle', 'region address length')


def encode_cell(kind, value):
    "The 8 bytes in memory representation of a direct scalar."
    encode_scalar(kind, value)
    return _CELL_FORMATS[kind].pack(value)


def decode_cell(kind, raw, offset=0):
    value = _CELL_FORMATS[kind].unpack_from(raw, offset)[0]
    if kind == 'bool':
        return value != 0
    return value


def encode_payload(desc, value):
    """Memory image of a dereference value: packed cells for repeated
    scalars, raw bytes for strings and bytes."""
    if desc.kind in PACKABLE_KINDS:
        return b''.join(encode_cell(desc.kind, v) for v in value)
    return encode_scalar(desc.kind, value)


def decode_payload(desc, raw):
    if desc.kind in PACKABLE_KINDS:
        return [decode_cell(desc.kind, raw, i)
                for i in range(0, len(raw), CELL_SIZE)]
    if desc.kind == 'string':
        return bytes(raw).decode('utf-8')
    return bytes(raw)


class MessageValue:
    """An object of the in memory message graph.

    :param schema: the :class:`~.schema.MessageSchema`
    :param region: the :class:`~.memory.Region` holding the body
    :param body: the :class:`Handle` of the direct scalar cells, ``None``
      when there are none
    :param slots: a dict mapping field numbers to a :class:`Handle` (direct
      scalars, strings, bytes, packed arrays), a list of them (repeated
      strings and bytes), a :class:`MessageValue` or a list of them
    """

    __slots__ = ('schema', 'region', 'body', 'slots', 'lease')

    def __init__(self, schema, region, body=None, slots=None, lease=None):
        self.schema = schema
        self.region = region
        self.body = body
        self.slots = slots if slots is not None else {}
        self.lease = lease

    def __repr__(self):
        return '<{cname} {name} in {region}, {n} fields>'.format(
            cname=type(self).__name__, name=self.schema.name,
            region=self.region.value, n=len(self.slots))

    @property
    def class_id(self):
        return self.schema.class_id

    def fields(self):
        "Yield ``(descriptor, slot)`` pairs in ascending field number."
        for num in sorted(self.slots):
            yield self.schema.field(num), self.slots[num]

    def objects(self):
        "This object and every descendant, depth first."
        yield self
        for desc, slot in self.fields():
            if desc.is_message:
                for child in (slot if desc.repeated else [slot]):
                    yield from child.objects()

    def handles(self):
        """Every memory range of the graph: bodies and dereference values,
        as ``(path, handle)`` pairs where `path` is the tuple of field
        numbers from this object (empty for the body)."""
        yield from self._handles(())

    def _handles(self, path):
        if self.body is not None:
            yield path, self.body
        for desc, slot in self.fields():
            p = path + (desc.number,)
            if desc.is_message:
                for child in (slot if desc.repeated else [slot]):
                    yield from child._handles(p)
            elif desc.is_dereference:
                for h in (slot if isinstance(slot, list) else [slot]):
                    yield p, h

    def release(self):
        "Give back the chunks of the graph, when it owns them."
        if self.lease is not None:
            self.lease.release()


def layout_body(region, address, numbers):
    """Slots of the direct scalars `numbers`, laid out in order in a body
    at `address`."""
    return {num: Handle(region, address + i * CELL_SIZE, CELL_SIZE)
            for i, num in enumerate(numbers)}


class _Store:

    def __init__(self, memory, cursors, lease):
        self.memory = memory
        self.cursors = cursors
        self.lease = lease

    def put(self, region, data):
        address = self.cursors[region].reserve(len(data), self.lease)
        if data:
            self.memory.write(region, address, data)
        return Handle(region, address, len(data))


def _region(acc):
    return Region.ACCEL if acc else Region.HOST


def _store(msg, region, path, view, store):
    slots = {}
    cells = []
    for desc, value in msg.items():
        p = path + (desc.number,)
        if desc.is_message:
            child_region = _region(view.is_acc(p, desc))
            if desc.repeated:
                slots[desc.number] = [_store(v, child_region, p, view, store)
                                      for v in value]
            else:
                slots[desc.number] = _store(value, child_region, p, view,
                                            store)
        elif desc.is_dereference:
            where = _region(view.is_acc(p, desc))
            if desc.repeated and not desc.is_packed:
                slots[desc.number] = [
                    store.put(where, encode_payload(desc, v)) for v in value]
            else:
                slots[desc.number] = store.put(where,
                                               encode_payload(desc, value))
        else:
            cells.append((desc.number, encode_cell(desc.kind, value)))
    body = None
    if cells:
        body = store.put(region, b''.join(c for _, c in cells))
        slots.update(layout_body(region, body.address,
                                 [n for n, _ in cells]))
    return MessageValue(msg.schema, region, body, slots)


class _NoPlacement:
    "Placement taken from the descriptors alone."

    @staticmethod
    def is_acc(path, desc):
        return desc.acc


def store_message(message, memory, view=None, region=Region.HOST,
                  cursors=None):
    """Lay `message` out in memory without charging any cost, as the
    application does when it builds an object.

    :param message: the :class:`Message`
    :param memory: the :class:`~.memory.MemorySystem`
    :param view: a :class:`~.schema.PlacementView` for the placement bits,
      by default the descriptors' flags
    :param region: where the root body goes
    :param cursors: a dict of :class:`~.memory.ChunkCursor` per region; by
      default new cursors are used and closed at the end
    :returns: the root :class:`MessageValue`, owning a lease on its chunks
    """
    own = cursors is None
    if own:
        cursors = {r: memory.cursor(r, prefetch=False) for r in Region}
    lease = Lease()
    try:
        root = _store(message, region, (), view or _NoPlacement, _Store(
            memory, cursors, lease))
    except Exception:
        lease.release()
        raise
    finally:
        if own:
            for c in cursors.values():
                c.close()
    root.lease = lease
    return root


def load_message(memory, value):
    """Read a graph back from memory into a :class:`Message`.

    :param memory: the :class:`~.memory.MemorySystem`
    :param value: the root :class:`MessageValue`
    """
    values = {}
    for desc, slot in value.fields():
        if desc.is_message:
            if desc.repeated:
                values[desc.number] = [load_message(memory, v) for v in slot]
            else:
                values[desc.number] = load_message(memory, slot)
        elif desc.is_dereference:
            if isinstance(slot, list):
                values[desc.number] = [
                    decode_payload(desc, memory.read(h.region, h.address,
                                                     h.length))
                    for h in slot]
            else:
                values[desc.number] = decode_payload(
                    desc, memory.read(slot.region, slot.address, slot.length))
        else:
            values[desc.number] = decode_cell(
                desc.kind, memory.read(slot.region, slot.address,
                                       slot.length))
    return Message(value.schema, values)
