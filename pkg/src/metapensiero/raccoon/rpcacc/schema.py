# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- message schemas and schema table
# :Created:   sab 17 ott 2026 10:41:55 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

import logging
import struct
from types import MappingProxyType

from metapensiero.signal import SignalAndHandlerInitMeta, signal

from .wire import KIND_WIRE_TYPE, PACKABLE_KINDS, SCALAR_KINDS


logger = logging.getLogger(__name__)

MAX_CLASSES = 0xFFFF
MAX_FIELDS = 0xFF

SINGULAR = 'singular'
REPEATED = 'repeated'
DIRECT = 'direct'
DEREFERENCE = 'dereference'


class SchemaError(Exception):
    """Error raised while building or querying schemas."""


class UnknownClassId(SchemaError, KeyError):
    """The class id isn't in the table."""

    def __str__(self):
        return Exception.__str__(self)


class UnknownField(SchemaError):
    """A field path doesn't resolve against a message schema."""


class TableImageError(SchemaError):
    """A schema table image cannot be loaded."""


class BadMagic(TableImageError):
    """The image doesn't start with the expected magic."""


class VersionMismatch(TableImageError):
    """The image has been written by an incompatible version."""


class FieldDescriptor:
    """Runtime description of a message field.

    :param str name: the field name
    :param int number: the field number
    :param str kind: one of the scalar kinds or ``'message'``
    :param str label: either ``'singular'`` or ``'repeated'``
    :param bool acc: the placement flag, meaningful only on dereference
      fields
    :param str type_name: the referenced message name, for ``message`` kinds
    """

    __slots__ = ('name', 'number', 'kind', 'label', 'acc', 'type_name',
                 'message_type')

    def __init__(self, name, number, kind, label=SINGULAR, acc=False,
                 type_name=None, message_type=None):
        if kind not in KIND_WIRE_TYPE:
            raise SchemaError("Unknown field kind {kind!r}".format(kind=kind))
        if label not in (SINGULAR, REPEATED):
            raise SchemaError("Unknown label {label!r}".format(label=label))
        self.name = name
        self.number = number
        self.kind = kind
        self.label = label
        self.type_name = type_name
        self.message_type = message_type
        self.acc = bool(acc)
        if self.acc and not self.is_dereference:
            raise SchemaError("Field {name} is direct and cannot be placed "
                              "in accelerator memory".format(name=name))

    def __eq__(self, other):
        if not isinstance(other, FieldDescriptor):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return '<{cname} {label} {kind} {name} = {number}{acc}>'.format(
            cname=type(self).__name__, label=self.label,
            kind=self.type_name or self.kind, name=self.name,
            number=self.number, acc=' [Acc]' if self.acc else '')

    def _key(self):
        return (self.name, self.number, self.kind, self.label, self.acc,
                self.type_name)

    @property
    def repeated(self):
        return self.label == REPEATED

    @property
    def addressing(self):
        return DEREFERENCE if self.is_dereference else DIRECT

    @property
    def is_dereference(self):
        return self.repeated or self.kind in ('string', 'bytes', 'message')

    @property
    def is_message(self):
        return self.kind == 'message'

    @property
    def is_packed(self):
        return self.repeated and self.kind in PACKABLE_KINDS

    @property
    def wire_type(self):
        return KIND_WIRE_TYPE[self.kind]


class MessageSchema:
    """A message class: its id, name and fields.

    Fields are kept in ascending field number order, the serialization
    order.
    """

    def __init__(self, class_id, name, fields=()):
        if not 0 < class_id <= MAX_CLASSES:
            raise SchemaError("Invalid class id {cid}".format(cid=class_id))
        self.class_id = class_id
        self.name = name
        self._by_number = {}
        self._by_name = {}
        for f in fields:
            self.add_field(f)

    def __eq__(self, other):
        if not isinstance(other, MessageSchema):
            return NotImplemented
        return (self.class_id == other.class_id and self.name == other.name and
                self.fields == other.fields)

    def __hash__(self):
        return hash((self.class_id, self.name))

    def __iter__(self):
        return iter(self.fields)

    def __len__(self):
        return len(self._by_number)

    def __repr__(self):
        return '<{cname} {name} #{cid}, {n} fields>'.format(
            cname=type(self).__name__, name=self.name, cid=self.class_id,
            n=len(self))

    def add_field(self, desc):
        if desc.number in self._by_number:
            raise SchemaError("Field number {num} is taken already in {name}"
                              .format(num=desc.number, name=self.name))
        if desc.name in self._by_name:
            raise SchemaError("Field name {fname} is taken already in {name}"
                              .format(fname=desc.name, name=self.name))
        if len(self._by_number) >= MAX_FIELDS:
            raise SchemaError("Message {name} has more than {max} fields"
                              .format(name=self.name, max=MAX_FIELDS))
        self._by_number[desc.number] = desc
        self._by_name[desc.name] = desc
        self._sorted = None

    @property
    def fields(self):
        if getattr(self, '_sorted', None) is None:
            self._sorted = tuple(self._by_number[n]
                                 for n in sorted(self._by_number))
        return self._sorted

    def field(self, number):
        "Return the descriptor of field `number` or ``None``."
        return self._by_number.get(number)

    def get_field_named(self, name):
        "Return the descriptor of field `name` or ``None``."
        return self._by_name.get(name)

    def field_named(self, name):
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownField("Message {msg} has no field {name!r}".format(
                msg=self.name, name=name)) from None


class PlacementView:
    """A frozen view of the placement bits of a root message class, taken at
    the start of a deserialization."""

    __slots__ = ('class_id', '_overrides')

    def __init__(self, class_id, overrides):
        self.class_id = class_id
        self._overrides = MappingProxyType(dict(overrides))

    def is_acc(self, path, desc):
        """Placement bit of the field reached following `path` (a tuple of
        field numbers from the root), whose descriptor is `desc`."""
        return self._overrides.get(path, desc.acc)


class SchemaTable(metaclass=SignalAndHandlerInitMeta):
    """The compiled message classes indexed by class id, with one placement
    bit per dereference field.

    The bit of a field is its descriptor's ``acc`` flag until
    :meth:`set_placement` changes it. Changes are recorded per root class
    and field path, so the same message type may be placed differently
    when reached through different roots.
    """

    @signal
    def on_placement_change(self, class_id, path, acc):
        """Signal emitted when a placement bit changes. Every callback
        receives the following keyword parameters:

        :param int class_id: the root message class id
        :param tuple path: the field numbers leading to the field
        :param bool acc: the new bit value
        """

    def __init__(self, schemas=()):
        self._by_id = {}
        self._by_name = {}
        self._overrides = {}
        for s in schemas:
            self.add(s)

    def __contains__(self, class_id):
        return class_id in self._by_id

    def __eq__(self, other):
        if not isinstance(other, SchemaTable):
            return NotImplemented
        return (list(self) == list(other) and
                self._overrides == other._overrides)

    __hash__ = None

    def __getitem__(self, class_id):
        try:
            return self._by_id[class_id]
        except KeyError:
            raise UnknownClassId("Unknown class id {cid}".format(
                cid=class_id)) from None

    def __iter__(self):
        return iter(self._by_id[cid] for cid in sorted(self._by_id))

    def __len__(self):
        return len(self._by_id)

    def add(self, schema):
        if schema.class_id in self._by_id:
            raise SchemaError("Class id {cid} is taken already".format(
                cid=schema.class_id))
        if schema.name in self._by_name:
            raise SchemaError("Message {name} is defined already".format(
                name=schema.name))
        if len(self._by_id) >= MAX_CLASSES:
            raise SchemaError("Too many message classes")
        self._by_id[schema.class_id] = schema
        self._by_name[schema.name] = schema

    def by_name(self, name):
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownClassId("Unknown message {name!r}".format(
                name=name)) from None

    def resolve_path(self, class_id, path):
        """Follow `path`, a sequence of field numbers, from the root class.

        :returns: the descriptor of the last field
        :raises UnknownField: if the path doesn't resolve or crosses a non
          message field
        """
        schema = self[class_id]
        desc = None
        for i, num in enumerate(path):
            if schema is None:
                raise UnknownField("Path {path} crosses the non message field "
                                   "{name}".format(path=path, name=desc.name))
            desc = schema.field(num)
            if desc is None:
                raise UnknownField("Message {msg} has no field number {num}"
                                   .format(msg=schema.name, num=num))
            schema = desc.message_type
        if desc is None:
            raise UnknownField("Empty field path")
        return desc

    def placement(self, class_id, path):
        "Current placement bit of the field at `path` from `class_id`."
        path = tuple(path)
        desc = self.resolve_path(class_id, path)
        return self._overrides.get((class_id, path), desc.acc)

    def set_placement(self, class_id, path, acc):
        """Set the placement bit of a dereference field.

        :returns: ``True`` if the bit changed
        :raises UnknownField: if the path doesn't lead to a dereference field
        """
        path = tuple(path)
        desc = self.resolve_path(class_id, path)
        if not desc.is_dereference:
            raise UnknownField("Field {name} is direct and has no placement "
                               "bit".format(name=desc.name))
        acc = bool(acc)
        if self._overrides.get((class_id, path), desc.acc) == acc:
            return False
        if acc == desc.acc:
            del self._overrides[(class_id, path)]
        else:
            self._overrides[(class_id, path)] = acc
        logger.debug("Placement of %s.%s is now %s", self[class_id].name,
                     '.'.join(str(n) for n in path),
                     'accel' if acc else 'host')
        self.on_placement_change.notify(class_id=class_id, path=path, acc=acc)
        return True

    def snapshot(self, class_id):
        "Return a :class:`PlacementView` of the bits of `class_id`."
        self[class_id]
        return PlacementView(class_id, {
            path: acc for (cid, path), acc in self._overrides.items()
            if cid == class_id})

    def overrides(self):
        "The bits changed at runtime, as a ``(class_id, path) -> acc`` dict."
        return dict(self._overrides)


# Binary image

MAGIC = b'RPCT'
VERSION = 1
_HEADER = struct.Struct('<4sHH')
_CLASS = struct.Struct('<HBB')
_FIELD = struct.Struct('<IBBHB')

KIND_CODES = {kind: i for i, kind in enumerate(SCALAR_KINDS + ('message',),
                                               start=1)}
_CODE_KINDS = {v: k for k, v in KIND_CODES.items()}

FLAG_REPEATED = 0x1
FLAG_ACC = 0x2
FLAG_DEREFERENCE = 0x4


def _encode_name(name):
    raw = name.encode('utf-8')
    if len(raw) > 0xFF:
        raise SchemaError("Name {name!r} is too long".format(name=name))
    return raw


def serialize_schema_table(table):
    """Produce the binary image of `table`.

    The layout is: a header with magic, version and class count; then for
    each class in ascending class id order a record with class id, field
    count and name, followed by one record per field with number, kind
    code, flags, referenced class id and name. Integers are little endian.
    The runtime placement changes aren't part of the image.
    """
    out = bytearray(_HEADER.pack(MAGIC, VERSION, len(table)))
    for schema in table:
        name = _encode_name(schema.name)
        out += _CLASS.pack(schema.class_id, len(schema), len(name))
        out += name
        for f in schema.fields:
            flags = ((FLAG_REPEATED if f.repeated else 0) |
                     (FLAG_ACC if f.acc else 0) |
                     (FLAG_DEREFERENCE if f.is_dereference else 0))
            ref = f.message_type.class_id if f.is_message else 0
            fname = _encode_name(f.name)
            out += _FIELD.pack(f.number, KIND_CODES[f.kind], flags, ref,
                               len(fname))
            out += fname
    return bytes(out)


def _unpack(st, image, pos):
    if pos + st.size > len(image):
        raise TableImageError("Image truncated at offset {pos}".format(
            pos=pos))
    return st.unpack_from(image, pos), pos + st.size


def _read_name(image, pos, size):
    if pos + size > len(image):
        raise TableImageError("Image truncated at offset {pos}".format(
            pos=pos))
    try:
        name = image[pos:pos + size].decode('utf-8')
    except UnicodeDecodeError as e:
        raise TableImageError("Bad name at offset {pos}".format(
            pos=pos)) from e
    return name, pos + size


def load_schema_table(image):
    """Rebuild a :class:`SchemaTable` from its binary image.

    :raises BadMagic: if the image doesn't start with the magic
    :raises VersionMismatch: if the version isn't supported
    :raises TableImageError: on any other inconsistency
    """
    image = bytes(image)
    if image[:len(MAGIC)] != MAGIC:
        raise BadMagic("Bad schema table magic {magic!r}".format(
            magic=image[:len(MAGIC)]))
    (_, version, count), pos = _unpack(_HEADER, image, 0)
    if version != VERSION:
        raise VersionMismatch("Schema table version {v}, {exp} supported"
                              .format(v=version, exp=VERSION))
    pending = []
    table = SchemaTable()
    for _ in range(count):
        (cid, nfields, nlen), pos = _unpack(_CLASS, image, pos)
        name, pos = _read_name(image, pos, nlen)
        schema = MessageSchema(cid, name)
        for _ in range(nfields):
            (num, code, flags, ref, flen), pos = _unpack(_FIELD, image, pos)
            fname, pos = _read_name(image, pos, flen)
            kind = _CODE_KINDS.get(code)
            if kind is None:
                raise TableImageError("Unknown kind code {code}".format(
                    code=code))
            pending.append((schema, fname, num, kind, flags, ref))
        table.add(schema)
    if pos != len(image):
        raise TableImageError("Trailing bytes after the last class")
    for schema, fname, num, kind, flags, ref in pending:
        mtype = None
        type_name = None
        if kind == 'message':
            if ref not in table:
                raise TableImageError("Field {name} refers to the unknown "
                                      "class id {ref}".format(name=fname,
                                                              ref=ref))
            mtype = table[ref]
            type_name = mtype.name
        schema.add_field(FieldDescriptor(
            fname, num, kind,
            REPEATED if flags & FLAG_REPEATED else SINGULAR,
            acc=bool(flags & FLAG_ACC), type_name=type_name,
            message_type=mtype))
    return table


def without_acc(table):
    """A copy of `table` where no field carries the ``Acc`` label, that is
    everything is placed in host memory."""
    copy = load_schema_table(serialize_schema_table(table))
    for schema in copy:
        for f in schema.fields:
            f.acc = False
    return copy


def table_report(table):
    """Return a human readable description of `table`, one line per field
    with its addressing and current placement."""
    lines = []
    for schema in table:
        lines.append('message {name} (class id {cid})'.format(
            name=schema.name, cid=schema.class_id))
        for f in schema.fields:
            if f.is_dereference:
                where = 'accel' if f.acc else 'host'
            else:
                where = 'inline'
            lines.append('  {num:>5} {label:<8} {kind:<20} {name:<24} '
                         '{addr:<11} {where}'.format(
                             num=f.number, label=f.label,
                             kind=f.type_name or f.kind, name=f.name,
                             addr=f.addressing, where=where))
    overrides = table.overrides()
    if overrides:
        lines.append('runtime placement changes')
        for (cid, path), acc in sorted(overrides.items()):
            lines.append('  {cls}:{path} -> {where}'.format(
                cls=table[cid].name, path='.'.join(str(n) for n in path),
                where='accel' if acc else 'host'))
    return '\n'.join(lines) + '\n'
