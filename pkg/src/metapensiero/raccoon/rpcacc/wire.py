# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- protobuf3 subset wire codec
# :Created:   sab 17 ott 2026 10:04:12 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Byte level codec for the supported protobuf3 subset.

Every function here is pure and works on ``bytes`` (or anything
supporting the buffer protocol). Field values are plain Python values,
sub-messages are handled as already encoded payloads: the message level
functions live in :mod:`.message`.
"""

import enum
from collections import namedtuple
import struct


MASK32 = (1 << 32) - 1
MASK64 = (1 << 64) - 1
MAX_VARINT_BYTES = 10
MAX_FIELD_NUMBER = (1 << 29) - 1


class WireError(Exception):
    """Base of the errors raised while encoding or decoding wire data."""


class Truncated(WireError):
    """The input ends before the encoded item does."""


class Overflow(WireError):
    """A varint is longer than 10 bytes or doesn't fit 64 bits."""


class TypeMismatch(WireError):
    """A value (or a wire type) doesn't agree with the declared field kind."""


class MalformedTag(WireError):
    """The tag carries an unknown wire type or a zero field number."""


class InvalidUtf8(WireError):
    """A ``string`` field payload isn't valid UTF-8."""


class MalformedWire(WireError):
    """A message cannot be decoded under its schema."""


class WireType(enum.IntEnum):
    VARINT = 0
    FIXED64 = 1
    LEN_DELIMITED = 2
    FIXED32 = 5


SCALAR_KINDS = ('int32', 'int64', 'uint64', 'double', 'float', 'bool',
                'string', 'bytes')
"The scalar kinds, ``message`` being the only other one."

KIND_WIRE_TYPE = {
    'int32': WireType.VARINT,
    'int64': WireType.VARINT,
    'uint64': WireType.VARINT,
    'bool': WireType.VARINT,
    'double': WireType.FIXED64,
    'float': WireType.FIXED32,
    'string': WireType.LEN_DELIMITED,
    'bytes': WireType.LEN_DELIMITED,
    'message': WireType.LEN_DELIMITED,
}

PACKABLE_KINDS = frozenset(('int32', 'int64', 'uint64', 'bool', 'double',
                            'float'))
"Kinds whose repeated form uses the packed encoding."

_INT_RANGES = {
    'int32': (-(1 << 31), (1 << 31) - 1),
    'int64': (-(1 << 63), (1 << 63) - 1),
    'uint64': (0, MASK64),
}

_DOUBLE = struct.Struct('<d')
_FLOAT = struct.Struct('<f')


class FieldTag(namedtuple('FieldTag', 'field_number wire_type')):
    """A field tag, ``(field_number << 3) | wire_type`` varint encoded on the
    wire."""

    __slots__ = ()

    def encode(self):
        if not 1 <= self.field_number <= MAX_FIELD_NUMBER:
            raise MalformedTag("Invalid field number {num}".format(
                num=self.field_number))
        return encode_varint((self.field_number << 3) | self.wire_type)

    @classmethod
    def decode(cls, buf, pos=0, end=None):
        """Decode a tag at `pos`.

        :returns: a pair ``(tag, consumed)``
        :raises MalformedTag: if the wire type is unknown or the field number
          is zero
        """
        value, consumed = decode_varint(buf, pos, end)
        wt = value & 0x7
        num = value >> 3
        try:
            wt = WireType(wt)
        except ValueError:
            raise MalformedTag("Unknown wire type {wt} at offset {pos}".format(
                wt=wt, pos=pos)) from None
        if num == 0 or num > MAX_FIELD_NUMBER:
            raise MalformedTag("Invalid field number {num} at offset {pos}"
                               .format(num=num, pos=pos))
        return cls(num, wt), consumed


def encode_varint(value):
    """Encode an unsigned 64-bit integer as a varint.

    :param int value: the value, between ``0`` and ``2**64 - 1``
    :returns: from 1 to 10 bytes
    :raises Overflow: if the value is out of range
    """
    if value < 0 or value > MASK64:
        raise Overflow("Value {value} doesn't fit 64 unsigned bits".format(
            value=value))
    out = bytearray()
    while True:
        bits = value & 0x7F
        value >>= 7
        if value:
            out.append(bits | 0x80)
        else:
            out.append(bits)
            return bytes(out)


def decode_varint(buf, pos=0, end=None):
    """Decode a varint starting at `pos`, never looking at or past `end`.

    :returns: a pair ``(value, consumed)``
    :raises Truncated: if the input ends with the continuation bit set
    :raises Overflow: if the varint is longer than 10 bytes or the value
      exceeds 64 bits
    """
    if end is None:
        end = len(buf)
    result = 0
    shift = 0
    i = pos
    while True:
        if i >= end:
            raise Truncated("Varint at offset {pos} is truncated".format(
                pos=pos))
        if i - pos >= MAX_VARINT_BYTES:
            raise Overflow("Varint at offset {pos} is longer than {max} bytes"
                           .format(pos=pos, max=MAX_VARINT_BYTES))
        byte = buf[i]
        result |= (byte & 0x7F) << shift
        i += 1
        if not byte & 0x80:
            break
        shift += 7
    if result > MASK64:
        raise Overflow("Varint at offset {pos} exceeds 64 bits".format(
            pos=pos))
    return result, i - pos


def varint_size(value):
    "Length of the varint encoding of `value`."
    return max(1, (value.bit_length() + 6) // 7)


def _check_kind(kind, value):
    if kind in _INT_RANGES:
        if not isinstance(value, int) or isinstance(value, bool):
            raise TypeMismatch("Expected an integer for {kind}, got {value!r}"
                               .format(kind=kind, value=value))
        low, high = _INT_RANGES[kind]
        if not low <= value <= high:
            raise TypeMismatch("Value {value} out of range for {kind}".format(
                value=value, kind=kind))
    elif kind == 'bool':
        if not isinstance(value, bool):
            raise TypeMismatch("Expected a bool, got {value!r}".format(
                value=value))
    elif kind in ('double', 'float'):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise TypeMismatch("Expected a number for {kind}, got {value!r}"
                               .format(kind=kind, value=value))
    elif kind == 'string':
        if not isinstance(value, str):
            raise TypeMismatch("Expected a str, got {value!r}".format(
                value=value))
    elif kind in ('bytes', 'message'):
        if not isinstance(value, (bytes, bytearray, memoryview)):
            raise TypeMismatch("Expected bytes for {kind}, got {value!r}"
                               .format(kind=kind, value=value))
    else:
        raise TypeMismatch("Unknown field kind {kind!r}".format(kind=kind))


def encode_scalar(kind, value):
    """Encode the bare value of a field of the given `kind`, without tag.
    Length delimited kinds return the raw payload (no length prefix)."""
    _check_kind(kind, value)
    if kind in _INT_RANGES:
        return encode_varint(value & MASK64)
    elif kind == 'bool':
        return b'\x01' if value else b'\x00'
    elif kind == 'double':
        return _DOUBLE.pack(value)
    elif kind == 'float':
        try:
            return _FLOAT.pack(value)
        except OverflowError:
            raise TypeMismatch("Value {value} doesn't fit a float".format(
                value=value)) from None
    elif kind == 'string':
        return value.encode('utf-8')
    else:
        return bytes(value)


def int_from_varint(kind, raw):
    "Reinterpret the unsigned varint `raw` as a value of `kind`."
    if kind == 'int32':
        raw &= MASK32
        return raw - (1 << 32) if raw & (1 << 31) else raw
    elif kind == 'int64':
        return raw - (1 << 64) if raw & (1 << 63) else raw
    elif kind == 'bool':
        return raw != 0
    return raw


def encode_tlv(field_number, payload):
    "Tag, varint length and `payload` of a length delimited field."
    return (FieldTag(field_number, WireType.LEN_DELIMITED).encode() +
            encode_varint(len(payload)) + bytes(payload))


def encode_field(desc, value):
    """Encode one field in TV or TLV layout.

    :param desc: a :class:`~.schema.FieldDescriptor` (or anything having
      ``number``, ``kind`` and ``repeated`` attributes)
    :param value: the field value. For ``message`` fields the value is the
      already encoded sub-message payload. Repeated fields take a sequence
    :returns: the encoded bytes; an empty repeated value produces nothing
    :raises TypeMismatch: if the value doesn't match the declared kind
    """
    kind = desc.kind
    if desc.repeated:
        if isinstance(value, (str, bytes, bytearray, memoryview)):
            raise TypeMismatch("Field {num} is repeated, a sequence is needed"
                               .format(num=desc.number))
        if not value:
            return b''
        if kind in PACKABLE_KINDS:
            payload = b''.join(encode_scalar(kind, v) for v in value)
            return encode_tlv(desc.number, payload)
        return b''.join(encode_tlv(desc.number, encode_scalar(kind, v))
                        for v in value)
    wt = KIND_WIRE_TYPE.get(kind)
    if wt is None:
        raise TypeMismatch("Unknown field kind {kind!r}".format(kind=kind))
    payload = encode_scalar(kind, value)
    if wt is WireType.LEN_DELIMITED:
        return encode_tlv(desc.number, payload)
    return FieldTag(desc.number, wt).encode() + payload


def _skip_field(buf, wt, pos, end):
    if wt is WireType.VARINT:
        return decode_varint(buf, pos, end)[1]
    elif wt is WireType.FIXED64:
        size = 8
    elif wt is WireType.FIXED32:
        size = 4
    else:
        length, consumed = decode_varint(buf, pos, end)
        size = consumed + length
    if pos + size > end:
        raise Truncated("Field payload at offset {pos} is truncated".format(
            pos=pos))
    return size


def _decode_fixed(kind, buf, pos, end):
    st = _DOUBLE if kind == 'double' else _FLOAT
    if pos + st.size > end:
        raise Truncated("Fixed field at offset {pos} is truncated".format(
            pos=pos))
    return st.unpack_from(buf, pos)[0], st.size


def _decode_single(kind, buf, pos, end):
    # one unpacked value of a packable kind
    if kind in ('double', 'float'):
        return _decode_fixed(kind, buf, pos, end)
    raw, consumed = decode_varint(buf, pos, end)
    return int_from_varint(kind, raw), consumed


def _decode_packed(kind, buf, pos, end):
    values = []
    while pos < end:
        value, consumed = _decode_single(kind, buf, pos, end)
        values.append(value)
        pos += consumed
    return values


def _decode_payload(kind, payload, pos):
    if kind == 'string':
        try:
            return bytes(payload).decode('utf-8')
        except UnicodeDecodeError as e:
            raise InvalidUtf8("Invalid UTF-8 in string at offset {pos}: {e}"
                              .format(pos=pos, e=e)) from None
    return bytes(payload)


def decode_field(buf, schema, pos=0, end=None):
    """Decode the field whose tag starts at `pos`.

    :param buf: the message bytes
    :param schema: a :class:`~.schema.MessageSchema` used to find the
      field descriptor by number
    :param int pos: offset of the tag
    :param int end: the end of the enclosing message, defaults to the end
      of `buf`; nothing at or past it is ever read
    :returns: a triple ``(field_number, value, consumed)``. Unknown fields
      are skipped and have ``None`` as value. Repeated fields yield a list
      with the values carried by this record (packed or not); ``message``
      fields yield their payload bytes
    :raises Truncated: if the record doesn't fit before `end`
    :raises MalformedTag: if the wire type is unknown
    :raises TypeMismatch: if the wire type disagrees with the known field
    """
    if end is None:
        end = len(buf)
    tag, consumed = FieldTag.decode(buf, pos, end)
    num, wt = tag
    start = pos + consumed
    desc = schema.field(num)
    if desc is None:
        return num, None, consumed + _skip_field(buf, wt, start, end)
    kind = desc.kind
    expected = KIND_WIRE_TYPE[kind]
    if wt is WireType.LEN_DELIMITED:
        length, lconsumed = decode_varint(buf, start, end)
        pstart = start + lconsumed
        pend = pstart + length
        if pend > end:
            raise Truncated("Field {num} at offset {pos} is truncated".format(
                num=num, pos=pos))
        if expected is not WireType.LEN_DELIMITED:
            if desc.repeated:
                value = _decode_packed(kind, buf, pstart, pend)
                return num, value, pend - pos
            raise TypeMismatch("Field {num} can't be length delimited".format(
                num=num))
        value = _decode_payload(kind, buf[pstart:pend], pos)
        return num, [value] if desc.repeated else value, pend - pos
    if wt is not expected:
        raise TypeMismatch("Field {num} has wire type {wt}, {exp} expected"
                           .format(num=num, wt=wt.name, exp=expected.name))
    value, vconsumed = _decode_single(kind, buf, start, end)
    return num, [value] if desc.repeated else value, consumed + vconsumed


class RpcHeader(namedtuple('RpcHeader', 'class_id flags msg_len')):
    """The fixed header preceding each message on the transport: the message
    class id, some flag bits and the payload length."""

    __slots__ = ()

    FORMAT = struct.Struct('<HHI')
    SIZE = FORMAT.size

    def pack(self):
        return self.FORMAT.pack(self.class_id, self.flags, self.msg_len)

    @classmethod
    def unpack(cls, buf, pos=0):
        if len(buf) - pos < cls.SIZE:
            raise Truncated("RPC header needs {size} bytes".format(
                size=cls.SIZE))
        return cls(*cls.FORMAT.unpack_from(buf, pos))


def frame(class_id, payload, flags=0):
    "Prefix `payload` with its :class:`RpcHeader`."
    return RpcHeader(class_id, flags, len(payload)).pack() + bytes(payload)


def unframe(data):
    """Split a framed message.

    :returns: a pair ``(header, payload)``
    :raises Truncated: if the payload is shorter than declared
    """
    header = RpcHeader.unpack(data)
    payload = data[RpcHeader.SIZE:RpcHeader.SIZE + header.msg_len]
    if len(payload) != header.msg_len:
        raise Truncated("Framed payload is {got} bytes, {exp} declared".format(
            got=len(payload), exp=header.msg_len))
    return header, bytes(payload)
