# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- reference codec
# :Created:   sab 17 ott 2026 17:21:03 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Straightforward, cost free encoder and decoder of :class:`~.message.Message`
trees.

It shares nothing with the codec used by the simulated datapath but the
varint primitives, so it can judge it. It never looks at memory, link or
placement bits.
"""

import struct

from .message import Message
from .wire import MalformedWire, WireError, decode_varint, encode_varint


_VARINT_KINDS = ('int32', 'int64', 'uint64', 'bool')


def _key(number, wire_type):
    return encode_varint(number << 3 | wire_type)


def _delimited(number, payload):
    return _key(number, 2) + encode_varint(len(payload)) + payload


def _bare(kind, value):
    if kind in _VARINT_KINDS:
        return encode_varint(int(value) % (1 << 64))
    if kind == 'double':
        return struct.pack('<d', value)
    return struct.pack('<f', value)


def ref_encode(message):
    """Encode a message tree.

    :param message: a :class:`~.message.Message`
    :returns: the payload, fields in ascending number, depth first
    """
    out = []
    for desc, value in message.items():
        num = desc.number
        kind = desc.kind
        values = value if desc.repeated else [value]
        if kind == 'message':
            out.extend(_delimited(num, ref_encode(v)) for v in values)
        elif kind == 'string':
            out.extend(_delimited(num, v.encode('utf-8')) for v in values)
        elif kind == 'bytes':
            out.extend(_delimited(num, bytes(v)) for v in values)
        elif desc.repeated:
            out.append(_delimited(num, b''.join(_bare(kind, v)
                                                for v in values)))
        else:
            wire_type = (0 if kind in _VARINT_KINDS else
                         1 if kind == 'double' else 5)
            out.append(_key(num, wire_type) + _bare(kind, value))
    return b''.join(out)


def _signed(raw, bits):
    raw &= (1 << bits) - 1
    return raw - (1 << bits) if raw >> (bits - 1) else raw


def _from_varint(kind, raw):
    if kind == 'int32':
        return _signed(raw, 32)
    if kind == 'int64':
        return _signed(raw, 64)
    if kind == 'bool':
        return bool(raw)
    return raw


def _take(buf, pos, size, end):
    if pos + size > end:
        raise MalformedWire("Field at offset {pos} runs past the message end"
                            .format(pos=pos))
    return buf[pos:pos + size]


def _unpacked(kind, buf, pos, end):
    # a single value of a varint or fixed kind
    if kind in _VARINT_KINDS:
        raw, size = decode_varint(buf, pos, end)
        return _from_varint(kind, raw), size
    fmt = '<d' if kind == 'double' else '<f'
    size = struct.calcsize(fmt)
    return struct.unpack(fmt, _take(buf, pos, size, end))[0], size


def _decode(buf, schema):
    values = {}
    pos = 0
    end = len(buf)
    while pos < end:
        key, size = decode_varint(buf, pos, end)
        pos += size
        num = key >> 3
        wire_type = key & 7
        if num == 0:
            raise MalformedWire("Field number zero")
        if wire_type == 2:
            length, size = decode_varint(buf, pos, end)
            pos += size
            payload = _take(buf, pos, length, end)
            pos += length
        elif wire_type == 0:
            raw, size = decode_varint(buf, pos, end)
            pos += size
        elif wire_type in (1, 5):
            size = 8 if wire_type == 1 else 4
            payload = _take(buf, pos, size, end)
            pos += size
        else:
            raise MalformedWire("Unsupported wire type {wt}".format(
                wt=wire_type))
        desc = schema.field(num)
        if desc is None:
            continue
        kind = desc.kind
        if kind == 'message' and wire_type == 2:
            value = _decode(payload, desc.message_type)
        elif kind == 'string' and wire_type == 2:
            value = payload.decode('utf-8')
        elif kind == 'bytes' and wire_type == 2:
            value = bytes(payload)
        elif desc.repeated and wire_type == 2:
            items = []
            p = 0
            while p < len(payload):
                item, size = _unpacked(kind, payload, p, len(payload))
                items.append(item)
                p += size
            values.setdefault(num, []).extend(items)
            continue
        elif wire_type == 0 and kind in _VARINT_KINDS:
            value = _from_varint(kind, raw)
        elif wire_type == 1 and kind == 'double':
            value = struct.unpack('<d', payload)[0]
        elif wire_type == 5 and kind == 'float':
            value = struct.unpack('<f', payload)[0]
        else:
            raise MalformedWire("Wire type {wt} doesn't fit field {name}"
                                .format(wt=wire_type, name=desc.name))
        if desc.repeated:
            values.setdefault(num, []).append(value)
        else:
            values[num] = value
    return Message(schema, values)


def ref_decode(wire, schema):
    """Decode a payload into a message tree.

    :param wire: the payload bytes
    :param schema: the root :class:`~.schema.MessageSchema`
    :raises MalformedWire: if the payload isn't valid under `schema`
    """
    try:
        return _decode(bytes(wire), schema)
    except MalformedWire:
        raise
    except (WireError, UnicodeDecodeError, struct.error) as e:
        raise MalformedWire(str(e)) from e
