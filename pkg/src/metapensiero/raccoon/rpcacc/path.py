# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- field path resolution utility
# :Created:   mar 16 feb 2016 19:46:39 CET
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2016, 2017, 2018, 2026 Alberto Berti
#

from collections import abc
import re
from weakref import WeakValueDictionary


PATHSEP = '.'
VALID_FRAGMENT = re.compile(r'^(?:[A-Za-z_][A-Za-z0-9_]*|\d+)$',
                            flags=re.ASCII)


def norm_path(value):
    """Return a normalized tuple of the value. Fragments are field names or
    field numbers; a dotted string is split on ``'.'`` and its numeric
    fragments converted to integers.
    """
    if isinstance(value, FieldPath):
        return value._path
    if isinstance(value, int):
        return (value,)
    if isinstance(value, str):
        value = value.split(PATHSEP)
    elif not isinstance(value, abc.Iterable):
        raise PathError("Invalid path {value!r}".format(value=value))
    normalized = []
    for frag in value:
        if isinstance(frag, str):
            if not VALID_FRAGMENT.match(frag):
                raise PathError("Invalid path fragment {frag!r}".format(
                    frag=frag))
            if frag.isdigit():
                frag = int(frag)
        elif not isinstance(frag, int) or isinstance(frag, bool):
            raise PathError("Invalid path fragment {frag!r}".format(frag=frag))
        normalized.append(frag)
    return tuple(normalized)


class PathError(Exception):
    """Error raised during path operations"""


class FieldPathMeta(type):

    REGISTRY = WeakValueDictionary()

    def __call__(cls, path):
        reg = cls.REGISTRY
        if isinstance(path, cls):
            return path
        path = norm_path(path)
        if not path:
            raise PathError("'path' must have a value")
        exists = reg.get(path)
        if exists is not None:
            result = exists
        else:
            result = super().__call__(path)
            reg[path] = result
        return result


class FieldPath(metaclass=FieldPathMeta):
    """Helper used to address a field nested inside a message.

    :param path: either a *dotted* string, a field number or a sequence of
      fragments, each being a field name or a field number

    Instances are interned: building the same path twice returns the same
    object.
    """

    __slots__ = ('_path', '__weakref__')

    def __init__(self, path):
        self._path = norm_path(path)

    def __add__(self, other):
        """Append a fragment, a sequence of them or another path.

        :returns: an instance of this class
        """
        return type(self)(self._path + norm_path(other))

    def __eq__(self, other):
        try:
            return norm_path(other) == self._path
        except PathError:
            return False

    def __getitem__(self, index):
        return self._path[index]

    def __hash__(self):
        return hash(self._path)

    def __iter__(self):
        return iter(self._path)

    def __len__(self):
        return len(self._path)

    def __repr__(self):
        return "<%s.%s for '%s'>" % (
            type(self).__module__,
            type(self).__name__,
            str(self)
        )

    def __str__(self):
        return PATHSEP.join(str(f) for f in self._path)

    @property
    def parent(self):
        "The path of the enclosing message, ``None`` at top level."
        if len(self._path) > 1:
            return type(self)(self._path[:-1])

    def resolve(self, schema):
        """Resolve the fragments against a message schema.

        :param schema: the root :class:`~.schema.MessageSchema`
        :returns: a pair ``(numbers, descriptors)``: the field numbers
          leading to the field and their descriptors
        :raises PathError: if a fragment doesn't name a field or a non final
          fragment isn't a message field
        """
        numbers = []
        descs = []
        current = schema
        for i, frag in enumerate(self._path):
            if current is None:
                raise PathError("Field {prev} of '{path}' isn't a message"
                                .format(prev=descs[-1].name, path=self))
            desc = (current.field(frag) if isinstance(frag, int)
                    else current.get_field_named(frag))
            if desc is None:
                raise PathError("Message {msg} has no field {frag!r}".format(
                    msg=current.name, frag=frag))
            numbers.append(desc.number)
            descs.append(desc)
            current = desc.message_type
        return tuple(numbers), tuple(descs)
