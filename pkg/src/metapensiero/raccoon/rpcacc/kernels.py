# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- compute unit kernels
# :Created:   dom 18 ott 2026 14:02:51 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Registry of the kernels a compute unit can be programmed with.

A kernel is a deterministic ``bytes -> bytes`` function with a declared
bound on its output length. New kernels are added with the
:func:`define` decorator::

  @define('reverse', 'reverse')
  def reverse(data):
      return data[::-1]
"""

import hashlib
import itertools


class KernelError(Exception):
    """Error raised by a kernel or by the registry."""


class UnknownKernel(KernelError, KeyError):
    """No kernel is registered with the given name."""

    def __str__(self):
        return self.args[0]


def _same_size(size):
    return size


class Kernel:
    """A registered kernel.

    :param str name: the registration id
    :param str type_name: what :meth:`~.compute.ComputeUnit.get_type`
      reports once a unit is programmed with it
    :param fn: the transform
    :param bound: a function giving the maximum output size for an input
      size
    """

    __slots__ = ('name', 'type_name', 'fn', 'bound')

    def __init__(self, name, type_name, fn, bound=_same_size):
        self.name = name
        self.type_name = type_name
        self.fn = fn
        self.bound = bound

    def __repr__(self):
        return '<{cname} {name} ({type})>'.format(
            cname=type(self).__name__, name=self.name, type=self.type_name)

    def __call__(self, data):
        """Run the transform.

        :raises KernelError: if the output exceeds the declared bound
        """
        if not self.available:
            raise KernelError("Kernel {name} can't run".format(name=self.name))
        result = bytes(self.fn(bytes(data)))
        if len(result) > self.bound(len(data)):
            raise KernelError("Kernel {name} produced {got} bytes, at most "
                              "{max} allowed".format(
                                  name=self.name, got=len(result),
                                  max=self.bound(len(data))))
        return result

    @property
    def available(self):
        return self.fn is not None


class Registry:
    """Kernels indexed by name. A type name finds the first kernel
    registered with that type."""

    def __init__(self):
        self._kernels = {}
        self._by_type = {}

    def __contains__(self, name):
        return name in self._kernels or name in self._by_type

    def __getitem__(self, name):
        if isinstance(name, Kernel):
            return name
        try:
            return self._kernels[name]
        except KeyError:
            pass
        try:
            return self._by_type[name]
        except KeyError:
            raise UnknownKernel("Unknown kernel {name!r}".format(
                name=name)) from None

    def __iter__(self):
        return iter(sorted(self._kernels))

    def add(self, kernel):
        if kernel.name in self._kernels:
            raise KernelError("The kernel id {name!r} is taken already".format(
                name=kernel.name))
        self._kernels[kernel.name] = kernel
        self._by_type.setdefault(kernel.type_name, kernel)
        return kernel

    def define(self, name, type_name, bound=_same_size):
        """Decorator registering a function as a kernel.

        :returns: the decorated function, unchanged
        """
        def decorator(fn):
            self.add(Kernel(name, type_name, fn, bound))
            return fn
        return decorator


REGISTRY = Registry()
define = REGISTRY.define


def get_kernel(name):
    "Return the :class:`Kernel` registered as `name`."
    return REGISTRY[name]


@define('identity', 'identity')
def identity(data):
    return data


@define('rle_compress', 'compress', bound=lambda size: 2 * size)
def rle_compress(data):
    """Run length encoding as ``(count, byte)`` pairs, runs being at most
    255 bytes long."""
    out = bytearray()
    for byte, group in itertools.groupby(data):
        count = sum(1 for _ in group)
        while count:
            run = min(count, 255)
            out += bytes((run, byte))
            count -= run
    return out


def _decompressed_bound(size):
    return 255 * (size // 2)


@define('rle_decompress', 'decompress', bound=_decompressed_bound)
def rle_decompress(data):
    if len(data) % 2:
        raise KernelError("Run length data must have an even length")
    out = bytearray()
    for i in range(0, len(data), 2):
        count, byte = data[i], data[i + 1]
        if not count:
            raise KernelError("Zero length run at offset {pos}".format(pos=i))
        out += bytes((byte,)) * count
    return out


XOR_KEY = b'rpcacc'


def _keystream(size, key=XOR_KEY):
    out = bytearray()
    counter = 0
    while len(out) < size:
        out += hashlib.sha256(key + counter.to_bytes(8, 'little')).digest()
        counter += 1
    return bytes(out[:size])


@define('xor_crypt', 'crypt')
def xor_crypt(data):
    """Xor with a fixed keystream, applying it twice gives the input
    back."""
    stream = _keystream(len(data))
    return bytes(a ^ b for a, b in zip(data, stream))


REGISTRY.add(Kernel('encrypt', 'encrypt', xor_crypt))
REGISTRY.add(Kernel('decrypt', 'decrypt', xor_crypt))
REGISTRY.add(Kernel('unavailable_stub', 'none', None))
