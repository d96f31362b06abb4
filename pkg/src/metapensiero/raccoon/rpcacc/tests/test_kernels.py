# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- kernel registry tests
# :Created:   dom 18 ott 2026 14:40:11 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

from hypothesis import given, strategies as st
import pytest

from metapensiero.raccoon.rpcacc.kernels import (
    REGISTRY, Kernel, KernelError, Registry, UnknownKernel, get_kernel,
    rle_compress, rle_decompress, xor_crypt)


def test_registry_lookup():
    assert get_kernel('identity').type_name == 'identity'
    assert REGISTRY['compress'] is REGISTRY['rle_compress']
    assert REGISTRY['crypt'].name == 'xor_crypt'
    assert 'decrypt' in REGISTRY
    assert 'nope' not in REGISTRY
    assert list(REGISTRY) == sorted(REGISTRY)
    with pytest.raises(UnknownKernel):
        get_kernel('nope')
    with pytest.raises(KeyError):
        get_kernel('nope')
    kernel = REGISTRY['identity']
    assert REGISTRY[kernel] is kernel


def test_define():
    registry = Registry()

    @registry.define('reverse', 'reverse')
    def reverse(data):
        return data[::-1]

    assert reverse(b'ab') == b'ba'
    assert registry['reverse'](b'abc') == b'cba'
    with pytest.raises(KernelError):
        registry.add(Kernel('reverse', 'other', reverse))


def test_output_bound():
    kernel = Kernel('grow', 'grow', lambda data: data * 2)
    with pytest.raises(KernelError):
        kernel(b'abc')
    assert kernel(b'') == b''


def test_unavailable():
    stub = REGISTRY['unavailable_stub']
    assert not stub.available
    assert stub.type_name == 'none'
    with pytest.raises(KernelError):
        stub(b'x')


def test_rle():
    assert rle_compress(b'aaab') == bytes((3, 97, 1, 98))
    assert rle_compress(b'\x00' * 300) == bytes((255, 0, 45, 0))
    assert rle_decompress(bytes((3, 97, 1, 98))) == b'aaab'
    with pytest.raises(KernelError):
        rle_decompress(b'\x01')
    with pytest.raises(KernelError):
        rle_decompress(b'\x00\x61')


@given(st.binary(max_size=600))
def test_rle_round_trip(data):
    packed = REGISTRY['compress'](data)
    assert len(packed) <= 2 * len(data)
    assert REGISTRY['decompress'](packed) == data


@given(st.binary(max_size=300))
def test_xor_is_an_involution(data):
    assert xor_crypt(xor_crypt(data)) == data
    assert REGISTRY['decrypt'](REGISTRY['encrypt'](data)) == data
