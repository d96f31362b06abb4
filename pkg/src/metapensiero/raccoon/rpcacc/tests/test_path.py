# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- field path tests
# :Created:   mar 16 feb 2016 19:59:56 CET
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2016, 2017, 2026 Alberto Berti
#

import pytest

from metapensiero.raccoon.rpcacc.path import FieldPath, PathError, norm_path


def test_norm_path():
    assert norm_path('home.street') == ('home', 'street')
    assert norm_path('5.1') == (5, 1)
    assert norm_path(3) == (3,)
    assert norm_path(['home', 1]) == ('home', 1)
    with pytest.raises(PathError):
        norm_path('home..street')
    with pytest.raises(PathError):
        norm_path([True])
    with pytest.raises(PathError):
        norm_path(1.5)


def test_field_path_is_interned():
    p1 = FieldPath('home.street')
    p2 = FieldPath(('home', 'street'))
    assert p1 is p2
    assert FieldPath(p1) is p1
    p3 = FieldPath('home') + 'street'
    assert p3 is p1
    assert p1 == 'home.street'
    assert str(p1) == 'home.street'
    assert p1.parent is FieldPath('home')
    assert FieldPath('home').parent is None
    with pytest.raises(PathError):
        FieldPath(())


def test_resolve(sample_table):
    person = sample_table.by_name('Person')
    numbers, descs = FieldPath('home.street').resolve(person)
    assert numbers == (5, 1)
    assert [d.name for d in descs] == ['home', 'street']
    assert FieldPath('9.2').resolve(person)[0] == (9, 2)
    with pytest.raises(PathError):
        FieldPath('home.nope').resolve(person)
    with pytest.raises(PathError):
        FieldPath('name.x').resolve(person)
