# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- workload generator tests
# :Created:   lun 19 ott 2026 11:45:20 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

import json
import os

import pytest

from metapensiero.raccoon.rpcacc.message import decode_message
from metapensiero.raccoon.rpcacc.schema import load_schema_table
from metapensiero.raccoon.rpcacc.wire import unframe
from metapensiero.raccoon.rpcacc.workload import (
    SMALL_FIELD_LIMIT, InvalidSpec, WorkloadSpec, generate_workload,
    materialize)


def test_deterministic(small_workload):
    again = generate_workload(small_workload.spec, seed=1)
    assert again.messages == small_workload.messages
    assert [s.name for s in again.table] == [s.name
                                             for s in small_workload.table]
    other = generate_workload(small_workload.spec, seed=2)
    assert other.messages != small_workload.messages


def test_shape(small_workload):
    assert small_workload.root.name == 'Level1'
    assert len(small_workload.messages) == 4
    for message in small_workload.messages:
        assert 2 <= message.depth() <= 3
    stats = small_workload.stats
    assert stats['messages'] == 4
    assert 2 <= stats['mean_depth'] <= 3
    assert stats['fields'] == sum(m.count_fields()
                                  for m in small_workload.messages)
    assert stats['mean_field_size'] > 0


def test_acc_fraction():
    spec = WorkloadSpec(requests=2, acc_fraction=1.0, scalar_fraction=0.5,
                        repeated_probability=0.5)
    table = generate_workload(spec, seed=5).table
    for schema in table:
        for f in schema.fields:
            assert f.acc == (f.is_dereference and not f.is_message)
    table = generate_workload(WorkloadSpec(requests=2), seed=5).table
    assert not any(f.acc for s in table for f in s.fields)


def test_field_sizes():
    spec = WorkloadSpec(requests=3, field_size_min=100, field_size_max=5000,
                        scalar_fraction=0.0)
    assert spec.size_max == SMALL_FIELD_LIMIT
    workload = generate_workload(spec, seed=9)
    for message in workload.messages:
        for desc, value in message.items():
            if desc.kind in ('string', 'bytes'):
                assert 100 <= len(value) <= SMALL_FIELD_LIMIT
    spec.small_fields = False
    assert spec.size_max == 5000


@pytest.mark.parametrize('values', [
    {'requests': -1},
    {'depth_min': 3, 'depth_max': 2},
    {'depth_max': 65},
    {'fields_min': 0},
    {'field_size_min': 10, 'field_size_max': 5},
    {'field_size_min': 2000, 'field_size_max': 3000},
    {'acc_fraction': 1.5},
])
def test_invalid_specs(values):
    with pytest.raises(InvalidSpec):
        WorkloadSpec(**values).validate()


def test_from_mapping():
    spec = WorkloadSpec.from_mapping({'requests': '3', 'small_fields': 'no',
                                      'acc_fraction': '0.5'})
    assert spec.requests == 3
    assert spec.small_fields is False
    assert spec.acc_fraction == 0.5
    with pytest.raises(InvalidSpec):
        WorkloadSpec.from_mapping({'bogus': 1})
    with pytest.raises(InvalidSpec):
        WorkloadSpec.from_mapping({'small_fields': 'perhaps'})
    with pytest.raises(InvalidSpec):
        WorkloadSpec.from_mapping({'requests': 'many'})


def test_from_file(tmp_path):
    path = tmp_path / 'spec.ini'
    path.write_text('[workload]\nrequests = 2\ndepth_max = 3\n')
    spec = WorkloadSpec.from_file(str(path))
    assert (spec.requests, spec.depth_max) == (2, 3)
    path.write_text('[other]\nrequests = 2\n')
    with pytest.raises(InvalidSpec):
        WorkloadSpec.from_file(str(path))
    with pytest.raises(InvalidSpec):
        WorkloadSpec.from_file(str(tmp_path / 'missing.ini'))


def test_materialize(small_workload, tmp_path):
    out = str(tmp_path / 'wl')
    written = materialize(small_workload, out)
    assert len(written) == 4 + 2
    with open(os.path.join(out, 'schema.rpct'), 'rb') as f:
        table = load_schema_table(f.read())
    with open(os.path.join(out, 'request-00001.bin'), 'rb') as f:
        header, payload = unframe(f.read())
    schema = table[header.class_id]
    assert decode_message(payload, schema) == small_workload.messages[1]
    assert schema.name == 'Level1'
    with open(os.path.join(out, 'workload.json'), encoding='utf-8') as f:
        summary = json.load(f)
    assert summary['seed'] == 1
    assert summary['spec']['requests'] == 4
