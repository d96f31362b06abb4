# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- scenario tests
# :Created:   mar 20 ott 2026 19:32:08 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

import pytest

from metapensiero.raccoon.rpcacc import scenarios
from metapensiero.raccoon.rpcacc.context import SimContext
from metapensiero.raccoon.rpcacc.scenarios import (
    ALIASES, FLIP_AT, FLIP_REQUESTS, SCENARIOS, UnknownScenario, define,
    list_scenarios, run_scenario)


def test_list():
    names = [s.name for s in list_scenarios()]
    assert names == sorted(names)
    assert set(names) == {
        'auto-field-update', 'auto-field-update-add', 'cpu-cycle-offload',
        'e2e-compression', 'latency-sweep', 'oneshot-vs-fieldbyfield',
        'onchip-comparison', 'serialization-three-way'}
    assert all(s.description for s in list_scenarios())
    assert ALIASES == {'fig2-latency-sweep': 'latency-sweep'}


def test_unknown_scenario():
    with pytest.raises(UnknownScenario) as info:
        run_scenario('nope')
    assert str(info.value) == "Unknown scenario 'nope'"


def test_define(monkeypatch):
    monkeypatch.setattr(scenarios, 'SCENARIOS', dict(SCENARIOS))
    monkeypatch.setattr(scenarios, 'ALIASES', dict(ALIASES))

    @define('trivial', "always passes", aliases=('plain',))
    def trivial(seed, ctx):
        report = scenarios.SimReport('whatever')
        report.set_verdict("seed {seed}".format(seed=seed), True)
        return report

    report = run_scenario('trivial', seed=5)
    assert report.name == 'trivial'
    assert report.verdict() == 'PASS trivial: seed 5'
    assert run_scenario('plain', seed=5).name == 'trivial'
    with pytest.raises(ValueError):
        define('trivial', "again")(trivial)
    with pytest.raises(ValueError):
        define('other', "again", aliases=('plain',))(trivial)
    assert 'trivial' not in SCENARIOS
    assert 'plain' not in ALIASES


@pytest.mark.parametrize('name', sorted(SCENARIOS))
def test_scenario_passes(name, ctx):
    report = run_scenario(name, seed=0, ctx=ctx)
    assert report.name == name
    assert report.criterion
    assert len(report.rows) > 0
    assert report.passed, report.verdict()
    assert report.verdict() == 'PASS {name}: {criterion}'.format(
        name=name, criterion=report.criterion)


@pytest.mark.parametrize('name', sorted(SCENARIOS))
def test_scenario_is_deterministic(name):
    first = run_scenario(name, seed=0, ctx=SimContext()).to_json()
    second = run_scenario(name, seed=0, ctx=SimContext()).to_json()
    assert first == second


def test_latency_sweep(ctx):
    report = run_scenario('latency-sweep', ctx=ctx)
    assert report.extra['monotone']
    assert report.extra['nested_ratio'] >= 2.0
    assert report.extra['flat_ratio'] <= 1.2
    assert list(report.extra['nested_ns']) == [
        '70', '125', '250', '500', '1000', '1250']


def test_latency_sweep_alias(ctx):
    report = run_scenario('fig2-latency-sweep', ctx=ctx)
    assert report.name == 'latency-sweep'
    assert report.passed


def test_oneshot_vs_fieldbyfield(ctx):
    report = run_scenario('oneshot-vs-fieldbyfield', ctx=ctx)
    assert report.extra['speedup']['small-host'] >= 2.0
    assert report.extra['speedup']['mixed'] > 1.0
    assert report.extra['dma_bounds']


def test_serialization_is_equivalent(ctx):
    report = run_scenario('serialization-three-way', ctx=ctx)
    assert report.extra['equivalent']
    assert set(report.extra['link_events']['memory-affinity']) == {2}
    assert report.extra['speedup_over_accel_only'] >= 1.5


def test_cpu_cycle_offload(ctx):
    report = run_scenario('cpu-cycle-offload', ctx=ctx)
    normalized = report.extra['normalized']
    assert normalized['cpu-only'] == 1.0
    assert normalized['full-offload'] <= 0.5
    assert normalized['full-offload'] <= normalized['no-offload']
    full = report.extra['proxies']['full-offload']
    assert full['encode_ops_on_cpu'] == 0
    assert full['bytes_copied_by_cpu'] == report.extra['small_field_bytes']


def test_onchip_comparison(ctx):
    report = run_scenario('onchip-comparison', ctx=ctx)
    assert report.passed
    assert report.extra['speedup']['rx'] > 1.0


def test_auto_field_update_moves(ctx):
    report = run_scenario('auto-field-update', ctx=ctx)
    flipped = [0] * FLIP_REQUESTS
    flipped[FLIP_AT] = 1
    assert report.extra['moves'] == flipped
    assert report.extra['no_auto_moves'] == (
        [0] * FLIP_AT + [1] * (FLIP_REQUESTS - FLIP_AT))
    runs = {r.run for r in report.rows}
    assert runs == {'auto', 'no-auto', 'reference'}


def test_auto_field_update_add_moves(ctx):
    report = run_scenario('auto-field-update-add', ctx=ctx)
    flipped = [0] * FLIP_REQUESTS
    flipped[FLIP_AT] = 1
    assert report.extra['moves'] == flipped


def test_e2e_compression(ctx):
    report = run_scenario('e2e-compression', ctx=ctx)
    size = report.extra['image_size']
    link = report.extra['link_bytes']
    assert max(link['rpcacc']) < size
    assert min(link['no-acc']) >= max(link['rpcacc']) + size
