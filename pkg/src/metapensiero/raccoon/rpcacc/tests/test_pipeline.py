# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- request pipeline tests
# :Created:   mar 20 ott 2026 18:40:12 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

import pytest

from metapensiero.raccoon.rpcacc.apps import EchoApp
from metapensiero.raccoon.rpcacc.interconnect import TxnKind
from metapensiero.raccoon.rpcacc.message import encode_message
from metapensiero.raccoon.rpcacc.pipeline import (
    CONFIGS, Pipeline, PipelineConfig, PipelineError, custom_config,
    get_config, run_pipeline)
from metapensiero.raccoon.rpcacc.serializer import UnknownStrategy


@pytest.mark.parametrize('name', sorted(CONFIGS))
def test_echo_under_every_config(small_workload, ctx, name):
    report = run_pipeline(small_workload, name, ctx)
    assert report.name == name
    assert len(report) == 4
    assert [r.request_id for r in report.rows] == [0, 1, 2, 3]
    for row, message in zip(report.rows, small_workload.messages):
        assert row.config == name
        assert row.request_bytes == len(encode_message(message))
        assert row.response_bytes == row.request_bytes
        assert row.elapsed_ns > 0
        assert row.moves == 0
    agg = report.aggregates()
    assert agg['requests'] == 4
    assert agg['throughput_rps'] > 0


def test_requests_are_sequential(small_workload, ctx):
    report = run_pipeline(small_workload, 'rpcacc', ctx)
    rows = report.rows
    assert rows[0].start_ns == 0
    for before, after in zip(rows, rows[1:]):
        assert after.start_ns >= before.end_ns
    assert report.extra['now_ns'] == rows[-1].end_ns


def test_row_ledgers_add_up(small_workload, ctx):
    report = run_pipeline(small_workload, 'rpcacc', ctx)
    assert report.aggregates()['link_bytes'] == report.ledger.link_bytes
    assert sum(r.ledger[TxnKind.DMA_WRITE].count for r in report.rows) == \
        report.ledger[TxnKind.DMA_WRITE].count


def test_concurrent_requests(small_workload, ctx):
    ctx = ctx.new({'pipeline.inflight': 4})
    report = run_pipeline(small_workload, 'rpcacc', ctx)
    assert len(report) == 4
    assert all(r.start_ns == 0 for r in report.rows)


def test_configs():
    assert get_config('no-acc') is CONFIGS['no-acc']
    config = PipelineConfig('mine', use_acc=False)
    assert get_config(config) is config
    with pytest.raises(KeyError):
        get_config('nope')
    assert CONFIGS['cpu-only'].cpu_stack
    assert CONFIGS['accel-only-fbf'].strategy == 'accel-only'
    assert not CONFIGS['no-acc'].auto_update


def test_custom_config():
    config = custom_config('accel_only', 'field-by-field')
    assert config.name == 'custom'
    assert config.strategy == 'accel-only'
    assert config.deser_mode == 'field-by-field'
    assert config.use_acc
    assert custom_config('cpu-only', name='x').deser_mode is None
    with pytest.raises(UnknownStrategy):
        custom_config('gpu')


def test_config_overrides_context(small_workload, ctx):
    pipeline = Pipeline(small_workload, 'accel-only-fbf', ctx)
    assert pipeline.ctx['deserializer.mode'] == 'field-by-field'
    assert not pipeline.ctx['runtime.auto_update']
    assert not any(f.acc for s in pipeline.sim.table for f in s.fields)
    pipeline = Pipeline(small_workload, 'rpcacc', ctx)
    assert pipeline.sim.table is small_workload.table
    assert pipeline.ctx['runtime.auto_update']


def test_schedule(small_workload, ctx):
    calls = []

    def hook(sim, now):
        calls.append((sim, now))

    pipeline = Pipeline(small_workload, 'rpcacc', ctx, schedule={2: hook})
    report = pipeline.run()
    assert len(calls) == 1
    sim, now = calls[0]
    assert sim is pipeline.sim
    assert now == report.rows[2].start_ns


class Exploding(EchoApp):

    def process(self, req, root):
        yield from super().process(req, root)
        if req.request_id == 2:
            raise RuntimeError("boom")
        return root


def test_failing_request(small_workload, ctx):
    with pytest.raises(PipelineError) as info:
        run_pipeline(small_workload, 'rpcacc', ctx, app=Exploding())
    assert info.value.request_id == 2
    assert str(info.value) == "Request 2 failed: boom"


def test_unverified_run(small_workload, ctx):
    pipeline = Pipeline(small_workload, 'rpcacc', ctx, verify=False)
    report = pipeline.run()
    assert report.alloc == pipeline.sim.stats()
    assert report.extra['app'] == 'echo'
