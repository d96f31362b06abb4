# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- request pipeline
# :Created:   lun 19 ott 2026 16:20:41 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""End to end processing of a request stream.

Each request goes through arrival, deserialization on a free lane, the
application (host stub and compute unit tasks), serialization with the
configured strategy and the hand off of the TX arena, which ends the
measured path. Time is simulated by a :mod:`simpy` environment; the
simulated components do their work synchronously and the pipeline waits
for the time they report.
"""

from dataclasses import dataclass, replace
import logging

import simpy

from . import log_noisy_error
from .apps import EchoApp
from .context import SimContext
from .deserializer import DeserializeMode
from .memory import Lease, Region
from .message import decode_message, encode_message, store_message
from .metrics import Timing
from .report import RequestRow, SimReport
from .schema import without_acc
from .serializer import Strategy
from .simulator import Simulation
from .wire import RpcHeader, frame


logger = logging.getLogger(__name__)


class PipelineError(Exception):
    """A request couldn't be processed.

    :param int request_id: the failing request
    """

    def __init__(self, request_id, message):
        # simpy rebuilds failures from their args
        super().__init__(request_id, message)
        self.request_id = request_id

    def __str__(self):
        return self.args[1]


@dataclass(frozen=True)
class PipelineConfig:
    """How requests are handled.

    :param str name: the configuration name
    :param str strategy: the serialization strategy
    :param str deser_mode: the deserialization mode, ``None`` meaning the
      one of the context
    :param bool use_acc: whether the ``Acc`` labels are honored
    :param bool auto_update: whether moves update the placement bits
    :param bool host_compute: whether kernels always run on the CPU
    :param bool cpu_stack: whether the CPU receives and decodes requests by
      itself, the accelerator being bypassed
    """

    name: str
    strategy: str = Strategy.MEMORY_AFFINITY.value
    deser_mode: str = None
    use_acc: bool = True
    auto_update: bool = True
    host_compute: bool = False
    cpu_stack: bool = False


CONFIGS = {c.name: c for c in (
    PipelineConfig('rpcacc', deser_mode=DeserializeMode.ONE_SHOT.value),
    PipelineConfig('no-acc', deser_mode=DeserializeMode.ONE_SHOT.value,
                   use_acc=False, auto_update=False),
    PipelineConfig('accel-only-fbf', strategy=Strategy.ACCEL_ONLY.value,
                   deser_mode=DeserializeMode.FIELD_BY_FIELD.value,
                   use_acc=False, auto_update=False),
    PipelineConfig('cpu-only', strategy=Strategy.CPU_ONLY.value,
                   use_acc=False, auto_update=False, host_compute=True,
                   cpu_stack=True),
)}


def get_config(config):
    """Return the :class:`PipelineConfig` named `config`, or `config`
    itself when it's a configuration already.

    :raises KeyError: if the name is unknown
    """
    if isinstance(config, PipelineConfig):
        return config
    try:
        return CONFIGS[config]
    except KeyError:
        raise KeyError("Unknown pipeline configuration {name!r}".format(
            name=config)) from None


class RequestContext:
    """The state of one request in flight, handed to the application.

    The ledger delta of the request is accumulated each time the request
    gives control back to the event loop, so that concurrent requests get
    their own transactions only.
    """

    def __init__(self, pipeline, request_id, message):
        self.pipeline = pipeline
        self.sim = pipeline.sim
        self.config = pipeline.config
        self.request_id = request_id
        self.message = message
        self.lease = Lease()
        self.row = RequestRow(request_id, self.config.name,
                              self.config.strategy)
        self._mark = self.sim.ledger.snapshot()

    @property
    def now(self):
        return self.pipeline.env.now

    def _account(self):
        ledger = self.sim.ledger.snapshot()
        self.row.ledger = self.row.ledger + (ledger - self._mark)
        self._mark = ledger

    def spend(self, timing):
        "Wait for the simulated time in `timing`, the link time on the link."
        env = self.pipeline.env
        self._account()
        self.row.add_timing(timing)
        if timing.host_ns:
            yield env.timeout(timing.host_ns)
        if timing.device_ns:
            yield env.timeout(timing.device_ns)
        if timing.link_ns:
            with self.pipeline.link.request() as turn:
                yield turn
                yield env.timeout(timing.link_ns)
        self._mark = self.sim.ledger.snapshot()

    def move(self, handle, target):
        "Move a field with the runtime, counting the move."
        runtime = self.sim.runtime
        before = runtime.timing
        moves = runtime.moves
        if target is Region.ACCEL:
            runtime.move_to_acc(handle)
        else:
            runtime.move_to_cpu(handle)
        self.row.moves += runtime.moves - moves
        after = runtime.timing
        yield from self.spend(Timing(link_ns=after.link_ns - before.link_ns))
        return handle

    def scratch(self, region, size):
        "Reserve `size` bytes of `region` living as long as the request."
        return self.pipeline.cursors[region].reserve(size, self.lease)

    def finish(self):
        self._account()
        self.row.end_ns = self.now
        self.lease.release()


class Pipeline:
    """Process the requests of a workload under a configuration.

    :param workload: the :class:`~.workload.Workload`
    :param config: a :class:`PipelineConfig` or the name of one
    :param ctx: the :class:`~.context.SimContext`
    :param app: the application, an :class:`~.apps.EchoApp` by default
    :param dict schedule: callables keyed by request index, called with
      the simulation and the current time just before that request starts
    :param bool verify: whether the responses are checked
    """

    def __init__(self, workload, config='rpcacc', ctx=None, app=None,
                 schedule=None, verify=True):
        self.workload = workload
        self.config = config = get_config(config)
        ctx = ctx or SimContext()
        overrides = {'runtime.auto_update': (config.auto_update and
                                             ctx['runtime.auto_update'])}
        if config.deser_mode is not None:
            overrides['deserializer.mode'] = config.deser_mode
        self.ctx = ctx.new(overrides)
        table = workload.table if config.use_acc else without_acc(
            workload.table)
        self.sim = Simulation(table, self.ctx)
        self.app = app or EchoApp()
        self.schedule = schedule or {}
        self.verify = verify
        self.cursors = {r: self.sim.memory.cursor(r, prefetch=False)
                        for r in Region}
        self.rows = []
        self.env = None

    def run(self):
        """Run every request to completion.

        :returns: a :class:`~.report.SimReport`
        :raises PipelineError: when a request fails
        """
        env = self.env = simpy.Environment()
        lanes = self.sim.deserializer.lanes
        self.lanes = simpy.PriorityStore(env, capacity=len(lanes))
        for lane in lanes:
            self.lanes.put(lane.id)
        self.link = simpy.Resource(env, capacity=1)
        self.inflight = simpy.Resource(env,
                                       capacity=self.ctx['pipeline.inflight'])
        for i, message in enumerate(self.workload.messages):
            env.process(self._request(i, message))
        env.run()
        logger.info("Processed %d requests under %s in %.1f ns",
                    len(self.rows), self.config.name, env.now)
        return self.report()

    def report(self):
        rows = sorted(self.rows, key=lambda r: r.request_id)
        return SimReport(self.config.name, rows, self.sim.ledger.snapshot(),
                         alloc=self.sim.stats(),
                         extra={'config': self.config.name,
                                'app': self.app.name,
                                'now_ns': self.env.now if self.env else 0.0})

    def _request(self, request_id, message):
        with self.inflight.request() as slot:
            yield slot
            try:
                row = yield from self._process(request_id, message)
            except PipelineError:
                raise
            except Exception as e:
                log_noisy_error(logger, "Request %d failed: %s", request_id,
                                e)
                raise PipelineError(request_id, "Request {id} failed: {e}"
                                    .format(id=request_id, e=e)) from e
            self.rows.append(row)

    def _process(self, request_id, message):
        sim = self.sim
        hook = self.schedule.get(request_id)
        if hook is not None:
            hook(sim, self.env.now)
        req = RequestContext(self, request_id, message)
        req.row.start_ns = self.env.now
        wire = encode_message(message)
        req.row.request_bytes = len(wire)
        if self.config.cpu_stack:
            root = yield from self._receive_on_cpu(req, wire)
        else:
            root = yield from self._receive(req, wire)
        response = None
        try:
            response = yield from self.app.process(req, root)
            result = sim.serializer.serialize(response, self.config.strategy)
            yield from req.spend(result.timing)
            req.row.cpu = result.proxy
            req.row.cpu_ns = result.proxy.cpu_ns(sim.host)
            req.row.response_bytes = len(result.wire)
            if self.verify:
                self.app.check(req, result.wire)
        finally:
            root.release()
            if response is not None and response is not root:
                response.release()
        req.finish()
        return req.row

    def _receive(self, req, wire):
        sim = self.sim
        lane = yield self.lanes.get()
        try:
            result = sim.deserializer.deserialize(
                wire, RpcHeader(req.message.schema.class_id, 0, len(wire)),
                lane=lane)
            sim.runtime.inbox.popleft()
            yield from req.spend(result.timing)
        finally:
            self.lanes.put(lane)
        return result.root

    def _receive_on_cpu(self, req, wire):
        # the NIC hands the whole request to host memory and the CPU decodes
        sim = self.sim
        schema = sim.table[req.message.schema.class_id]
        data = frame(schema.class_id, wire)
        lease = Lease()
        try:
            address = self.cursors[Region.HOST].reserve(len(data), lease)
            _, ns = sim.interconnect.dma_write(address, data, tag='nic')
            message = decode_message(
                sim.memory.read(Region.HOST, address, len(data))[
                    RpcHeader.SIZE:], schema)
        finally:
            lease.release()
        root = store_message(message, sim.memory)
        host = sim.host
        host_ns = (message.count_fields() * host.encode_field_ns +
                   len(wire) * host.encode_ns_per_byte)
        yield from req.spend(Timing(host_ns=host_ns, link_ns=ns))
        return root


def run_pipeline(workload, config='rpcacc', ctx=None, app=None,
                 schedule=None, verify=True):
    """Run `workload` end to end.

    :returns: a :class:`~.report.SimReport` with a row per request
    :raises PipelineError: carrying the id of the failing request
    """
    return Pipeline(workload, config, ctx, app, schedule, verify).run()


def custom_config(strategy, deser_mode=None, name='custom'):
    "A :class:`PipelineConfig` using the given strategy and mode."
    return replace(CONFIGS['rpcacc'], name=name,
                   strategy=Strategy.of(strategy).value,
                   deser_mode=(DeserializeMode.of(deser_mode).value
                               if deser_mode else None))
