# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- RPC services run by the pipeline
# :Created:   lun 19 ott 2026 15:02:36 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""The services the pipeline runs between deserialization and
serialization.

An application is an object with a ``process(req, root)`` generator, that
spends simulated time through ``req.spend()`` and returns the root
:class:`~.message.MessageValue` of the response, and a ``check(req,
wire)`` method verifying the response payload.
"""

from dataclasses import asdict, dataclass
import logging
import random

from .compiler import compile_proto
from .compute import Descriptor, NOTIFICATION_ENTRY
from .interconnect import cost_dma
from .kernels import get_kernel
from .memory import Region
from .message import Handle, Message, store_message
from .metrics import Timing
from .oracle import ref_decode
from .workload import Workload


logger = logging.getLogger(__name__)


class AppError(Exception):
    """Base of the application errors."""


class ResponseMismatch(AppError):
    """The response doesn't carry what the service should have produced."""


class KernelFailed(AppError):
    """A compute unit task ended with an error status."""


class EchoApp:
    """Answers each request with the request itself, after the host stub."""

    name = 'echo'

    def process(self, req, root):
        yield from req.spend(Timing(host_ns=req.sim.host.auth_ns))
        return root

    def check(self, req, wire):
        got = ref_decode(wire, req.message.schema)
        if got != req.message:
            raise ResponseMismatch("Echo response differs from request {id}"
                                   .format(id=req.request_id))


IMAGE_PROTO = """\
syntax = "proto3";

message Avatar {
  string name = 1;
  bytes image = 2 [Acc];
}

message ImageRequest {
  uint64 id = 1;
  string user = 2;
  string token = 3;
  Avatar avatar = 4;
}

message ImageResponse {
  uint64 id = 1;
  int64 size = 2;
  bytes image = 3;
}
"""

IMAGE_PATH = 'avatar.image'


@dataclass
class ImageWorkloadSpec:
    """Shape of the image compression requests."""

    requests: int = 8
    image_size: int = 64 * 1024
    max_run: int = 64

    def as_dict(self):
        return asdict(self)


def _image(rng, size, max_run):
    out = bytearray()
    while len(out) < size:
        run = min(rng.randint(1, max_run), size - len(out))
        out += bytes((rng.getrandbits(8),)) * run
    return bytes(out)


def image_workload(spec=None, seed=0):
    """The request stream of the image compression service, images being
    made of runs of equal bytes.

    :param spec: an :class:`ImageWorkloadSpec`
    :param int seed: the random seed
    :returns: a :class:`~.workload.Workload`
    """
    spec = spec or ImageWorkloadSpec()
    rng = random.Random(seed)
    table = compile_proto(IMAGE_PROTO)
    root = table.by_name('ImageRequest')
    avatar = table.by_name('Avatar')
    messages = []
    for i in range(spec.requests):
        messages.append(Message(
            root, id=i, user='user{i}'.format(i=i),
            token='{t:016x}'.format(t=rng.getrandbits(64)),
            avatar=Message(avatar, name='avatar{i}.img'.format(i=i),
                           image=_image(rng, spec.image_size, spec.max_run))))
    stats = {
        'messages': len(messages),
        'mean_field_size': float(spec.image_size),
        'mean_depth': 2.0 if messages else 0.0,
        'fields': sum(m.count_fields() for m in messages),
    }
    return Workload(spec, seed, table, root, messages, stats)


class ImageCompressionApp:
    """Authorize the user, compress the avatar image and optionally encrypt
    it.

    The image is compressed by a compute unit programmed with a compress
    kernel when there is one, moving the field to accelerator memory if
    needed; otherwise the field is brought to host memory and the CPU does
    the work.

    :param bool encrypt: whether the compressed image is encrypted too
    """

    name = 'image-compression'

    def __init__(self, encrypt=False):
        self.encrypt = encrypt

    def process(self, req, root):
        sim = req.sim
        runtime = sim.runtime
        yield from req.spend(Timing(host_ns=sim.host.auth_ns))
        handle = runtime.handle(root, IMAGE_PATH)
        unit = None if req.config.host_compute else sim.unit('compress')
        if unit is not None:
            if not runtime.is_in_acc(handle):
                yield from req.move(handle, Region.ACCEL)
            image = handle.items()[0]
            image = yield from self._offload(req, unit, image)
            if self.encrypt:
                crypt = sim.unit('encrypt')
                if crypt is None:
                    data, ns = sim.interconnect.dma_read(
                        image.address, image.length, region=Region.ACCEL,
                        tag='cross-read')
                    yield from req.spend(Timing(link_ns=ns))
                    image = yield from self._on_cpu(req, data, 'encrypt')
                else:
                    image = yield from self._offload(req, crypt, image)
        else:
            if runtime.is_in_acc(handle):
                yield from req.move(handle, Region.HOST)
            data = runtime.read_field(handle)
            image = yield from self._on_cpu(req, data, 'compress')
            if self.encrypt:
                image = yield from self._on_cpu(req, image, 'encrypt')
        size = (image.length if isinstance(image, Handle) else len(image))
        return self._response(req, root, size, image)

    def _offload(self, req, unit, src):
        sim = req.sim
        bound = unit.kernel.bound(src.length)
        out = req.scratch(Region.ACCEL, bound)
        event = unit.submit_task(Descriptor(src.address, src.length, out,
                                            bound), now=req.now)
        unit.poll(event)
        if not event.ok:
            raise KernelFailed("Task {seq} of unit {id} ended with status "
                               "{status}".format(seq=event.seq, id=unit.id,
                                                 status=event.status))
        link = (sim.link.mmio_write_ns +
                cost_dma(NOTIFICATION_ENTRY.size, sim.link))
        total = event.completed_at - req.now
        yield from req.spend(Timing(device_ns=max(total - link, 0.0),
                                    link_ns=link))
        return Handle(Region.ACCEL, out, event.result_len)

    def _on_cpu(self, req, data, kernel_type):
        host = req.sim.host
        per_byte = (host.compress_ns_per_byte if kernel_type == 'compress'
                    else host.crypt_ns_per_byte)
        out = bytes(get_kernel(kernel_type)(data))
        yield from req.spend(Timing(host_ns=len(data) * per_byte))
        return out

    def _response(self, req, root, size, image):
        sim = req.sim
        schema = sim.table.by_name('ImageResponse')
        request_id = req.message['id']
        response = store_message(Message(schema, id=request_id, size=size),
                                 sim.memory)
        number = schema.field_named('image').number
        if isinstance(image, Handle):
            response.slots[number] = image
        else:
            address = req.scratch(Region.HOST, len(image))
            if image:
                sim.memory.write(Region.HOST, address, image)
            response.slots[number] = Handle(Region.HOST, address, len(image))
        return response

    def expected(self, message):
        "The response payload the service should produce for `message`."
        out = bytes(get_kernel('compress')(message['avatar']['image']))
        if self.encrypt:
            out = bytes(get_kernel('encrypt')(out))
        return out

    def check(self, req, wire):
        schema = req.sim.table.by_name('ImageResponse')
        got = ref_decode(wire, schema)
        image = self.expected(req.message)
        if (got.get('id', 0) != req.message['id'] or
                got.get('size', 0) != len(image) or
                got.get('image', b'') != image):
            raise ResponseMismatch("Wrong image response for request {id}"
                                   .format(id=req.request_id))


APPS = {
    'echo': EchoApp,
    'image-compression': ImageCompressionApp,
}
