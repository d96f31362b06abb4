# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- host runtime and field updating
# :Created:   dom 18 ott 2026 16:48:02 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Member functions the host application uses on dereference fields.

A field can be asked where it lives and moved to the other side. Moving a
field also flips its placement bit in the schema table, so the next
messages of the same class are deserialized straight where the field was
last needed.
"""

from collections import deque
import logging

from .memory import Lease, Region
from .message import Handle, decode_payload
from .metrics import Timing
from .path import FieldPath, PathError


logger = logging.getLogger(__name__)


class FieldUpdateError(Exception):
    """Base of the runtime errors."""


class InvalidHandle(FieldUpdateError):
    """The handle doesn't lead to a present dereference field."""


class FieldHandle:
    """A dereference field of a message graph.

    :param root: the root :class:`~.message.MessageValue`
    :param path: a :class:`~.path.FieldPath` or anything it accepts, from
      the root to the field; intermediate fields must be singular messages
    :raises InvalidHandle: if the path doesn't resolve to a dereference
      field
    """

    __slots__ = ('root', 'path', 'numbers', 'descriptor')

    def __init__(self, root, path):
        self.root = root
        try:
            self.path = FieldPath(path)
            self.numbers, descs = self.path.resolve(root.schema)
        except PathError as e:
            raise InvalidHandle(str(e)) from e
        self.descriptor = descs[-1]
        if not self.descriptor.is_dereference:
            raise InvalidHandle("Field {name} is direct".format(
                name=self.descriptor.name))

    def __repr__(self):
        return '<{cname} {name}.{path} in {region}>'.format(
            cname=type(self).__name__, name=self.root.schema.name,
            path=self.path, region=self.region.value)

    @property
    def class_id(self):
        return self.root.class_id

    def owner(self):
        "The object holding the field."
        obj = self.root
        for num in self.numbers[:-1]:
            slot = obj.slots.get(num)
            if slot is None:
                raise InvalidHandle("Field {num} of {name} is absent".format(
                    num=num, name=obj.schema.name))
            if isinstance(slot, list):
                raise InvalidHandle("Field {num} of {name} is repeated"
                                    .format(num=num, name=obj.schema.name))
            obj = slot
        return obj

    def slot(self):
        owner = self.owner()
        slot = owner.slots.get(self.descriptor.number)
        if slot is None:
            raise InvalidHandle("Field {name} is absent".format(
                name=self.descriptor.name))
        return slot

    def items(self):
        "The values of the field: handles, or sub-message objects."
        slot = self.slot()
        return list(slot) if isinstance(slot, list) else [slot]

    def ranges(self):
        "The memory ranges holding the field bytes."
        if self.descriptor.is_message:
            return [o.body for o in self.items() if o.body is not None]
        return self.items()

    @property
    def region(self):
        return self.items()[0].region

    @property
    def address(self):
        ranges = self.ranges()
        return ranges[0].address if ranges else None

    @property
    def length(self):
        return sum(h.length for h in self.ranges())


class HostRuntime:
    """The host side library of the accelerator.

    :param table: the live :class:`~.schema.SchemaTable`
    :param memory: the :class:`~.memory.MemorySystem`
    :param interconnect: the :class:`~.interconnect.Interconnect`
    :param bool auto_update: whether moves update the placement bits
    """

    def __init__(self, table, memory, interconnect, auto_update=True):
        self.table = table
        self.memory = memory
        self.interconnect = interconnect
        self.auto_update = auto_update
        self.cursors = {r: memory.cursor(r, prefetch=False) for r in Region}
        self.inbox = deque()
        self.timing = Timing()
        self.moves = 0

    def attach(self, deserializer):
        "Receive the messages completed by `deserializer` in :attr:`inbox`."
        deserializer.on_message_dispatched.connect(self._on_dispatched)

    def _on_dispatched(self, record):
        self.inbox.append(record)

    def handle(self, root, path):
        "Return the :class:`FieldHandle` of the field at `path`."
        return FieldHandle(root, path)

    def is_in_acc(self, handle):
        "Whether the field is in accelerator memory."
        return handle.region is Region.ACCEL

    def move_to_acc(self, handle):
        """Move the field to accelerator memory, setting its placement bit.
        Nothing happens if it's there already.

        :returns: the handle, now pointing to the new location
        :raises OutOfChunks: if accelerator memory is exhausted
        """
        return self._move(handle, Region.ACCEL)

    move_to_nacc = move_to_acc

    def move_to_cpu(self, handle):
        """Move the field to host memory, clearing its placement bit.
        Nothing happens if it's there already."""
        return self._move(handle, Region.HOST)

    def _move(self, handle, target):
        desc = handle.descriptor
        owner = handle.owner()
        slot = owner.slots[desc.number]
        items = slot if isinstance(slot, list) else [slot]
        movable = [i for i, item in enumerate(items)
                   if item.region is not target]
        if not movable:
            logger.debug("%r is already in place", handle)
            return handle
        if desc.is_message:
            sources = [items[i].body for i in movable
                       if items[i].body is not None]
        else:
            sources = [items[i] for i in movable]
        root = handle.root
        if root.lease is None:
            root.lease = Lease()
        cursor = self.cursors[target]
        moved = {}
        for src in sources:
            moved[src] = Handle(target, cursor.reserve(src.length, root.lease),
                                src.length)
        _, ns = self.interconnect.mmio_write(
            'runtime.move', (handle.class_id, handle.numbers, target.value),
            tag='move')
        if target is Region.ACCEL:
            chunks, transfer_ns = self.interconnect.dma_read_gather(
                [(src.address, src.length) for src in sources],
                tag='move-to-acc')
            for src, data in zip(sources, chunks):
                if data:
                    self.memory.write(Region.ACCEL, moved[src].address, data)
        else:
            transfer_ns = self.interconnect.dma_write_scatter(
                [(moved[src].address,
                  self.memory.read(Region.ACCEL, src.address, src.length))
                 for src in sources], tag='move-to-cpu')
        for i in movable:
            item = items[i]
            if desc.is_message:
                _rebase(item, target, moved.get(item.body))
            else:
                items[i] = moved[item]
        if not desc.is_message:
            owner.slots[desc.number] = (items if isinstance(slot, list)
                                        else items[0])
        if self.auto_update:
            self.table.set_placement(handle.class_id, handle.numbers,
                                     target is Region.ACCEL)
        self.moves += 1
        self.timing += Timing(link_ns=ns + transfer_ns)
        logger.debug("Moved %d bytes of %r", sum(s.length for s in sources),
                     handle)
        return handle

    def read_field(self, handle, side=Region.HOST):
        """Read the value of a string, bytes or repeated scalar field from
        `side`, charging a cross-link read when the field lives on the other
        one.

        :returns: the value, a list for repeated fields
        """
        desc = handle.descriptor
        if desc.is_message:
            raise InvalidHandle("Field {name} is a message".format(
                name=desc.name))
        values = []
        for h in handle.items():
            if h.region is side:
                raw = self.memory.read(h.region, h.address, h.length)
            else:
                raw, ns = self.interconnect.dma_read(h.address, h.length,
                                                     region=h.region,
                                                     tag='cross-read')
                self.timing += Timing(link_ns=ns)
            values.append(decode_payload(desc, raw))
        if desc.repeated and not desc.is_packed:
            return values
        return values[0]


def _rebase(obj, region, body):
    # move the body of `obj`, the direct scalar slots following it
    old = obj.body
    obj.region = region
    if old is None:
        return
    obj.body = body
    for num, slot in list(obj.slots.items()):
        desc = obj.schema.field(num)
        if not desc.is_dereference:
            obj.slots[num] = Handle(region, body.address +
                                    (slot.address - old.address), slot.length)
