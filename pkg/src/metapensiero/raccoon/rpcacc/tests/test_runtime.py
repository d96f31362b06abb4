# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- host runtime tests
# :Created:   dom 18 ott 2026 17:30:41 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

import pytest

from metapensiero.raccoon.rpcacc.interconnect import TxnKind
from metapensiero.raccoon.rpcacc.memory import Region
from metapensiero.raccoon.rpcacc.message import (Message, encode_message,
                                                 load_message)
from metapensiero.raccoon.rpcacc.runtime import (FieldHandle, HostRuntime,
                                                 InvalidHandle)
from metapensiero.raccoon.rpcacc.wire import RpcHeader


def receive(sim, message):
    payload = encode_message(message)
    header = RpcHeader(message.schema.class_id, 0, len(payload))
    sim.deserializer.deserialize(payload, header)
    return sim.runtime.inbox.popleft().root


def test_inbox(sim, person):
    root = receive(sim, person)
    assert root.schema is person.schema
    assert not sim.runtime.inbox


def test_move_to_cpu(sim, person):
    runtime = sim.runtime
    root = receive(sim, person)
    photo = runtime.handle(root, 'photo')
    assert runtime.is_in_acc(photo)
    assert photo.length == 256
    before = sim.ledger.snapshot()
    assert runtime.move_to_cpu(photo) is photo
    assert not runtime.is_in_acc(photo)
    assert root.slots[3].region is Region.HOST
    delta = sim.ledger.snapshot() - before
    assert delta[TxnKind.MMIO_WRITE].count == 1
    assert delta[TxnKind.DMA_WRITE].count == 1
    assert delta[TxnKind.DMA_WRITE].bytes == 256
    assert runtime.moves == 1
    assert runtime.timing.link_ns == pytest.approx(delta.link_ns)
    assert load_message(sim.memory, root) == person
    # the bit follows, the next message lands on the host
    assert not sim.table.placement(person.schema.class_id, (3,))
    assert receive(sim, person).slots[3].region is Region.HOST


def test_move_is_idempotent(sim, person):
    runtime = sim.runtime
    root = receive(sim, person)
    name = runtime.handle(root, 'name')
    runtime.move_to_acc(name)
    events = sim.ledger.snapshot().events
    runtime.move_to_nacc(name)
    assert sim.ledger.snapshot().events == events
    assert runtime.moves == 1
    assert sim.table.placement(person.schema.class_id, (2,))


def test_move_to_acc(sim, person):
    runtime = sim.runtime
    root = receive(sim, person)
    tags = runtime.handle(root, 'tags')
    before = sim.ledger.snapshot()
    runtime.move_to_acc(tags)
    delta = sim.ledger.snapshot() - before
    # both values in a single gather
    assert delta[TxnKind.DMA_READ].count == 1
    assert delta[TxnKind.DMA_READ].bytes == 3
    assert all(h.region is Region.ACCEL for h in root.slots[6])
    assert load_message(sim.memory, root) == person


def test_move_sub_message(sim, person):
    runtime = sim.runtime
    root = receive(sim, person)
    office = runtime.handle(root, 'office')
    assert runtime.is_in_acc(office)
    runtime.move_to_cpu(office)
    obj = root.slots[9]
    assert obj.region is Region.HOST
    assert obj.body.region is Region.HOST
    assert obj.slots[2].address == obj.body.address
    assert load_message(sim.memory, root) == person
    assert not sim.table.placement(person.schema.class_id, (9,))


def test_nested_handle(sim, person):
    runtime = sim.runtime
    root = receive(sim, person)
    street = runtime.handle(root, 'home.street')
    assert street.owner() is root.slots[5]
    runtime.move_to_acc(street)
    assert sim.table.placement(person.schema.class_id, (5, 1))
    assert not sim.table.placement(
        sim.table.by_name('Address').class_id, (1,))
    assert runtime.read_field(street, Region.ACCEL) == 'Via Roma'


def test_read_field(sim, person):
    runtime = sim.runtime
    root = receive(sim, person)
    assert runtime.read_field(runtime.handle(root, 'name')) == 'Ada'
    assert runtime.read_field(runtime.handle(root, 'tags')) == ['a', 'bb']
    assert runtime.read_field(runtime.handle(root, 'scores')) == [10, -3,
                                                                   250]
    before = sim.ledger.snapshot()
    photo = runtime.handle(root, 'photo')
    assert runtime.read_field(photo) == person['photo']
    assert (sim.ledger.snapshot() - before)[TxnKind.DMA_READ].count == 1
    assert runtime.read_field(photo, Region.ACCEL) == person['photo']
    with pytest.raises(InvalidHandle):
        runtime.read_field(runtime.handle(root, 'office'))


def test_invalid_handles(sim, sample_table, person):
    root = receive(sim, person)
    with pytest.raises(InvalidHandle):
        FieldHandle(root, 'id')
    with pytest.raises(InvalidHandle):
        FieldHandle(root, 'nope')
    with pytest.raises(InvalidHandle):
        FieldHandle(root, 'home.number')
    bare = receive(sim, Message(sample_table.by_name('Person'), id=1))
    with pytest.raises(InvalidHandle):
        FieldHandle(bare, 'photo').region
    with pytest.raises(InvalidHandle):
        FieldHandle(bare, 'home.street').owner()


def test_auto_update_off(sim, person):
    runtime = HostRuntime(sim.table, sim.memory, sim.interconnect,
                          auto_update=False)
    root = receive(sim, person)
    runtime.move_to_cpu(runtime.handle(root, 'photo'))
    assert root.slots[3].region is Region.HOST
    assert sim.table.placement(person.schema.class_id, (3,))
    assert sim.table.overrides() == {}
