import random

import pytest

from instances import brute_extensions, extend_instance
from vcdpor.apo import APO, is_closed, linearizes
from vcdpor.events import READ, WRITE, Event, PartialOrder, po_from_thread_order
from vcdpor.extend import extend, extend_one, leaf_refines, placements, unobservable


def w(tid, idx, var="x", val=0):
    return Event(tid, idx, WRITE, var, val)


def leaf_chain(k):
    evs = [w(2 + i, 1, "x", i) for i in range(k)]
    po = po_from_thread_order(evs)
    for a, b in zip(evs, evs[1:]):
        po = po.add_ordering(a, b)
    return APO(po, 1), evs


def test_root_event_has_one_extension():
    apo, evs = leaf_chain(2)
    e = w(1, 1)
    out = list(extend_one(apo, e))
    assert len(out) == 1
    assert set(out[0].events) == set(evs) | {e}
    assert out[0].order.unordered(e, evs[0])


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_leaf_write_against_chain_has_k_plus_1_placements(k):
    apo, evs = leaf_chain(k)
    e = w(9, 1, "x", 7)
    out = list(extend_one(apo, e))
    assert len(out) == k + 1
    # earliest placement first
    if k:
        assert out[0].order.ordered(e, evs[0])
        assert out[-1].order.ordered(evs[-1], e)


def test_non_conflicting_leaf_event_single():
    apo, _ = leaf_chain(3)
    out = list(extend_one(apo, w(9, 1, "y")))
    assert len(out) == 1


def test_placements_respect_existing_order():
    a, b = w(2, 1), w(3, 1)
    e = w(4, 1)
    po = PartialOrder([a, b]).add_ordering(a, b).with_element(e, [a])
    qs = placements(po, e, [a, b])
    # e is already after a, so only "before b" or "after b"
    assert len(qs) == 2


def test_extend_events_are_union():
    apo, evs = leaf_chain(1)
    new = [w(1, 1, "y"), w(5, 1, "x", 3)]
    outs = list(extend(apo, new))
    assert len(outs) == 2
    for q in outs:
        assert set(q.events) == set(evs) | set(new)


def test_extend_with_nothing_is_identity():
    apo, _ = leaf_chain(2)
    assert [q.same_as(apo) for q in extend(apo, [])] == [True]


def test_leaf_read_sets_good_writes():
    apo, evs = leaf_chain(2)
    r = Event(5, 1, READ, "x", 1)
    outs = list(extend_one(apo, r, None, [evs[1]]))
    assert outs
    for q in outs:
        assert q.good[r] == frozenset([evs[1]])
        assert is_closed(q)[0]
        assert q.order.ordered(evs[1], r)


def test_leaf_refines():
    a, b, c = w(2, 1), w(3, 1), w(1, 1)
    p = PartialOrder([a, b, c]).add_ordering(a, b)
    assert leaf_refines(p.add_ordering(c, b), p, root=1)
    assert not leaf_refines(PartialOrder([a, b, c]), p, root=1)
    # orderings involving the root thread are ignored
    assert leaf_refines(PartialOrder([a, b, c]).add_ordering(a, b), p.add_ordering(c, a), root=1)


def test_unobservable():
    w1, w2 = w(2, 1), w(2, 2)
    r = Event(3, 1, READ, "x", 0)
    po = po_from_thread_order([w1, w2, r]).add_ordering(w2, r)
    assert unobservable(po, w1)
    assert not unobservable(po, w2)


def _check_instance(rng, prune):
    base, new, side, good = extend_instance(rng)
    outs = list(extend(base, new, side, good, prune=prune))
    for q in outs:
        assert set(q.events) == set(base.events) | set(new)
        assert q.order.refines(base.order)
        assert is_closed(q)[0]
    for t in brute_extensions(base, new, side, good):
        assert any(linearizes(q.order, t) for q in outs)
    return outs


def test_extend_complete_small_sample():
    rng = random.Random(11)
    for _ in range(40):
        outs = _check_instance(rng, prune=False)
        for i, q1 in enumerate(outs):
            for q2 in outs[i + 1:]:
                assert not leaf_refines(q1.order, q2.order, 1)
                assert not leaf_refines(q2.order, q1.order, 1)


def test_extend_complete_with_prune():
    rng = random.Random(12)
    for _ in range(40):
        _check_instance(rng, prune=True)
