"""Growing a closed APO by new events."""

from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence

from .apo import APO, closure
from .events import CycleError, Event, PartialOrder, program_order_preds, visible_mask, write_mask


def leaf_refines(q: PartialOrder, p: PartialOrder, root: int) -> bool:
    """Q agrees with every ordered conflicting pair of leaf events in P."""
    for a, b in p.pairs():
        if a.tid != root and b.tid != root and a.conflicts(b) and not q.ordered(a, b):
            return False
    return True


def unobservable(po: PartialOrder, w: Event) -> bool:
    """No read present in po can observe w in any linearization."""
    i = po.index_of(w)
    wm = write_mask(po, w.var)
    for r in po.elements:
        if r.is_read and r.var == w.var and (visible_mask(po, r, wm) >> i) & 1:
            return False
    return True


def _total_leaf_writes(po: PartialOrder, var: str, root: int) -> Iterator[PartialOrder]:
    """Every way to totally order the (possibly unordered) leaf writes on var."""
    ws = [e for e in po.elements if e.is_write and e.var == var and e.tid != root]
    ws.sort(key=lambda e: e.key)
    for i, a in enumerate(ws):
        for b in ws[i + 1:]:
            if po.unordered(a, b):
                for x, y in ((a, b), (b, a)):
                    try:
                        nxt = po.add_ordering(x, y)
                    except CycleError:
                        continue
                    yield from _total_leaf_writes(nxt, var, root)
                return
    yield po


def placements(po: PartialOrder, e: Event, conf: Sequence[Event]) -> List[PartialOrder]:
    """Orders placing e before or after each event of conf, earliest first."""
    conf = sorted(conf, key=lambda c: c.key)
    conf = [c for c in po.linearize() if c in set(conf)]
    forced = {c for c in conf if po.ordered(c, e)}
    downsets = []

    def rec(k, before):
        if k == len(conf):
            downsets.append(list(before))
            return
        c = conf[k]
        if c not in forced:
            rec(k + 1, before)
        if all(x in before for x in conf[:k] if po.ordered(x, c)):
            before.append(c)
            rec(k + 1, before)
            before.pop()

    rec(0, [])
    downsets.sort(key=lambda bs: (len(bs), [c.key for c in bs]))
    out = []
    for before in downsets:
        q = po.copy()
        bset = set(before)
        ie = q.index_of(e)
        try:
            for c in conf:
                if c in bset:
                    q._insert(q.index_of(c), ie)
                else:
                    q._insert(ie, q.index_of(c))
        except CycleError:
            continue
        out.append(q)
    return out


def extend_one(
    apo: APO,
    e: Event,
    side: Optional[int] = None,
    good: Iterable[Event] = (),
    prune: bool = False,
    close: bool = True,
) -> Iterator[APO]:
    """Closed extensions of apo by one event, earliest placements first.

    With close=False the orders are yielded unclosed; closing is only sound
    once every read's good writes are present.
    """
    present = {x.id: x for x in apo.events}
    preds = program_order_preds(e, present)
    sides = apo.side
    goods = apo.good
    if e.is_read:
        goods = dict(goods)
        goods[e] = frozenset(good)
        if e.tid == apo.root:
            sides = dict(sides)
            sides[e] = side
    bases = _total_leaf_writes(apo.order, e.var, apo.root) if prune and e.is_read else [apo.order]
    for base in bases:
        po = base.with_element(e, preds)
        if e.tid == apo.root or not e.is_access:
            cands = [po]
        else:
            conf = [x for x in apo.events if x.tid != apo.root and x.conflicts(e)]
            if prune and e.is_write:
                e_hidden = unobservable(po, e)
                conf = [x for x in conf if not (x.is_write and (e_hidden or unobservable(po, x)))]
            cands = placements(po, e, conf)
        for q in cands:
            c = APO(q, apo.root, sides, goods)
            if close:
                c = closure(c)
            if c is not None:
                yield c


def _goods_present(apo: APO) -> bool:
    evs = set(apo.events)
    return all(apo.good.get(r, frozenset()) <= evs for r in apo.reads)


def extend(
    apo: APO,
    new_events: Sequence[Event],
    side: Optional[Dict[Event, int]] = None,
    good: Optional[Dict[Event, FrozenSet[Event]]] = None,
    prune: bool = False,
) -> Iterator[APO]:
    """Lazily yield the closed extensions of apo by new_events.

    Events are added one at a time in the given order, which must respect
    program order (trace order does). Closure runs after each step whose
    reads have all their good writes present, and always at the end.
    """
    side = side or {}
    good = good or {}
    if not new_events:
        c = apo if _goods_present(apo) else closure(apo)
        if c is not None:
            yield c
        return
    e = new_events[0]
    for k in extend_one(apo, e, side.get(e), good.get(e, ()), prune, close=False):
        if _goods_present(k):
            k = closure(k)
            if k is None:
                continue
        yield from extend(k, new_events[1:], side, good, prune)
