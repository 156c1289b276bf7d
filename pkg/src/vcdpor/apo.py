"""Annotated partial orders: closure and witness construction."""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .events import (
    CycleError,
    Event,
    PartialOrder,
    _bits,
    canonical,
    maximal_in,
    minimal_in,
    program_order_preds,
    visible_mask,
    write_mask,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class APO:
    """Events split into root (X1) and leaf (X2) events, ordered by `order`.

    Values live on the events themselves. `side` maps root reads to 1
    (observe a root write) or 2 (observe a leaf write); `good` maps each read
    to the writes it may observe.
    """

    order: PartialOrder
    root: int
    side: Dict[Event, int] = field(default_factory=dict)
    good: Dict[Event, FrozenSet[Event]] = field(default_factory=dict)

    @staticmethod
    def empty(root: int) -> "APO":
        return APO(PartialOrder(), root)

    @property
    def events(self) -> Tuple[Event, ...]:
        return self.order.elements

    @property
    def x1(self) -> List[Event]:
        return [e for e in self.events if e.tid == self.root]

    @property
    def x2(self) -> List[Event]:
        return [e for e in self.events if e.tid != self.root]

    def is_root(self, e: Event) -> bool:
        return e.tid == self.root

    @property
    def reads(self) -> List[Event]:
        return canonical(e for e in self.events if e.is_read)

    def bad(self, r: Event) -> List[Event]:
        g = self.good.get(r, frozenset())
        return [w for w in self.events if w.is_write and w.var == r.var and w not in g]

    def value(self, e: Event) -> int:
        return e.value

    def same_as(self, other: "APO") -> bool:
        return (
            self.root == other.root
            and self.order == other.order
            and self.side == other.side
            and self.good == other.good
        )

    def dump(self) -> str:
        lines = ["events: " + " ".join(str(e) for e in canonical(self.events))]
        for a, b in self.order.cover_edges():
            lines.append(f"  {a} -> {b}")
        for r in self.reads:
            s = self.side.get(r)
            g = " ".join(str(w) for w in canonical(self.good.get(r, ())))
            lines.append(f"  {r}" + (f" side={s}" if s else "") + f" good={{{g}}}")
        return "\n".join(lines)


def validate(p, apo: APO) -> List[str]:
    """Check the structural invariants; returns a list of violations."""
    out = []
    po = apo.order
    x1 = apo.x1
    for r in apo.reads:
        for w in apo.good.get(r, ()):
            if w not in po:
                out.append(f"good write {w} of {r} not in the order")
                continue
            if not r.conflicts(w):
                out.append(f"good write {w} does not conflict with {r}")
            if w.value != r.value:
                out.append(f"good write {w} has a different value than {r}")
            if apo.is_root(r):
                s = apo.side.get(r)
                if s not in (1, 2):
                    out.append(f"root read {r} has no side")
                elif (s == 1) != apo.is_root(w):
                    out.append(f"good write {w} of {r} on the wrong side")
    if po.width(x1) > 1:
        out.append("root events are not totally ordered")
    if po.mazurkiewicz_width(apo.x2) > 1:
        out.append("conflicting leaf events are unordered")
    present = {e.id: e for e in apo.events}
    for e in apo.events:
        for q in program_order_preds(e, present):
            if not po.ordered(q, e):
                out.append(f"order misses program order {q} -> {e}")
    if p is not None:
        from .dsl import local_run

        by_thread: Dict[int, List[Event]] = {}
        for e in apo.events:
            by_thread.setdefault(e.tid, []).append(e)
        for tid, evs in by_thread.items():
            evs.sort(key=lambda e: e.index)
            if [e.index for e in evs] != list(range(1, len(evs) + 1)):
                out.append(f"thread {tid} events are not a prefix")
                continue
            vals = {e.index: e.value for e in evs if e.is_read}
            run = local_run(p, tid, vals, len(evs))
            if run != evs:
                out.append(f"thread {tid} events are not a local run of the program")
    return out


class _State:
    """Mutable closure state over a private copy of the order."""

    def __init__(self, apo: APO):
        self.apo = apo
        self.po = apo.order.copy()
        po = self.po
        self.x1 = po.mask(apo.x1)
        self.all = (1 << len(po)) - 1
        self.wm: Dict[str, int] = {}
        self.good: Dict[int, int] = {}
        for r in apo.reads:
            if r.var not in self.wm:
                self.wm[r.var] = write_mask(po, r.var)
            self.good[po.index_of(r)] = po.mask(w for w in apo.good.get(r, ()) if w in po)

    def remote(self, i: int) -> int:
        return self.all & ~self.x1 if (self.x1 >> i) & 1 else self.x1

    def check(self, i: int):
        """(rule, visible, witness) for the first violated rule, rule 0 if none."""
        po = self.po
        r = po.elements[i]
        good = self.good[i]
        before = po._pred[i]
        vis = visible_mask(po, r, self.wm[r.var])
        mins = minimal_in(po, vis)
        if not (good & mins & before):
            return 1, vis, None
        maxs = maximal_in(po, vis)
        if not (maxs & good):
            return 2, vis, None
        for w in _bits(mins & ~good & before):
            if not (po._succ[w] & good & vis):
                return 3, vis, w
        return 0, vis, None

    def pick(self, mask: int) -> Optional[int]:
        if not mask:
            return None
        idx = list(_bits(mask))
        if len(idx) > 1:
            log.debug("closure: %d candidates where one was expected", len(idx))
        return min(idx, key=lambda j: self.po.elements[j].key)

    def apply(self, i: int, rule: int, vis: int, wbar: Optional[int]) -> Optional[Tuple[int, int]]:
        po = self.po
        if rule == 1:
            w = self.pick(minimal_in(po, self.good[i] & vis))
            edge = (w, i) if w is not None else None
        elif rule == 2:
            w = self.pick(maximal_in(po, vis) & self.remote(i))
            edge = (i, w) if w is not None else None
        else:
            cands = maximal_in(po, vis) & self.remote(wbar)
            w = self.pick(cands & self.good[i] or cands)
            edge = (wbar, w) if w is not None else None
        if edge is None:
            log.debug("closure: rule %d has no required write", rule)
            return None
        try:
            po._insert(*edge)
        except CycleError:
            return None
        return edge


def is_closed(apo: APO) -> Tuple[bool, Optional[Tuple[Event, int]]]:
    st = _State(apo)
    for r in apo.reads:
        rule, _, _ = st.check(st.po.index_of(r))
        if rule:
            return False, (r, rule)
    return True, None


def closure(apo: APO, scan: Optional[Sequence[Event]] = None, steps: Optional[list] = None) -> Optional[APO]:
    """The weakest closed strengthening of apo, or None when infeasible.

    `scan` overrides the read scan order; `steps` collects (rule, a, b) for
    every inserted ordering.
    """
    st = _State(apo)
    po = st.po
    reads = [po.index_of(r) for r in (scan if scan is not None else apo.reads)]
    changed = True
    while changed:
        changed = False
        for i in reads:
            rule, vis, wbar = st.check(i)
            for want in (1, 2, 3):
                if rule != want:
                    continue
                edge = st.apply(i, rule, vis, wbar)
                if edge is None:
                    return None
                if steps is not None:
                    steps.append((rule, po.elements[edge[0]], po.elements[edge[1]]))
                changed = True
                rule, vis, wbar = st.check(i)
    return replace(apo, order=po)


def realize(apo: APO) -> List[Event]:
    """A witness linearization of a closed APO.

    Root events are pushed before every leaf event not already below them.
    """
    po = apo.order
    n = len(po)
    x1 = po.mask(apo.x1)
    preds = []
    for i, e in enumerate(po.elements):
        m = po._pred[i]
        if not (x1 >> i) & 1:
            m |= x1 & ~po._succ[i]
        preds.append(m)
    order = sorted(range(n), key=lambda i: po.elements[i].key)
    done = 0
    out = []
    while order:
        for k, i in enumerate(order):
            if preds[i] & ~done == 0:
                break
        else:
            raise CycleError("witness order is cyclic")
        done |= 1 << i
        out.append(po.elements[i])
        del order[k]
    return out


def observes_good(apo: APO, t: Sequence[Event]) -> bool:
    last: Dict[str, Event] = {}
    for e in t:
        if e.is_read:
            w = last.get(e.var)
            if w is None or w not in apo.good.get(e, ()):
                return False
        elif e.is_write:
            last[e.var] = e
    return True


def linearizes(po: PartialOrder, t: Sequence[Event]) -> bool:
    if set(t) != set(po.elements) or len(t) != len(po):
        return False
    pos = {e: i for i, e in enumerate(t)}
    return all(pos[a] < pos[b] for a, b in po.pairs())
