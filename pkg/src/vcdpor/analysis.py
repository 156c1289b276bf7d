"""Derived functions of a trace and the equivalences built on them."""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence

from .events import Event, PartialOrder, Trace, program_order_preds


def _from_pred_masks(events: Sequence[Event], preds: List[int]) -> PartialOrder:
    po = PartialOrder(events)
    po._pred = list(preds)
    succ = [0] * len(events)
    for j, m in enumerate(preds):
        b = 1 << j
        i = 0
        while m:
            if m & 1:
                succ[i] |= b
            m >>= 1
            i += 1
    po._succ = succ
    return po


def _order(events: Sequence[Event], extra) -> PartialOrder:
    """Transitive closure of program order plus extra(i) -> i edges, in trace order."""
    present = {}
    pos = {}
    preds: List[int] = []
    for i, e in enumerate(events):
        m = 0
        direct = [pos[p.id] for p in program_order_preds(e, present)]
        direct.extend(extra(i))
        for j in direct:
            m |= preds[j] | (1 << j)
        preds.append(m)
        present[e.id] = e
        pos[e.id] = i
    return _from_pred_masks(events, preds)


def observation(events: Sequence[Event]) -> Dict[Event, Event]:
    last: Dict[str, Event] = {}
    obs = {}
    for e in events:
        if e.is_read and e.var in last:
            obs[e] = last[e.var]
        elif e.is_write:
            last[e.var] = e
    return obs


def guard(t: Iterable[Event], e: Event) -> Optional[Event]:
    """Last read of e's thread that precedes e, or None."""
    g = None
    for f in t:
        if f.tid == e.tid and f.is_read and f.index < e.index:
            if g is None or f.index > g.index:
                g = f
    return g


def guards(t: Iterable[Event]) -> Dict[Event, Optional[Event]]:
    last: Dict[int, Optional[Event]] = {}
    out = {}
    for e in t:
        out[e] = last.get(e.tid)
        if e.is_read:
            last[e.tid] = e
    return out


@dataclass
class TraceAnalysis:
    trace: Trace
    root: int
    observation: Dict[Event, Event]
    hb: PartialOrder
    chb: PartialOrder

    @property
    def valuefn(self) -> Dict[Event, int]:
        return {e: e.value for e in self.trace}

    @cached_property
    def sidefn(self) -> Dict[Event, int]:
        return {
            r: 1 if w.tid == self.root else 2
            for r, w in self.observation.items()
            if r.tid == self.root
        }

    @cached_property
    def events(self) -> frozenset:
        return frozenset(self.trace)

    @cached_property
    def hb_pairs(self) -> frozenset:
        return self.hb.pairs()

    @cached_property
    def leaf_hb(self) -> frozenset:
        root = self.root
        return frozenset((a, b) for a, b in self.hb_pairs if a.tid != root and b.tid != root)

    @cached_property
    def chb_reads(self) -> frozenset:
        return frozenset((a, b) for a, b in self.chb.pairs() if a.is_read and b.is_read)

    @cached_property
    def obs_items(self) -> frozenset:
        return frozenset(self.observation.items())

    def key(self, kind: str):
        """Hashable key; two analyses are equivalent iff their keys are equal."""
        if kind == "hb":
            return (self.events, self.hb_pairs)
        if kind == "vhb":
            return (self.events, frozenset(self.sidefn.items()), self.chb_reads, self.leaf_hb)
        if kind == "obs":
            return (self.events, self.obs_items)
        if kind == "obs_c":
            return (self.events, self.obs_items, self.leaf_hb)
        raise ValueError(f"unknown equivalence {kind!r}")


def analyze(p, t, root: Optional[int] = None) -> TraceAnalysis:
    """Analyze a trace. With a program the trace is replayed first."""
    if p is not None:
        from .dsl import replay

        replay(p, t)
        if root is None:
            root = p.default_root()
    if not isinstance(t, Trace):
        t = Trace(tuple(t), getattr(p, "name", ""))
    events = t.events
    obs = observation(events)
    pos = {e: i for i, e in enumerate(events)}

    def conflicts_before(i):
        e = events[i]
        return [j for j in range(i) if events[j].conflicts(e)]

    def observed(i):
        w = obs.get(events[i])
        return [pos[w]] if w is not None else []

    hb = _order(events, conflicts_before)
    chb = _order(events, observed)
    return TraceAnalysis(t, root if root is not None else 0, obs, hb, chb)


def hb_equiv(a1: TraceAnalysis, a2: TraceAnalysis) -> bool:
    return a1.key("hb") == a2.key("hb")


def vhb_equiv(a1: TraceAnalysis, a2: TraceAnalysis, root: Optional[int] = None) -> bool:
    if root is not None and (a1.root != root or a2.root != root):
        raise ValueError("analyses computed with a different root")
    return a1.key("vhb") == a2.key("vhb")


def obs_equiv(a1: TraceAnalysis, a2: TraceAnalysis) -> bool:
    return a1.key("obs") == a2.key("obs")


def obs_c_equiv(a1: TraceAnalysis, a2: TraceAnalysis, root: Optional[int] = None) -> bool:
    if root is not None and (a1.root != root or a2.root != root):
        raise ValueError("analyses computed with a different root")
    return a1.key("obs_c") == a2.key("obs_c")


EQUIVALENCES = ("hb", "vhb", "obs", "obs_c")


def partition(traces, equiv: str, p=None, root: Optional[int] = None, analyses=None) -> List[List]:
    """Classes of traces in order of first appearance."""
    if analyses is None:
        analyses = [analyze(p, t, root) for t in traces]
    classes: Dict[object, List] = {}
    for t, a in zip(traces, analyses):
        classes.setdefault(a.key(equiv), []).append(t)
    return list(classes.values())
