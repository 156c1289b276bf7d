"""Events, traces and persistent strict partial orders over events."""

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import networkx as nx

READ = "r"
WRITE = "w"
SPAWN = "spawn"
JOIN = "join"


@dataclass(frozen=True)
class Event:
    """One visible instruction instance.

    For reads and writes `var` is the global variable. For spawn and join
    `var` is the target thread name and `value` its thread id.
    """

    tid: int
    index: int
    kind: str
    var: Optional[str] = None
    value: int = 0

    @property
    def id(self) -> Tuple[int, int]:
        return (self.tid, self.index)

    @property
    def key(self) -> Tuple[int, int]:
        """Canonical order: thread rank, then per-thread index."""
        return (self.tid, self.index)

    @property
    def is_read(self) -> bool:
        return self.kind == READ

    @property
    def is_write(self) -> bool:
        return self.kind == WRITE

    @property
    def is_access(self) -> bool:
        return self.kind == READ or self.kind == WRITE

    def conflicts(self, other: "Event") -> bool:
        return (
            self.is_access
            and other.is_access
            and self.var == other.var
            and (self.kind == WRITE or other.kind == WRITE)
        )

    def __str__(self):
        if self.is_access:
            return f"{self.kind}{self.tid}.{self.index}({self.var},{self.value})"
        return f"{self.kind}{self.tid}.{self.index}({self.var})"

    __repr__ = __str__


def conflicting(e1: Event, e2: Event) -> bool:
    return e1.conflicts(e2)


def canonical(events: Iterable[Event]) -> List[Event]:
    return sorted(events, key=lambda e: e.key)


@dataclass(frozen=True)
class Trace:
    events: Tuple[Event, ...]
    program: str = ""

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def well_indexed(self) -> bool:
        """Per-thread subsequences carry consecutive indices from 1."""
        seen: Dict[int, int] = {}
        for e in self.events:
            if e.index != seen.get(e.tid, 0) + 1:
                return False
            seen[e.tid] = e.index
        return True


class CycleError(ValueError):
    """Raised when an ordering would close a cycle."""


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def program_order_preds(e: Event, present: Dict[Tuple[int, int], Event]) -> List[Event]:
    """Immediate program-order predecessors of e among the present events.

    These are the previous event of the same thread, the spawn event for a
    thread's first event, and the joined thread's last event for a join.
    """
    preds = []
    prev = present.get((e.tid, e.index - 1))
    if prev is not None:
        preds.append(prev)
    if e.index == 1:
        for f in present.values():
            if f.kind == SPAWN and f.value == e.tid:
                preds.append(f)
                break
    if e.kind == JOIN:
        last = None
        for f in present.values():
            if f.tid == e.value and (last is None or f.index > last.index):
                last = f
        if last is not None:
            preds.append(last)
    return preds


class PartialOrder:
    """Strict partial order with predecessor/successor bitsets.

    Values are persistent: every strengthening returns a new object.
    """

    __slots__ = ("_elems", "_pos", "_succ", "_pred")

    def __init__(self, elements: Iterable[Event] = (), edges: Iterable[Tuple[Event, Event]] = ()):
        self._elems: Tuple[Event, ...] = ()
        self._pos: Dict[Event, int] = {}
        self._succ: List[int] = []
        self._pred: List[int] = []
        elems = list(elements)
        if elems:
            self._elems = tuple(elems)
            self._pos = {e: i for i, e in enumerate(elems)}
            if len(self._pos) != len(elems):
                raise ValueError("duplicate element")
            self._succ = [0] * len(elems)
            self._pred = [0] * len(elems)
        for a, b in edges:
            self._insert(self._pos[a], self._pos[b])

    # construction helpers

    def copy(self) -> "PartialOrder":
        po = PartialOrder.__new__(PartialOrder)
        po._elems = self._elems
        po._pos = self._pos
        po._succ = list(self._succ)
        po._pred = list(self._pred)
        return po

    def _insert(self, i: int, j: int) -> bool:
        """Add i<j in place. Returns False if already present."""
        if i == j or (self._succ[j] >> i) & 1:
            raise CycleError(f"{self._elems[i]} -> {self._elems[j]}")
        if (self._succ[i] >> j) & 1:
            return False
        below = self._pred[i] | (1 << i)
        above = self._succ[j] | (1 << j)
        for x in _bits(below):
            self._succ[x] |= above
        for y in _bits(above):
            self._pred[y] |= below
        return True

    def with_element(self, e: Event, after: Iterable[Event] = ()) -> "PartialOrder":
        """New order with e added above every event in `after`."""
        if e in self._pos:
            raise ValueError(f"{e} already present")
        po = PartialOrder.__new__(PartialOrder)
        po._elems = self._elems + (e,)
        po._pos = dict(self._pos)
        n = len(self._elems)
        po._pos[e] = n
        po._succ = list(self._succ) + [0]
        po._pred = list(self._pred) + [0]
        for a in after:
            po._insert(po._pos[a], n)
        return po

    def add_ordering(self, a: Event, b: Event) -> "PartialOrder":
        po = self.copy()
        po._insert(self._pos[a], self._pos[b])
        return po

    # queries

    @property
    def elements(self) -> Tuple[Event, ...]:
        return self._elems

    def __contains__(self, e) -> bool:
        return e in self._pos

    def __len__(self):
        return len(self._elems)

    def index_of(self, e: Event) -> int:
        return self._pos[e]

    def mask(self, events: Iterable[Event]) -> int:
        m = 0
        for e in events:
            m |= 1 << self._pos[e]
        return m

    def events_of(self, mask: int) -> List[Event]:
        return [self._elems[i] for i in _bits(mask)]

    def ordered(self, a: Event, b: Event) -> bool:
        return bool((self._succ[self._pos[a]] >> self._pos[b]) & 1)

    def unordered(self, a: Event, b: Event) -> bool:
        return a != b and not self.ordered(a, b) and not self.ordered(b, a)

    def successors(self, e: Event) -> List[Event]:
        return self.events_of(self._succ[self._pos[e]])

    def predecessors(self, e: Event) -> List[Event]:
        return self.events_of(self._pred[self._pos[e]])

    def pairs(self) -> frozenset:
        return frozenset(
            (a, self._elems[j]) for i, a in enumerate(self._elems) for j in _bits(self._succ[i])
        )

    def __eq__(self, other):
        if not isinstance(other, PartialOrder):
            return NotImplemented
        return set(self._elems) == set(other._elems) and self.pairs() == other.pairs()

    def __hash__(self):
        return hash((frozenset(self._elems), self.pairs()))

    def refines(self, other: "PartialOrder") -> bool:
        """True iff every ordering of `other` is also in self."""
        for a, b in other.pairs():
            if not self.ordered(a, b):
                return False
        return True

    def project(self, ys: Iterable[Event]) -> "PartialOrder":
        keep = [e for e in self._elems if e in set(ys)]
        keep_set = set(keep)
        po = PartialOrder(keep)
        for a in keep:
            i = self._pos[a]
            for j in _bits(self._succ[i]):
                b = self._elems[j]
                if b in keep_set:
                    po._succ[po._pos[a]] |= 1 << po._pos[b]
                    po._pred[po._pos[b]] |= 1 << po._pos[a]
        return po

    def linearize(self, key: Callable[[Event], object] = lambda e: e.key) -> List[Event]:
        """Deterministic linear extension: the smallest available event first."""
        done = 0
        out = []
        remaining = sorted(range(len(self._elems)), key=lambda i: key(self._elems[i]))
        while remaining:
            for k, i in enumerate(remaining):
                if self._pred[i] & ~done == 0:
                    break
            else:
                raise CycleError("not acyclic")
            done |= 1 << i
            out.append(self._elems[i])
            del remaining[k]
        return out

    def cover_edges(self) -> List[Tuple[Event, Event]]:
        """Transitive reduction in canonical order."""
        edges = []
        for a in canonical(self._elems):
            i = self._pos[a]
            succ = self._succ[i]
            for j in _bits(succ):
                if not any((self._succ[k] >> j) & 1 for k in _bits(succ)):
                    edges.append((a, self._elems[j]))
        return sorted(edges, key=lambda ab: (ab[0].key, ab[1].key))

    def dump(self) -> str:
        lines = [f"{a} -> {b}" for a, b in self.cover_edges()]
        return "\n".join(lines)

    def width(self, events: Optional[Iterable[Event]] = None) -> int:
        """Size of the longest antichain, via Dilworth and bipartite matching."""
        idx = [self._pos[e] for e in events] if events is not None else list(range(len(self._elems)))
        if not idx:
            return 0
        g = nx.Graph()
        left = [("l", i) for i in idx]
        g.add_nodes_from(left)
        g.add_nodes_from(("r", i) for i in idx)
        sel = 0
        for i in idx:
            sel |= 1 << i
        for i in idx:
            for j in _bits(self._succ[i] & sel):
                g.add_edge(("l", i), ("r", j))
        matching = nx.bipartite.hopcroft_karp_matching(g, top_nodes=left)
        return len(idx) - len(matching) // 2

    def mazurkiewicz_width(self, events: Optional[Iterable[Event]] = None) -> int:
        """Largest pairwise-conflicting antichain (at least 1 on a non-empty set)."""
        evs = list(events) if events is not None else list(self._elems)
        if not evs:
            return 0
        best = 1
        by_var: Dict[str, List[Event]] = {}
        for e in evs:
            if e.is_access:
                by_var.setdefault(e.var, []).append(e)
        for group in by_var.values():
            writes = [e for e in group if e.is_write]
            if not writes:
                continue
            best = max(best, self.width(writes))
            for r in group:
                if r.is_read:
                    free = [w for w in writes if self.unordered(r, w)]
                    best = max(best, 1 + self.width(free))
        return best

    def __repr__(self):
        return f"PartialOrder({len(self._elems)} events, {len(self.cover_edges())} cover edges)"


def po_from_thread_order(events: Iterable[Event]) -> PartialOrder:
    """Thread order plus spawn-to-first-event and last-event-to-join edges."""
    evs = canonical(events)
    present = {e.id: e for e in evs}
    po = PartialOrder(evs)
    for e in evs:
        for p in program_order_preds(e, present):
            po._insert(po._pos[p], po._pos[e])
    return po


def total_order(events: Sequence[Event]) -> PartialOrder:
    po = PartialOrder(events)
    for i in range(len(events) - 1):
        po._insert(i, i + 1)
    return po


def write_mask(po: PartialOrder, var: str) -> int:
    m = 0
    for i, e in enumerate(po.elements):
        if e.kind == WRITE and e.var == var:
            m |= 1 << i
    return m


def visible_mask(po: PartialOrder, r: Event, writes: Optional[int] = None) -> int:
    i = po._pos[r]
    if writes is None:
        writes = write_mask(po, r.var)
    cand = writes & ~po._succ[i]
    before_r = po._pred[i]
    vis = 0
    for w in _bits(cand):
        if not (po._succ[w] & before_r & writes):
            vis |= 1 << w
    return vis


def minimal_in(po: PartialOrder, mask: int) -> int:
    return sum(1 << w for w in _bits(mask) if not (po._pred[w] & mask))


def maximal_in(po: PartialOrder, mask: int) -> int:
    return sum(1 << w for w in _bits(mask) if not (po._succ[w] & mask))


def visible_writes(po: PartialOrder, r: Event) -> List[Event]:
    return po.events_of(visible_mask(po, r))


def min_writes(po: PartialOrder, r: Event) -> List[Event]:
    return po.events_of(minimal_in(po, visible_mask(po, r)))


def max_writes(po: PartialOrder, r: Event) -> List[Event]:
    return po.events_of(maximal_in(po, visible_mask(po, r)))
