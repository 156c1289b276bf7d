"""Value-centric exploration driven by annotated partial orders."""

import time
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Set, Tuple, Union

from .analysis import guards
from .apo import APO, realize
from .dsl import ExecState, Program, ProgramError, enabled_events, replay, step
from .events import READ, Event
from .extend import extend, extend_one
from .oracle import LimitExceeded, state_records, violation_records

TOP = "top"


class ChbMap:
    """Per read, per thread frontier of writes already tried as good writes.

    An entry is TOP (nothing excluded), None (writes with no guarding read
    are excluded) or the index of a read of that thread (writes guarded by
    it or an earlier read are excluded).
    """

    def __init__(self, data: Optional[Dict] = None):
        self._m: Dict[Tuple[int, int], Dict[int, Optional[int]]] = data or {}

    def get(self, read_id: Tuple[int, int], tid: int):
        return self._m.get(read_id, {}).get(tid, TOP)

    def set(self, read_id: Tuple[int, int], tid: int, frontier: Optional[int]):
        """Raise the frontier; it never moves back."""
        old = self.get(read_id, tid)
        if old == TOP or (old is None and frontier is not None) or (
            old is not None and frontier is not None and frontier > old
        ):
            self._m.setdefault(read_id, {})[tid] = frontier

    def copy(self) -> "ChbMap":
        return ChbMap({k: dict(v) for k, v in self._m.items()})

    def __eq__(self, other):
        return isinstance(other, ChbMap) and self._m == other._m


class PendingRead(NamedTuple):
    tid: int
    index: int
    var: str
    lock: bool

    @property
    def id(self):
        return (self.tid, self.index)


def admissible(frontier, g: Optional[Event]) -> bool:
    if g is None:
        return frontier == TOP
    return frontier == TOP or frontier is None or frontier < g.index


def candidate_writes(t, C: ChbMap, r) -> List[Event]:
    """Writes of t conflicting with r that the map still admits."""
    gs = guards(t)
    rid = (r.tid, r.index)
    return [
        w
        for w in t
        if w.is_write and w.var == r.var and admissible(C.get(rid, w.tid), gs[w])
    ]


def pending_reads(p: Program, s: ExecState) -> List[PendingRead]:
    out = []
    for tid, ts in enumerate(s.threads):
        if not ts.started or ts.pc >= len(p.code[tid]):
            continue
        ins = p.code[tid][ts.pc]
        if ins.op == "read":
            out.append(PendingRead(tid, ts.count + 1, ins.b, False))
        elif ins.op == "lock":
            out.append(PendingRead(tid, ts.count + 1, ins.a, True))
    return out


def wextend(p: Program, t, s: Optional[ExecState] = None) -> Tuple[List[Event], ExecState]:
    """Extend t by non-read events, one per thread per round, until every
    runnable thread's next event is a read."""
    s = replay(p, t) if s is None else s.copy()
    out = list(t)
    progress = True
    while progress:
        progress = False
        for tid, e in sorted(enabled_events(p, s).items()):
            if e.kind != READ:
                s, ev = step(p, s, tid, inplace=True)
                out.append(ev)
                progress = True
    return out, s


@dataclass
class ExplorerConfig:
    root: Union[int, str, None] = None
    prune: bool = False
    read_priority: bool = False
    max_traces: Optional[int] = None
    time_limit: Optional[float] = None
    keep_traces: bool = False


@dataclass
class ExplorationReport:
    program: str = ""
    root: int = 0
    realized: int = 0
    maximal: int = 0
    states: Set[Tuple] = field(default_factory=set)
    violations: Set[Tuple] = field(default_factory=set)
    nodes: int = 0
    extensions: int = 0
    peak_live: int = 0
    max_depth: int = 0
    time_s: float = 0.0
    status: str = "done"
    traces: List[List[Event]] = field(default_factory=list)
    maximal_traces: List[List[Event]] = field(default_factory=list)


def resolve_root(p: Program, root) -> int:
    if root is None:
        return p.default_root()
    if isinstance(root, str):
        return p.tid(root)
    if not 0 <= root < len(p.thread_names):
        raise ProgramError(f"no thread {root}")
    return root


class Explorer:
    def __init__(self, p: Program, cfg: Optional[ExplorerConfig] = None):
        self.p = p
        self.cfg = cfg or ExplorerConfig()
        self.root = resolve_root(p, self.cfg.root)
        self.report = ExplorationReport(program=p.name, root=self.root)
        self._live = 0
        self._deadline = None

    def run(self) -> ExplorationReport:
        start = time.perf_counter()
        if self.cfg.time_limit is not None:
            self._deadline = start + self.cfg.time_limit
        try:
            self._hold(1)
            self.explore(APO.empty(self.root), ChbMap(), 0)
        except LimitExceeded:
            self.report.status = "limit"
        self.report.time_s = time.perf_counter() - start
        return self.report

    def _hold(self, k: int):
        self._live += k
        self.report.peak_live = max(self.report.peak_live, self._live)

    def _check_limits(self):
        cap = self.cfg.max_traces
        if cap is not None and self.report.realized >= cap:
            raise LimitExceeded(f"more than {cap} realized traces")
        if self._deadline is not None and time.perf_counter() > self._deadline:
            raise LimitExceeded("time limit")

    def explore(self, P: APO, C: ChbMap, depth: int):
        rep = self.report
        self._check_limits()
        rep.nodes += 1
        rep.max_depth = max(rep.max_depth, depth)
        realized = realize(P)
        state = replay(self.p, realized)
        t, state = wextend(self.p, realized, state)
        rep.realized += 1
        rep.states |= state_records(self.p, t)
        rep.violations |= violation_records(self.p, state)
        if self.cfg.keep_traces:
            rep.traces.append(realized)
        if not enabled_events(self.p, state):
            rep.maximal += 1
            if self.cfg.keep_traces:
                rep.maximal_traces.append(t)
        reads = self.order_reads(pending_reads(self.p, state), state)
        if not reads:
            return
        new = t[len(realized):]
        for Q in extend(P, new, prune=self.cfg.prune):
            self._hold(1)
            CQ = C.copy()
            for rd in reads:
                self.process_read(Q, t, CQ, rd, depth)
                self.advance_frontier(CQ, t, rd)
            self._hold(-1)

    def order_reads(self, reads: List[PendingRead], state) -> List[PendingRead]:
        root_first = sorted(reads, key=lambda r: (r.tid != self.root, r.tid))
        if not self.cfg.read_priority:
            return root_first
        pcs = {tid: ts.pc for tid, ts in enumerate(state.threads)}
        return sorted(root_first, key=lambda r: not self.p.writes_after(r.tid, pcs[r.tid]))

    def choices(self, Q: APO, t, C: ChbMap, rd: PendingRead):
        """(side, value, good writes) triples for a pending read."""
        cands = candidate_writes(t, C, rd)
        if rd.lock:
            used = set()
            for a in Q.events:
                if a.is_read and a.var == rd.var:
                    used |= Q.good.get(a, frozenset())
            cands = [w for w in cands if w not in used]
        if rd.tid == self.root:
            groups = [(1, [w for w in cands if w.tid == self.root]), (2, [w for w in cands if w.tid != self.root])]
        else:
            groups = [(None, cands)]
        out = []
        for side, ws in groups:
            for v in sorted({w.value for w in ws}):
                out.append((side, v, frozenset(w for w in ws if w.value == v)))
        return out

    def process_read(self, Q: APO, t, C: ChbMap, rd: PendingRead, depth: int):
        """One read's extensions: the root case of the algorithm when rd is
        on the root thread, the leaf case otherwise."""
        for side, v, good in self.choices(Q, t, C, rd):
            ev = Event(rd.tid, rd.index, READ, rd.var, v)
            for K in extend_one(Q, ev, side, good, self.cfg.prune):
                self.report.extensions += 1
                self._hold(1)
                self.explore(K, C.copy(), depth + 1)
                self._hold(-1)

    def extend_root(self, Q: APO, t, C: ChbMap, rd: PendingRead, depth: int = 0):
        assert rd.tid == self.root
        self.process_read(Q, t, C, rd, depth)

    def extend_leaf(self, Q: APO, t, C: ChbMap, rd: PendingRead, depth: int = 0):
        assert rd.tid != self.root
        self.process_read(Q, t, C, rd, depth)

    @staticmethod
    def advance_frontier(C: ChbMap, t, rd: PendingRead):
        """Every write of t has now been tried for rd: exclude them from
        later siblings."""
        last: Dict[int, Event] = {}
        for e in t:
            last[e.tid] = e
        gs = guards(t)
        for tid, e in last.items():
            g = gs[e]
            C.set(rd.id, tid, None if g is None else g.index)


def vcdpor_run(p: Program, cfg: Optional[ExplorerConfig] = None, **kw) -> ExplorationReport:
    if cfg is None:
        cfg = ExplorerConfig(**kw)
    return Explorer(p, cfg).run()
