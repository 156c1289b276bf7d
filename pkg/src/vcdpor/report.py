"""Running engines and rendering their results."""

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .analysis import EQUIVALENCES
from .dsl import Program
from .explorer import ExplorerConfig, resolve_root, vcdpor_run
from .oracle import LimitExceeded, class_report, enumerate_maximal, reachable_states


def states_digest(states, violations) -> str:
    """Order-independent digest of a reachable-state set."""
    lines = sorted(json.dumps(list(s)) for s in states)
    lines += sorted("!" + json.dumps(list(v)) for v in violations)
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


@dataclass
class RunResult:
    benchmark: str
    algo: str
    root: str
    realized: int = 0
    maximal: int = 0
    classes: Dict[str, int] = field(default_factory=dict)
    states: set = field(default_factory=set)
    violations: set = field(default_factory=set)
    time_ms: Optional[float] = None
    status: str = "done"
    traces: List = field(default_factory=list)

    def as_json(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "algo": self.algo,
            "root": self.root,
            "realized_traces": self.realized,
            "maximal_traces": self.maximal,
            "classes": dict(self.classes),
            "states_digest": states_digest(self.states, self.violations),
            "assert_violations": [
                {"thread": t, "event": e, "line": l} for t, e, l in sorted(self.violations)
            ],
            "time_ms": self.time_ms,
            "status": self.status,
        }

    def table(self) -> str:
        d = self.as_json()
        rows = []
        for k, v in d.items():
            if k == "classes":
                v = ", ".join(f"{a}={b}" for a, b in v.items()) or "-"
            elif k == "assert_violations":
                v = "; ".join(f"{x['thread']}@{x['event']} line {x['line']}" for x in v) or "none"
            rows.append(f"{k:18} {v}")
        return "\n".join(rows)


def run_engine(
    p: Program,
    algo: str = "vcdpor",
    root=None,
    classes: Sequence[str] = (),
    max_traces: Optional[int] = None,
    time_limit: Optional[float] = None,
    prune: bool = False,
    read_priority: bool = False,
    keep_traces: bool = False,
    timing: bool = True,
) -> RunResult:
    rid = resolve_root(p, root)
    res = RunResult(p.name, algo, p.thread_names[rid])
    start = time.perf_counter()
    oracle_traces = None
    if algo == "vcdpor":
        cfg = ExplorerConfig(rid, prune, read_priority, max_traces, time_limit, keep_traces)
        rep = vcdpor_run(p, cfg)
        res.realized = rep.realized
        res.maximal = rep.maximal
        res.states = rep.states
        res.violations = rep.violations
        res.status = rep.status
        res.traces = rep.traces
    elif algo == "oracle":
        try:
            oracle_traces = enumerate_maximal(p, max_traces)
        except LimitExceeded:
            res.status = "limit"
        else:
            res.realized = res.maximal = len(oracle_traces)
            res.states, res.violations = reachable_states(p, oracle_traces)
            res.traces = oracle_traces if keep_traces else []
    else:
        raise ValueError(f"unknown algorithm {algo!r}")
    if classes and res.status == "done":
        try:
            if oracle_traces is None:
                oracle_traces = enumerate_maximal(p, max_traces)
            res.classes = class_report(p, oracle_traces, rid, kinds=[k for k in EQUIVALENCES if k in classes])
        except LimitExceeded:
            res.status = "limit"
    if timing:
        res.time_ms = round((time.perf_counter() - start) * 1000, 3)
    return res


@dataclass
class Comparison:
    benchmark: str
    oracle: RunResult
    vcdpor: RunResult
    problems: List[str] = field(default_factory=list)

    @property
    def status(self) -> str:
        if self.oracle.status != "done" or self.vcdpor.status != "done":
            return "limit"
        return "diff" if self.problems else "pass"


def compare(p: Program, root=None, prune=False, read_priority=False, max_traces=None, time_limit=None,
            timing=True) -> Comparison:
    orc = run_engine(p, "oracle", root, EQUIVALENCES, max_traces, time_limit, timing=timing)
    vc = run_engine(p, "vcdpor", root, (), None, time_limit, prune, read_priority, timing=timing)
    cmp = Comparison(p.name, orc, vc)
    if orc.status != "done" or vc.status != "done":
        return cmp
    missing = orc.states - vc.states
    extra = vc.states - orc.states
    if missing:
        cmp.problems.append(f"{len(missing)} states missed by vcdpor, e.g. {sorted(missing)[0]}")
    if extra:
        cmp.problems.append(f"{len(extra)} states not reachable by the oracle, e.g. {sorted(extra)[0]}")
    if orc.violations != vc.violations:
        cmp.problems.append(
            f"assert violations differ: oracle {sorted(orc.violations)} vcdpor {sorted(vc.violations)}"
        )
    if vc.maximal > orc.classes.get("vhb", 0):
        cmp.problems.append(f"vcdpor maximal traces {vc.maximal} exceed vhb classes {orc.classes['vhb']}")
    return cmp
