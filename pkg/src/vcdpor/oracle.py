"""Brute-force ground truth by exhaustive interleaving."""

import random
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .analysis import EQUIVALENCES, analyze, partition
from .apo import APO
from .dsl import Program, enabled_events, initial_state, replay, step
from .events import READ, SPAWN, JOIN, WRITE, CycleError, Event, PartialOrder, Trace, po_from_thread_order


class LimitExceeded(Exception):
    """An exhaustive search went over its configured limit."""


def scheduling_choices(p: Program, s) -> List[int]:
    """Threads to branch on.

    Spawn and join commute with every other event, so an enabled one is
    taken immediately (lowest thread rank first) without branching.
    """
    en = enabled_events(p, s)
    sync = [tid for tid, e in en.items() if e.kind in (SPAWN, JOIN)]
    if sync:
        return [min(sync)]
    return sorted(en)


def enumerate_maximal(p: Program, limit: Optional[int] = 100000) -> List[Trace]:
    out: List[Trace] = []
    stack = [(initial_state(p), ())]
    while stack:
        s, prefix = stack.pop()
        choices = scheduling_choices(p, s)
        if not choices:
            out.append(Trace(prefix, p.name))
            if limit is not None and len(out) > limit:
                raise LimitExceeded(f"more than {limit} maximal traces")
            continue
        # push in reverse so the lowest thread is explored first
        for tid in reversed(choices):
            s2, e = step(p, s, tid)
            stack.append((s2, prefix + (e,)))
    return out


def state_records(p: Program, events: Sequence[Event]) -> Set[Tuple]:
    """Local-state records of a trace: one per event, naming thread and value."""
    return {(p.thread_names[e.tid], e.index, e.kind, e.var, e.value) for e in events}


def violation_records(p: Program, s) -> Set[Tuple]:
    return {(p.thread_names[tid], count, line) for tid, count, line in s.violations}


def reachable_states(p: Program, traces) -> Tuple[Set[Tuple], Set[Tuple]]:
    states: Set[Tuple] = set()
    violations: Set[Tuple] = set()
    for t in traces:
        s = replay(p, t)
        states |= state_records(p, t)
        violations |= violation_records(p, s)
    return states, violations


def class_report(p: Program, traces, root: Optional[int] = None, kinds=EQUIVALENCES) -> Dict[str, int]:
    if root is None:
        root = p.default_root()
    analyses = [analyze(p, t, root) for t in traces]
    return {k: len(partition(traces, k, analyses=analyses)) for k in kinds}


def linear_extensions(po: PartialOrder):
    n = len(po)
    elems = po.elements

    def rec(done, prefix):
        if len(prefix) == n:
            yield list(prefix)
            return
        for i in range(n):
            if not (done >> i) & 1 and po._pred[i] & ~done == 0:
                prefix.append(elems[i])
                yield from rec(done | (1 << i), prefix)
                prefix.pop()

    yield from rec(0, [])


def brute_force_realizable(apo: APO, max_events: int = 8) -> Optional[List[Event]]:
    """First linear extension in which every read observes a good write."""
    po = apo.order
    n = len(po)
    if n > max_events:
        raise LimitExceeded(f"{n} events exceeds {max_events}")
    elems = po.elements

    def rec(done, prefix, last):
        if len(prefix) == n:
            return list(prefix)
        for i in range(n):
            if (done >> i) & 1 or po._pred[i] & ~done:
                continue
            e = elems[i]
            nxt = last
            if e.is_read:
                w = last.get(e.var)
                if w is None or w not in apo.good.get(e, ()):
                    continue
            elif e.is_write:
                nxt = dict(last)
                nxt[e.var] = e
            prefix.append(e)
            got = rec(done | (1 << i), prefix, nxt)
            if got is not None:
                return got
            prefix.pop()
        return None

    return rec(0, [], {})


# random APOs for fuzzing

def random_program_text(rng: random.Random, threads: int = 3, max_events: int = 8, vars_=("x", "y")) -> str:
    """A branch-free program: main spawns every worker, workers read and write."""
    names = [f"t{i}" for i in range(threads)]
    per = [1] * threads
    for _ in range(rng.randint(threads, max_events) - threads):
        per[rng.randrange(threads)] += 1
    lines = [f"var {v}" for v in vars_]
    lines.append("thread main {")
    lines += [f"  spawn {n}" for n in names]
    lines.append("}")
    for n, k in zip(names, per):
        lines.append(f"thread {n} {{")
        for j in range(k):
            v = rng.choice(vars_)
            if rng.random() < 0.5:
                lines.append(f"  a{j} = read {v}")
            else:
                lines.append(f"  write {v} {rng.randint(0, 1)}")
        lines.append("}")
    return "\n".join(lines) + "\n"


def worker_prefix(p: Program) -> List[Event]:
    """Entry-thread events of a random program: initial writes and spawns."""
    s = initial_state(p)
    out = []
    while True:
        en = enabled_events(p, s)
        if p.entry not in en:
            return out
        s, e = step(p, s, p.entry)
        out.append(e)


def random_apo(
    rng: random.Random, p: Program, root: int = 1, extra_edges: float = 0.05, from_run: Optional[bool] = None
) -> APO:
    """A consistent APO over the worker events of a branch-free program.

    With from_run, values and orderings are taken from a random interleaving
    and every read keeps the write it observed there, so the APO is feasible
    unless some read has no worker write before it. Otherwise read values
    and leaf orderings are random, so many APOs are infeasible.
    """
    if from_run is None:
        from_run = rng.random() < 0.5
    threads = []
    for tid in range(1, len(p.thread_names)):
        seq = []
        for k, ins in enumerate(p.code[tid], 1):
            if ins.op == "write":
                seq.append(Event(tid, k, WRITE, ins.a, ins.b[1]))
            else:
                seq.append(Event(tid, k, READ, ins.b, 0))
        threads.append(seq)
    # a random interleaving, with read values fixed by it or drawn at random
    run: List[Event] = []
    last: Dict[str, Event] = {}
    seen: Dict[Event, Optional[Event]] = {}
    heads = [0] * len(threads)
    writes = [e for seq in threads for e in seq if e.is_write]
    while any(h < len(seq) for h, seq in zip(heads, threads)):
        live = [i for i, seq in enumerate(threads) if heads[i] < len(seq)]
        if from_run:
            # delay reads that would see no worker write
            ready = [i for i in live if not (threads[i][heads[i]].is_read and threads[i][heads[i]].var not in last)]
            live = ready or live
        i = rng.choice(live)
        e = threads[i][heads[i]]
        heads[i] += 1
        if e.is_read:
            if from_run:
                w = last.get(e.var)
                val = w.value if w is not None else 0
            else:
                w = None
                val = rng.choice(sorted({x.value for x in writes if x.var == e.var}) or [0])
            e = Event(e.tid, e.index, READ, e.var, val)
            seen[e] = w
        else:
            last[e.var] = e
        run.append(e)
    pos = {e: i for i, e in enumerate(run)}
    events = run
    po = po_from_thread_order(events)
    leaf = [e for e in events if e.tid != root]
    for i, a in enumerate(leaf):
        for b in leaf[i + 1:]:
            if a.conflicts(b) and po.unordered(a, b):
                if from_run or rng.random() < 0.5:
                    first, second = (a, b) if pos[a] < pos[b] else (b, a)
                else:
                    first, second = (b, a) if pos[a] < pos[b] else (a, b)
                try:
                    po = po.add_ordering(first, second)
                except CycleError:
                    po = po.add_ordering(second, first)
    for a in events:
        for b in events:
            if a != b and po.unordered(a, b) and rng.random() < extra_edges:
                if not from_run or pos[a] < pos[b]:
                    po = po.add_ordering(a, b)
    side: Dict[Event, int] = {}
    good: Dict[Event, frozenset] = {}
    for r in events:
        if not r.is_read:
            continue
        cands = [w for w in writes if w.var == r.var and w.value == r.value]
        obs = seen[r]
        if r.tid == root:
            if obs is not None:
                sides = [1 if obs.tid == root else 2]
            else:
                # prefer a side that has candidates
                sides = sorted({1 if w.tid == root else 2 for w in cands}) or [1, 2]
            side[r] = rng.choice(sides)
            cands = [w for w in cands if (w.tid == root) == (side[r] == 1)]
        g = {w for w in cands if rng.random() < 0.8}
        if obs is not None:
            g.add(obs)
        good[r] = frozenset(g)
    return APO(po, root, side, good)
