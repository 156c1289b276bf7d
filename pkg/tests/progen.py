"""Random programs with branches, locks, joins and nested spawns."""

import random

VARS = ("x", "y")


def _stmt(rng, regs, depth, lock):
    k = rng.random()
    if k < 0.35:
        reg = f"r{len(regs)}"
        regs.append(reg)
        return [f"{reg} = read {rng.choice(VARS)}"]
    if k < 0.7 or not regs:
        val = rng.randint(0, 2)
        if regs and rng.random() < 0.4:
            return [f"write {rng.choice(VARS)} {rng.choice(regs)} + {val}"]
        return [f"write {rng.choice(VARS)} {val}"]
    if k < 0.85 and depth < 1:
        reg = rng.choice(regs)
        then = _stmt(rng, regs, depth + 1, lock)
        other = _stmt(rng, regs, depth + 1, lock)
        return [f"if {reg} == {rng.randint(0, 2)} {{"] + then + ["} else {"] + other + ["}"]
    if k < 0.93:
        return [f"assert {rng.choice(regs)} != {rng.randint(0, 2)}"]
    if lock:
        return ["lock m", f"write {rng.choice(VARS)} {rng.randint(0, 2)}", "unlock m"]
    return [f"write {rng.choice(VARS)} 1"]


def random_program(rng: random.Random, threads: int = 3, stmts: int = 3, locks: bool = True) -> str:
    names = [f"t{i}" for i in range(threads)]
    lines = ["var x", "var y = 1"]
    body = {n: [] for n in ["main"] + names}
    # spawn tree: each worker is spawned by main or an earlier worker
    for i, n in enumerate(names):
        parent = "main" if i == 0 or rng.random() < 0.6 else names[rng.randrange(i)]
        body[parent].append(f"spawn {n}")
    for n in names:
        regs = []
        for _ in range(rng.randint(1, stmts)):
            body[n].extend(_stmt(rng, regs, 0, locks))
    if rng.random() < 0.5:
        target = rng.choice([n for n in names if f"spawn {n}" in body["main"]])
        body["main"].append(f"join {target}")
        body["main"].append("z = read x")
    for n in ["main"] + names:
        lines.append(f"thread {n} {{")
        lines.extend("  " + s for s in body[n])
        lines.append("}")
    return "\n".join(lines) + "\n"
