"""A small deterministic shared-memory language.

Source files (`.vp`) declare globals and threads::

    var x = 1
    thread main { spawn a  spawn b }
    thread a { r = read x  write x r + 1 }
    thread b { lock m  write x 2  unlock m }

Every visible event of a thread is a function of the values it has read.
"""

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .events import JOIN, READ, SPAWN, WRITE, Event, Trace

KEYWORDS = {
    "var", "thread", "write", "read", "if", "else", "repeat", "spawn", "join",
    "lock", "unlock", "assert", "while", "for", "true", "false",
}


class ProgramError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.msg = msg
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + msg)


class ParseError(ProgramError):
    pass


class NotEnabled(ProgramError):
    pass


class InvalidTrace(ProgramError):
    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        ProgramError.__init__(self, f"invalid trace at event {index}: {reason}")


# tokenizer

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<comment>#[^\n]*)|(?P<nl>\n|;)"
    r"|(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>==|!=|<=|>=|&&|\|\||[-+*%(){}<>=!])"
)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            toks.append(Tok("nl", m.group(), line, col))
            if m.group() == "\n":
                line += 1
                line_start = m.end()
        elif kind == "name":
            word = m.group()
            toks.append(Tok("kw" if word in KEYWORDS else "name", word, line, col))
        elif kind in ("num", "op"):
            toks.append(Tok(kind, m.group(), line, col))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - line_start + 1))
    return toks


# syntax tree. Expressions and conditions are nested tuples:
#   ("num", n) ("reg", name) ("bin", op, a, b) ("neg", a)
#   ("cmp", op, a, b) ("and", a, b) ("or", a, b) ("not", a) ("const", bool)


@dataclass
class Stmt:
    op: str
    line: int
    args: tuple = ()
    body: List["Stmt"] = field(default_factory=list)
    orelse: List["Stmt"] = field(default_factory=list)


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    def peek(self) -> Tok:
        return self.toks[self.i]

    def next(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: Optional[Tok] = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col)

    def skip_nl(self):
        while self.peek().kind == "nl":
            self.i += 1

    def expect(self, kind: str, text: Optional[str] = None) -> Tok:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            self.error(f"expected {want!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def name(self) -> Tok:
        t = self.peek()
        if t.kind == "kw":
            self.error(f"reserved word {t.text!r} used as a name")
        return self.expect("name")

    def parse(self) -> "Program":
        globals_: Dict[str, int] = {}
        threads: Dict[str, List[Stmt]] = {}
        lines: Dict[str, int] = {}
        self.skip_nl()
        while self.peek().text == "var":
            tok = self.next()
            name = self.name()
            if name.text in globals_:
                self.error(f"duplicate variable {name.text!r}", name)
            value = 0
            if self.peek().text == "=":
                self.next()
                neg = False
                if self.peek().text == "-":
                    self.next()
                    neg = True
                value = int(self.expect("num").text) * (-1 if neg else 1)
            globals_[name.text] = value
            self.end_stmt()
            self.skip_nl()
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.text == "var":
                self.error("variables must be declared before the first thread")
            self.expect("kw", "thread")
            name = self.name()
            if name.text in threads:
                self.error(f"duplicate thread {name.text!r}", name)
            threads[name.text] = self.block()
            lines[name.text] = tok.line
            self.skip_nl()
        if not threads:
            self.error("program declares no threads")
        return build_program(globals_, threads, lines)

    def end_stmt(self):
        t = self.peek()
        if t.kind == "nl":
            self.next()
        elif t.kind not in ("eof",) and t.text != "}":
            self.error(f"unexpected {t.text!r}")

    def block(self) -> List[Stmt]:
        self.expect("op", "{")
        stmts = []
        self.skip_nl()
        while self.peek().text != "}":
            if self.peek().kind == "eof":
                self.error("unterminated block")
            stmts.append(self.stmt())
            self.skip_nl()
        self.next()
        return stmts

    def stmt(self) -> Stmt:
        t = self.peek()
        line = t.line
        if t.kind == "kw":
            word = t.text
            self.next()
            if word == "write":
                var = self.name().text
                return Stmt("write", line, (var, self.expr()))
            if word in ("spawn", "join", "lock", "unlock"):
                return Stmt(word, line, (self.name().text,))
            if word == "assert":
                return Stmt("assert", line, (self.cond(),))
            if word == "if":
                cond = self.cond()
                body = self.block()
                orelse: List[Stmt] = []
                save = self.i
                self.skip_nl()
                if self.peek().text == "else":
                    self.next()
                    if self.peek().text == "if":
                        orelse = [self.stmt()]
                    else:
                        orelse = self.block()
                else:
                    self.i = save
                return Stmt("if", line, (cond,), body, orelse)
            if word == "repeat":
                n = int(self.expect("num").text)
                return Stmt("repeat", line, (n,), self.block())
            if word in ("while", "for"):
                self.error("unbounded loop", t)
            self.error(f"unexpected {word!r}", t)
        if t.kind == "name":
            reg = self.next().text
            self.expect("op", "=")
            if self.peek().text == "read":
                self.next()
                return Stmt("read", line, (reg, self.name().text))
            return Stmt("assign", line, (reg, self.expr()))
        self.error(f"unexpected {t.text or 'end of input'!r}")

    # expressions

    def expr(self):
        left = self.term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            left = ("bin", op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek().text in ("*", "%"):
            op = self.next().text
            left = ("bin", op, left, self.unary())
        return left

    def unary(self):
        t = self.peek()
        if t.text == "-":
            self.next()
            return ("neg", self.unary())
        if t.kind == "num":
            self.next()
            return ("num", int(t.text))
        if t.kind == "name":
            self.next()
            return ("reg", t.text)
        if t.text == "(":
            self.next()
            e = self.expr()
            self.expect("op", ")")
            return e
        self.error(f"expected an expression, found {t.text or 'end of input'!r}")

    def cond(self):
        left = self.conj()
        while self.peek().text == "||":
            self.next()
            left = ("or", left, self.conj())
        return left

    def conj(self):
        left = self.atom()
        while self.peek().text == "&&":
            self.next()
            left = ("and", left, self.atom())
        return left

    def atom(self):
        t = self.peek()
        if t.text == "!":
            self.next()
            return ("not", self.atom())
        if t.text in ("true", "false"):
            self.next()
            return ("const", t.text == "true")
        if t.text == "(":
            # parenthesised condition or expression
            save = self.i
            self.next()
            try:
                c = self.cond()
                self.expect("op", ")")
                if self.peek().text not in ("==", "!=", "<", "<=", ">", ">=", "+", "-", "*", "%"):
                    return c
            except ParseError:
                pass
            self.i = save
        left = self.expr()
        op = self.peek()
        if op.text not in ("==", "!=", "<", "<=", ">", ">="):
            self.error("expected a comparison", op)
        self.next()
        return ("cmp", op.text, left, self.expr())


def evaluate(e, regs: Dict[str, int]):
    tag = e[0]
    if tag == "num":
        return e[1]
    if tag == "reg":
        return regs.get(e[1], 0)
    if tag == "bin":
        a = evaluate(e[2], regs)
        b = evaluate(e[3], regs)
        op = e[1]
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if b == 0:
            raise ProgramError("modulo by zero")
        return a % b
    if tag == "neg":
        return -evaluate(e[1], regs)
    if tag == "cmp":
        a = evaluate(e[2], regs)
        b = evaluate(e[3], regs)
        return {
            "==": a == b, "!=": a != b, "<": a < b,
            "<=": a <= b, ">": a > b, ">=": a >= b,
        }[e[1]]
    if tag == "and":
        return evaluate(e[1], regs) and evaluate(e[2], regs)
    if tag == "or":
        return evaluate(e[1], regs) or evaluate(e[2], regs)
    if tag == "not":
        return not evaluate(e[1], regs)
    if tag == "const":
        return e[1]
    raise ValueError(f"bad expression {e!r}")


# compiled form


VISIBLE = ("write", "read", "spawn", "join", "lock", "unlock")


@dataclass(frozen=True)
class Instr:
    op: str  # write read assign branch jump spawn join lock unlock assert
    line: int
    a: object = None
    b: object = None


@dataclass
class Program:
    globals: Dict[str, int]
    thread_names: List[str]
    code: List[List[Instr]]
    entry: int = 0
    mutexes: frozenset = frozenset()
    source_lines: Dict[str, int] = field(default_factory=dict)
    name: str = ""

    def tid(self, name: str) -> int:
        try:
            return self.thread_names.index(name)
        except ValueError:
            raise ProgramError(f"unknown thread {name!r}")

    @property
    def threads(self) -> List[str]:
        return list(self.thread_names)

    def default_root(self) -> int:
        """First thread spawned by the entry thread, or the entry thread itself."""
        for ins in self.code[self.entry]:
            if ins.op == "spawn":
                return ins.a
        return self.entry

    def writes_after(self, tid: int, pc: int) -> bool:
        """Whether some write or unlock is reachable after the instruction at pc."""
        code = self.code[tid]
        seen = set()
        todo = [pc + 1]
        while todo:
            i = todo.pop()
            if i in seen or i >= len(code):
                continue
            seen.add(i)
            ins = code[i]
            if ins.op in ("write", "unlock"):
                return True
            if ins.op == "jump":
                todo.append(ins.a)
            elif ins.op == "branch":
                todo.extend((i + 1, ins.b))
            else:
                todo.append(i + 1)
        return False


class _Compiler:
    def __init__(self, names: List[str]):
        self.names = names
        self.loops = 0

    def compile(self, stmts: List[Stmt]) -> List[Instr]:
        out: List[Instr] = []
        self._emit(stmts, out)
        return out

    def _emit(self, stmts: List[Stmt], out: List[Instr]):
        for s in stmts:
            op = s.op
            if op == "write":
                out.append(Instr("write", s.line, s.args[0], s.args[1]))
            elif op == "read":
                out.append(Instr("read", s.line, s.args[0], s.args[1]))
            elif op == "assign":
                out.append(Instr("assign", s.line, s.args[0], s.args[1]))
            elif op in ("spawn", "join"):
                out.append(Instr(op, s.line, self.names.index(s.args[0])))
            elif op in ("lock", "unlock"):
                out.append(Instr(op, s.line, s.args[0]))
            elif op == "assert":
                out.append(Instr("assert", s.line, s.args[0]))
            elif op == "if":
                branch = len(out)
                out.append(None)
                self._emit(s.body, out)
                if s.orelse:
                    jump = len(out)
                    out.append(None)
                    out[branch] = Instr("branch", s.line, s.args[0], len(out))
                    self._emit(s.orelse, out)
                    out[jump] = Instr("jump", s.line, len(out))
                else:
                    out[branch] = Instr("branch", s.line, s.args[0], len(out))
            elif op == "repeat":
                reg = f"$loop{self.loops}"
                self.loops += 1
                out.append(Instr("assign", s.line, reg, ("num", 0)))
                head = len(out)
                out.append(None)
                self._emit(s.body, out)
                out.append(Instr("assign", s.line, reg, ("bin", "+", ("reg", reg), ("num", 1))))
                out.append(Instr("jump", s.line, head))
                cond = ("cmp", "<", ("reg", reg), ("num", s.args[0]))
                out[head] = Instr("branch", s.line, cond, len(out))


def _walk(stmts: List[Stmt]):
    for s in stmts:
        yield s
        yield from _walk(s.body)
        yield from _walk(s.orelse)


def build_program(globals_: Dict[str, int], threads: Dict[str, List[Stmt]], lines: Dict[str, int]) -> Program:
    names = list(threads)
    if "main" in threads:
        names.remove("main")
        names.insert(0, "main")
    mutexes = set()
    spawned: Dict[str, int] = {}
    for tname, body in threads.items():
        for s in _walk(body):
            if s.op in ("spawn", "join"):
                target = s.args[0]
                if target not in threads:
                    raise ParseError(f"{s.op} of unknown thread {target!r}", s.line)
                if target == names[0]:
                    raise ParseError(f"cannot {s.op} the entry thread {target!r}", s.line)
                if s.op == "spawn":
                    spawned[target] = spawned.get(target, 0) + 1
                    if spawned[target] > 1:
                        raise ParseError(f"thread {target!r} spawned more than once", s.line)
            elif s.op in ("lock", "unlock"):
                mutexes.add(s.args[0])
    for tname, body in threads.items():
        for s in _walk(body):
            if s.op in ("read", "write"):
                var = s.args[1] if s.op == "read" else s.args[0]
                if var in mutexes:
                    raise ParseError(f"mutex {var!r} accessed by {s.op}", s.line)
                if var not in globals_:
                    raise ParseError(f"undeclared variable {var!r}", s.line)
        for s in _walk(body):
            if s.op == "repeat":
                for inner in _walk(s.body):
                    if inner.op == "spawn":
                        raise ParseError("spawn inside repeat", inner.line)
    all_globals = dict(globals_)
    for m in sorted(mutexes):
        all_globals.setdefault(m, 0)
    comp = _Compiler(names)
    code = []
    for tname in names:
        code.append(comp.compile(threads[tname]))
    # implicit initial writes, owned by the entry thread, before anything else
    init = [Instr("write", 0, var, ("num", val)) for var, val in all_globals.items()]
    code[0] = init + _shift(code[0], len(init))
    return Program(all_globals, names, code, 0, frozenset(mutexes), lines)


def _shift(code: List[Instr], k: int) -> List[Instr]:
    out = []
    for ins in code:
        if ins.op == "branch":
            ins = Instr("branch", ins.line, ins.a, ins.b + k)
        elif ins.op == "jump":
            ins = Instr("jump", ins.line, ins.a + k)
        out.append(ins)
    return out


def parse_program(text: str, name: str = "") -> Program:
    p = Parser(text).parse()
    p.name = name
    return p


def load_program(path) -> Program:
    import os

    with open(path, encoding="utf-8") as f:
        text = f.read()
    return parse_program(text, os.path.splitext(os.path.basename(str(path)))[0])


# execution

NOT_STARTED = "not-started"
RUNNING = "running"
FINISHED = "finished"


@dataclass
class ThreadState:
    pc: int = 0
    regs: Dict[str, int] = field(default_factory=dict)
    count: int = 0
    started: bool = False

    def copy(self) -> "ThreadState":
        return ThreadState(self.pc, dict(self.regs), self.count, self.started)


@dataclass
class ExecState:
    globals: Dict[str, int]
    threads: List[ThreadState]
    held: Dict[str, int] = field(default_factory=dict)
    violations: List[Tuple[int, int, int]] = field(default_factory=list)

    def copy(self) -> "ExecState":
        return ExecState(
            dict(self.globals), [t.copy() for t in self.threads], dict(self.held), list(self.violations)
        )

    def status(self, p: Program, tid: int) -> str:
        ts = self.threads[tid]
        if not ts.started:
            return NOT_STARTED
        code = p.code[tid]
        if ts.pc >= len(code):
            return FINISHED
        ins = code[ts.pc]
        if ins.op == "join" and not self._finished(p, ins.a):
            return "blocked-on-join"
        if ins.op == "lock" and ins.a in self.held:
            return "blocked-on-lock"
        return RUNNING

    def _finished(self, p: Program, tid: int) -> bool:
        ts = self.threads[tid]
        return ts.started and ts.pc >= len(p.code[tid])


def release_value(tid: int, index: int) -> int:
    """Value written by a release: a unique encoding of the event id."""
    return (tid << 20) | index


def _run_invisible(p: Program, s: ExecState, tid: int):
    ts = s.threads[tid]
    code = p.code[tid]
    while ts.pc < len(code):
        ins = code[ts.pc]
        if ins.op in VISIBLE:
            return
        if ins.op == "assign":
            ts.regs[ins.a] = evaluate(ins.b, ts.regs)
            ts.pc += 1
        elif ins.op == "branch":
            ts.pc = ts.pc + 1 if evaluate(ins.a, ts.regs) else ins.b
        elif ins.op == "jump":
            ts.pc = ins.a
        elif ins.op == "assert":
            if not evaluate(ins.a, ts.regs):
                s.violations.append((tid, ts.count, ins.line))
            ts.pc += 1
        else:
            raise ValueError(ins.op)


def initial_state(p: Program) -> ExecState:
    s = ExecState({}, [ThreadState() for _ in p.thread_names])
    # globals hold their declared value until the initial writes run
    s.globals = dict(p.globals)
    s.threads[p.entry].started = True
    _run_invisible(p, s, p.entry)
    return s


@dataclass(frozen=True)
class Descriptor:
    kind: str
    var: Optional[str]
    value: Optional[int]
    instr: str

    def event(self, tid: int, index: int) -> Event:
        return Event(tid, index, self.kind, self.var, 0 if self.value is None else self.value)


def next_descriptor(p: Program, s: ExecState, tid: int) -> Optional[Descriptor]:
    """The thread's next visible instruction, ignoring blocking."""
    ts = s.threads[tid]
    if not ts.started or ts.pc >= len(p.code[tid]):
        return None
    ins = p.code[tid][ts.pc]
    if ins.op == "write":
        return Descriptor(WRITE, ins.a, evaluate(ins.b, ts.regs), "write")
    if ins.op == "read":
        return Descriptor(READ, ins.b, s.globals[ins.b], "read")
    if ins.op == "lock":
        return Descriptor(READ, ins.a, s.globals[ins.a], "lock")
    if ins.op == "unlock":
        return Descriptor(WRITE, ins.a, release_value(tid, ts.count + 1), "unlock")
    if ins.op == "spawn":
        return Descriptor(SPAWN, p.thread_names[ins.a], ins.a, "spawn")
    if ins.op == "join":
        return Descriptor(JOIN, p.thread_names[ins.a], ins.a, "join")
    raise ValueError(ins.op)


def enabled_events(p: Program, s: ExecState) -> Dict[int, Event]:
    out = {}
    for tid in range(len(p.thread_names)):
        if s.status(p, tid) != RUNNING:
            continue
        d = next_descriptor(p, s, tid)
        out[tid] = d.event(tid, s.threads[tid].count + 1)
    return out


def step(p: Program, s: ExecState, tid: int, inplace: bool = False) -> Tuple[ExecState, Event]:
    if tid < 0 or tid >= len(p.thread_names) or s.status(p, tid) != RUNNING:
        raise NotEnabled(f"thread {tid} is not enabled")
    if not inplace:
        s = s.copy()
    ts = s.threads[tid]
    ins = p.code[tid][ts.pc]
    d = next_descriptor(p, s, tid)
    ts.count += 1
    ev = d.event(tid, ts.count)
    if ins.op == "write":
        s.globals[ins.a] = d.value
    elif ins.op == "read":
        ts.regs[ins.a] = d.value
    elif ins.op == "lock":
        s.held[ins.a] = tid
    elif ins.op == "unlock":
        if s.held.get(ins.a) != tid:
            s.violations.append((tid, ts.count, ins.line))
        s.held.pop(ins.a, None)
        s.globals[ins.a] = d.value
    elif ins.op == "spawn":
        child = s.threads[ins.a]
        if child.started:
            raise ProgramError(f"thread {p.thread_names[ins.a]!r} spawned twice")
        child.started = True
        _run_invisible(p, s, ins.a)
    ts.pc += 1
    _run_invisible(p, s, tid)
    return s, ev


def matches(e: Event, expected: Event) -> bool:
    return e == expected


def replay(p: Program, t, start: Optional[ExecState] = None) -> ExecState:
    """Replay a trace; raises InvalidTrace with the first offending index."""
    s = initial_state(p) if start is None else start.copy()
    for i, e in enumerate(t):
        if not (0 <= e.tid < len(p.thread_names)):
            raise InvalidTrace(i, f"unknown thread {e.tid}")
        if s.status(p, e.tid) != RUNNING:
            raise InvalidTrace(i, f"{e} not enabled ({s.status(p, e.tid)})")
        want = next_descriptor(p, s, e.tid).event(e.tid, s.threads[e.tid].count + 1)
        if want != e:
            raise InvalidTrace(i, f"expected {want}, got {e}")
        step(p, s, e.tid, inplace=True)
    return s


def run_to_end(p: Program, schedule=None) -> Trace:
    """One maximal trace following `schedule` (thread ids), then the
    lowest-ranked enabled thread each step."""
    s = initial_state(p)
    out = []
    sched = list(schedule or [])
    while True:
        en = enabled_events(p, s)
        if not en:
            return Trace(out, p.name)
        tid = sched.pop(0) if sched else min(en)
        s, e = step(p, s, tid, inplace=True)
        out.append(e)


def local_run(p: Program, tid: int, read_values: Dict[int, int], limit: int) -> List[Event]:
    """First `limit` events of a thread run in isolation.

    Reads take their values from `read_values` (keyed by event index);
    spawn, join and lock never block.
    """
    s = ExecState(dict(p.globals), [ThreadState() for _ in p.thread_names])
    ts = s.threads[tid]
    ts.started = True
    _run_invisible(p, s, tid)
    out = []
    code = p.code[tid]
    while len(out) < limit and ts.pc < len(code):
        ins = code[ts.pc]
        idx = ts.count + 1
        if ins.op in ("read", "lock"):
            var = ins.b if ins.op == "read" else ins.a
            if idx not in read_values:
                break
            s.globals[var] = read_values[idx]
        s.held.clear()
        d = next_descriptor(p, s, tid)
        if ins.op == "spawn":
            # do not start the child; only the local run matters
            ts.count += 1
            out.append(d.event(tid, ts.count))
            ts.pc += 1
            _run_invisible(p, s, tid)
            continue
        if ins.op == "join":
            ts.count += 1
            out.append(d.event(tid, ts.count))
            ts.pc += 1
            _run_invisible(p, s, tid)
            continue
        if ins.op == "unlock":
            s.held[ins.a] = tid
        _, ev = step(p, s, tid, inplace=True)
        out.append(ev)
    return out
