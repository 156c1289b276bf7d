import pytest

from vcdpor.dsl import (
    InvalidTrace,
    NotEnabled,
    ParseError,
    ProgramError,
    enabled_events,
    initial_state,
    load_program,
    parse_program,
    replay,
    run_to_end,
    step,
)
from vcdpor.events import JOIN, READ, SPAWN, WRITE, Event

RACE = """
var x
thread main {
  spawn p1
  spawn p2
}
thread p1 {
  write x 1
}
thread p2 {
  write x 2
  write x 1
  r = read x
}
"""


@pytest.fixture
def race():
    return parse_program(RACE, "race")


def test_thread_ranks_follow_declaration(race):
    assert race.thread_names == ["main", "p1", "p2"]
    assert race.tid("p2") == 2
    assert race.default_root() == 1


def test_initial_state_only_main_enabled(race):
    en = enabled_events(race, initial_state(race))
    assert en == {0: Event(0, 1, WRITE, "x", 0)}


def test_enabled_after_spawns(race):
    s = initial_state(race)
    for _ in range(3):
        s, _ = step(race, s, 0)
    en = enabled_events(race, s)
    assert en == {1: Event(1, 1, WRITE, "x", 1), 2: Event(2, 1, WRITE, "x", 2)}
    assert s.status(race, 0) == "finished"
    assert s.status(race, 1) == "running"


def test_step_is_persistent_unless_inplace(race):
    s = initial_state(race)
    s2, e = step(race, s, 0)
    assert e == Event(0, 1, WRITE, "x", 0)
    assert s.threads[0].count == 0 and s2.threads[0].count == 1


def test_step_disabled_thread_raises(race):
    with pytest.raises(NotEnabled):
        step(race, initial_state(race), 1)


def test_spawn_event_names_target(race):
    s, _ = step(race, initial_state(race), 0)
    _, e = step(race, s, 0)
    assert (e.kind, e.var, e.value) == (SPAWN, "p1", 1)


def test_read_value_from_store(race):
    t = run_to_end(race, [0, 0, 0, 2, 2, 1, 2])
    assert t[-1] == Event(2, 3, READ, "x", 1)
    assert list(t)[3:5] == [Event(2, 1, WRITE, "x", 2), Event(2, 2, WRITE, "x", 1)]


def test_replay_valid_trace(race):
    t = run_to_end(race)
    s = replay(race, t)
    assert enabled_events(race, s) == {}


def test_replay_rejects_wrong_first_event(race):
    with pytest.raises(InvalidTrace) as exc:
        replay(race, [Event(0, 2, SPAWN, "p1", 1)])
    assert exc.value.index == 0


def test_replay_rejects_wrong_value(race):
    t = list(run_to_end(race))
    t[-1] = Event(2, 3, READ, "x", 7)
    with pytest.raises(InvalidTrace) as exc:
        replay(race, t)
    assert exc.value.index == len(t) - 1


def test_replay_empty_trace_is_initial(race):
    s = replay(race, [])
    assert [ts.count for ts in s.threads] == [0, 0, 0]


def test_empty_main_has_no_events():
    p = parse_program("thread main { }\n")
    assert enabled_events(p, initial_state(p)) == {}


def test_run_is_deterministic(race):
    assert list(run_to_end(race)) == list(run_to_end(race))


@pytest.mark.parametrize(
    "src, msg, line, col",
    [
        ("var x\nthread main {\n  write y 1\n}\n", "undeclared variable 'y'", 3, 0),
        ("thread main {\n  while true { }\n}\n", "unbounded loop", 2, 3),
        ("var x\nthread main {\n  write x @\n}\n", "unexpected character '@'", 3, 11),
        ("var x\nthread main { spawn q }\n", "spawn of unknown thread 'q'", 2, 0),
        ("var x\nthread main {\n lock m\n write m 1\n}\n", "mutex 'm' accessed by write", 4, 0),
    ],
)
def test_parse_errors_carry_position(src, msg, line, col):
    with pytest.raises(ParseError) as exc:
        parse_program(src)
    assert msg in str(exc.value)
    assert (exc.value.line, exc.value.col) == (line, col)


def test_missing_file_is_program_error(tmp_path):
    with pytest.raises((ProgramError, OSError)):
        load_program(tmp_path / "missing.vp")


def test_join_blocks_until_target_finishes():
    p = parse_program("var x\nthread main {\n spawn a\n join a\n r = read x\n}\nthread a {\n write x 3\n}\n")
    s = initial_state(p)
    s, _ = step(p, s, 0)
    s, _ = step(p, s, 0)
    assert s.status(p, 0) == "blocked-on-join"
    assert set(enabled_events(p, s)) == {1}
    s, _ = step(p, s, 1)
    s, e = step(p, s, 0)
    assert (e.kind, e.value) == (JOIN, 1)
    _, r = step(p, s, 0)
    assert r.value == 3


def test_branching_and_registers():
    p = parse_program(
        "var x = 2\nthread main {\n a = read x\n if a % 2 == 0 {\n write x a * 3\n } else {\n write x 1\n }\n}\n"
    )
    t = run_to_end(p)
    assert t[-1] == Event(0, 3, WRITE, "x", 6)


def test_repeat_unrolls():
    p = parse_program("var x\nthread main {\n repeat 3 {\n  a = read x\n  write x a + 1\n }\n}\n")
    t = run_to_end(p)
    assert t[-1].value == 3
    assert len(t) == 7


def test_failed_assert_recorded():
    p = parse_program("var x\nthread main {\n a = read x\n assert a == 1\n}\n")
    s = replay(p, run_to_end(p))
    assert s.violations == [(0, 2, 4)]


def test_lock_blocks_second_acquirer():
    p = parse_program(
        "var c\nthread main {\n spawn a\n spawn b\n}\n"
        "thread a {\n lock m\n write c 1\n unlock m\n}\nthread b {\n lock m\n write c 2\n unlock m\n}\n"
    )
    s = initial_state(p)
    while 0 in enabled_events(p, s):
        s, _ = step(p, s, 0)
    s, acq = step(p, s, 1)
    assert acq.kind == READ and acq.var == "m"
    assert s.status(p, 2) == "blocked-on-lock"
    assert set(enabled_events(p, s)) == {1}
