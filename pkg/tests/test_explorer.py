import random
import re

import pytest

from threadport import explorer
from threadport.errors import BoundExceeded, InvalidSchedule
from threadport.explorer import (
    CLOCK,
    LOCK_PROPERTIES,
    LockModel,
    SemModel,
    count_schedules,
    count_states,
    explore,
    multinomial,
    replay,
    sem_properties,
    sem_workload,
)
from threadport.sem_sim import OpStatus, P, SemCore, V
from threadport.shortlock import LockMode
from threadport.turns import run_lock_schedule

PV = [[P()], [V()]]
LINE = re.compile(r"^step \d+ thread (\d+|clock) op \S+ -> [0-9a-f]{12}$")


def two_pv(initial):
    return SemModel([initial], [PV, PV])


def random_schedule(model, rng, max_len):
    state, out = model.initial(), []
    while len(out) < max_len:
        run = model.runnable(state)
        if not run:
            break
        t = rng.choice(run)
        out.append(t)
        state = model.step(state, t)
    return out


def test_binary_two_threads_mutual_exclusion_passes():
    m = two_pv(1)
    res = explore(m, 16, sem_properties(m))
    assert res.ok


def test_pinned_state_count_binary_two_pv():
    assert count_states(two_pv(1), 16) == 10


def test_trivial_state_counts():
    assert count_states(SemModel([0], [[]]), 16) == 1
    assert count_states(two_pv(1), 0) == 1


def test_schedule_count_equals_multinomial_when_nothing_blocks():
    assert count_schedules(two_pv(3), 16) == multinomial([2, 2]) == 6
    three = SemModel([3], [[[P()], [V()], [P()]], [[P()], [V()]], [[V()]]])
    assert count_schedules(three, 16) == multinomial([3, 2, 1]) == 60


def test_blocking_attempts_add_schedules_on_binary():
    # a failed attempt that parks a thread is itself a step
    assert count_schedules(two_pv(1), 16) == 4


@pytest.mark.parametrize("kind", explorer.SEM_WORKLOADS)
@pytest.mark.parametrize("nthreads", [1, 2, 3])
def test_standard_workloads_pass(kind, nthreads):
    m = sem_workload(kind, nthreads)
    assert explore(m, 16, sem_properties(m)).ok


def test_all_blocked_is_deadlock():
    res = explore(SemModel([0], [[[P()]]]), 4)
    assert not res.ok and res.property == "deadlock"


def test_legacy_witness_and_replay_determinism():
    m = LockModel(LockMode.LEGACY, 3)
    w = explore(m, 12, LOCK_PROPERTIES)
    assert not w.ok and w.property == "starvation"
    assert not w.final_state.core.held and w.final_state.core.queue
    again = replay(m, w.schedule)
    assert m.key(again.final_state) == m.key(w.final_state)
    assert again.protocol() == replay(m, w.schedule).protocol() == w.trace.protocol()
    assert all(LINE.match(line) for line in w.trace.protocol().splitlines())


@pytest.mark.parametrize("mode", [LockMode.FIXED, LockMode.FLAGLESS])
@pytest.mark.parametrize("rounds", [1, 2])
def test_fixed_modes_pass(mode, rounds):
    assert explore(LockModel(mode, 3, rounds), 12, LOCK_PROPERTIES).ok


def test_fixed_passes_with_four_threads_at_full_bound():
    assert explore(LockModel(LockMode.FIXED, 4), 16, LOCK_PROPERTIES).ok


def test_replay_edge_cases():
    m = LockModel(LockMode.FIXED, 2)
    empty = replay(m, [])
    assert empty.steps == [] and m.key(empty.final_state) == m.key(m.initial())
    with pytest.raises(InvalidSchedule):
        replay(m, [5])
    with pytest.raises(InvalidSchedule):
        replay(m, [CLOCK])  # nothing armed, time cannot pass


def test_bounds():
    with pytest.raises(BoundExceeded):
        explore(LockModel(LockMode.FIXED, 5), 12)
    with pytest.raises(BoundExceeded):
        explore(LockModel(LockMode.FIXED, 2), 17)
    with pytest.raises(BoundExceeded):
        count_states(LockModel(LockMode.FIXED, 2), -1)


# -- the explorer must catch broken implementations -------------------------


def test_catches_missing_release_notification(monkeypatch):
    monkeypatch.setattr(SemCore, "_notify", lambda self, nums: [])
    m = two_pv(1)
    res = explore(m, 16, sem_properties(m))
    assert not res.ok and res.property == "no_lost_wakeup"


def test_catches_negative_values(monkeypatch):
    monkeypatch.setattr(SemCore, "first_blocker", lambda self, ops: None)
    m = two_pv(1)
    res = explore(m, 16, sem_properties(m))
    assert not res.ok and res.property == "non_negative"


def test_catches_partial_multi_op_commit(monkeypatch):
    real = SemCore.try_op

    def piecemeal(self, who, ops):
        # apply the prefix that fits, then park: the bug multi-op lists must not have
        for i, op in enumerate(ops):
            if self.values[op.sem_num] + op.delta < 0:
                for done in ops[:i]:
                    self.values[done.sem_num] += done.delta
                return real(self, who, ops[i:])
        return real(self, who, ops)

    monkeypatch.setattr(SemCore, "try_op", piecemeal)
    m = SemModel([1, 0], [[[P(0), P(1)]], [[V(1)]]])
    res = explore(m, 16, sem_properties(m))
    assert not res.ok and res.property in {"atomic_commit", "conservation"}


def test_catches_mutual_exclusion_break(monkeypatch):
    from threadport.shortlock import LockCore

    def greedy(self, thread):
        self._begin()
        self.held, self.holder = True, thread
        return True

    monkeypatch.setattr(LockCore, "try_acquire", greedy)
    res = explore(LockModel(LockMode.FIXED, 2), 8, LOCK_PROPERTIES)
    assert not res.ok and res.property == "mutual_exclusion"


def test_flag_discipline_checker_flags_bad_logs():
    from threadport.shortlock import EventKind, LockEvent

    bad = [LockEvent(1, EventKind.ACQUIRE, 0, True)]
    assert explorer.flag_discipline_errors(bad)
    good = replay(LockModel(LockMode.LEGACY, 3), [0, 1, 2, 0, 1, 1]).final_state.core.events
    assert explorer.flag_discipline_errors(good) == []


# -- substrate equivalence ---------------------------------------------------


def test_real_threads_reproduce_witness_log():
    m = LockModel(LockMode.LEGACY, 3)
    w = explore(m, 12, LOCK_PROPERTIES)
    real = run_lock_schedule(LockMode.LEGACY, 3, 1, w.schedule)
    assert [e.line() for e in real.events] == w.trace.events
    assert real.starved == w.final_state.core.queue


@pytest.mark.parametrize("mode", list(LockMode))
def test_real_threads_match_virtual_on_random_schedules(mode):
    rng = random.Random(mode.value)
    m = LockModel(mode, 3, rounds=2)
    for _ in range(8):
        sched = random_schedule(m, rng, 16)
        virtual = replay(m, sched)
        real = run_lock_schedule(mode, 3, 2, sched)
        assert [e.line() for e in real.events] == virtual.events, sched


def test_sem_model_steps_match_real_core_status():
    m = two_pv(1)
    s = m.step(m.step(m.initial(), 0), 1)
    assert s.core.is_waiting(1)
    core = SemCore.fresh(1, 0)
    assert core.try_op("x", [P()])[0] is OpStatus.BLOCKED
