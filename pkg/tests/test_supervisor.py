import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from h2grid.modes import Branch, Mode, ModeKind
from h2grid.params import OperatingEnvelope
from h2grid.supervisor import (
    Binding,
    MscSelector,
    ProtectionHistory,
    Snapshot,
    SupervisorState,
    mode_decision,
    n_mode_conditions,
    protection_check,
    ramp_cap,
    schedule_steady_state,
    supervise,
)
from oracles import brute_force_schedule


def env(p_rated=1.0, p_min=0.1, delta=0.05, ramp=True, dwell=0.0):
    return OperatingEnvelope(p_min, p_rated, delta, delta, 1.15, 0.05, dwell, ramp_limits=ramp)


# -- mode decision -------------------------------------------------------------


def test_mode_examples():
    e = env()
    assert mode_decision(0.48, 0.0, e, Mode(ModeKind.E), 1.0).kind is ModeKind.N
    assert mode_decision(0.82, 0.0, env(p_rated=0.6, p_min=0.06), Mode(ModeKind.N), 1.0).kind is ModeKind.E
    assert mode_decision(0.05, 0.0, e, Mode(ModeKind.N), 1.0).kind is ModeKind.E


def test_fast_ramp_forces_e_mode():
    e = env()
    assert n_mode_conditions(0.5, 0.04, e)
    assert not n_mode_conditions(0.5, 0.06, e)
    assert n_mode_conditions(0.5, 0.06, env(ramp=False))


def test_mode_dwell_blocks_early_switch():
    e = env(dwell=0.2)
    m = Mode(ModeKind.N, entered_at=1.0)
    assert mode_decision(0.05, 0.0, e, m, 1.1) is m
    assert mode_decision(0.05, 0.0, e, m, 1.201).kind is ModeKind.E


def test_tripped_is_absorbing():
    m = Mode(ModeKind.TRIPPED, 0.0)
    assert mode_decision(0.5, 0.0, env(), m, 10.0) is m


# -- schedule ------------------------------------------------------------------


def test_schedule_examples():
    r = schedule_steady_state(0.82, 0.6, env(p_rated=0.6, p_min=0.06), 1e-3)
    assert (r.P_AEL_result, r.binding) == (pytest.approx(0.6), Binding.RATED)
    r = schedule_steady_state(0.05, 0.3, env(), 1e-3)
    assert (r.P_AEL_result, r.binding) == (0.0, Binding.DISCONNECTED)
    r = schedule_steady_state(0.80, 0.40, env(), 1.0)
    assert r.binding is Binding.RAMP_CAP
    assert r.P_AEL_result == pytest.approx(0.45, abs=1e-12)
    assert brute_force_schedule(0.80, 0.40, 0.1, 1.0, 0.05, 1.0) == pytest.approx(0.45, abs=1e-4)


def test_schedule_mppt_binding_and_ties():
    r = schedule_steady_state(0.3, 0.3, env(), 1e-3)
    assert r.binding is Binding.MPPT
    r = schedule_steady_state(1.0, 1.0, env(), 1e-3)  # MPPT = rated = below cap
    assert r.binding is Binding.MPPT


def test_ramp_cap_restart_floor():
    assert ramp_cap(0.0, 1.0, 0.1, 0.05, 1e-3) == 0.1
    assert ramp_cap(0.5, 1.0, 0.1, 0.05, 1e-3, ramp_limits=False) == math.inf


def test_schedule_rejects_bad_dt():
    with pytest.raises(ValueError):
        schedule_steady_state(0.5, 0.5, env(), 0.0)


unit = st.floats(0.0, 1.5, allow_nan=False)


@given(unit, unit, st.floats(1e-4, 2.0))
def test_schedule_matches_brute_force(p_mppt, p_prev, dt):
    r = schedule_steady_state(p_mppt, p_prev, env(), dt)
    assert r.P_AEL_result == pytest.approx(brute_force_schedule(p_mppt, p_prev, 0.1, 1.0, 0.05, dt), abs=1e-4)


@given(unit, unit, unit, st.floats(1e-4, 2.0))
def test_schedule_monotone_in_mppt(a, b, p_prev, dt):
    lo, hi = sorted((a, b))
    e = env()
    assert schedule_steady_state(lo, p_prev, e, dt).P_AEL_result <= schedule_steady_state(hi, p_prev, e, dt).P_AEL_result


@given(unit, unit, st.floats(1e-4, 2.0))
def test_schedule_honours_envelope(p_mppt, p_prev, dt):
    e = env()
    r = schedule_steady_state(p_mppt, p_prev, e, dt)
    if r.binding is Binding.DISCONNECTED:
        assert r.P_AEL_result == 0.0 and p_mppt < e.P_AEL_min
    else:
        assert e.P_AEL_min <= r.P_AEL_result <= e.P_AEL_rated
        assert r.P_AEL_result <= p_mppt
        assert r.P_AEL_result <= max(p_prev + 0.05 * dt, e.P_AEL_min) + 1e-12


# -- protection ----------------------------------------------------------------


def test_protection_nominal_never_trips():
    e, h = env(), ProtectionHistory()
    assert all(protection_check(1.0, e, h, k * 1e-3) is None for k in range(5000))


def test_protection_trips_after_dwell():
    e, h = env(), ProtectionHistory()
    hits = [protection_check(1.2, e, h, k * 1e-3) for k in range(100)]
    first = next(i for i, x in enumerate(hits) if x is not None)
    assert first == 50
    assert hits[first].U_ac == 1.2


def test_protection_short_excursions_do_not_trip():
    e, h = env(), ProtectionHistory()
    for k in range(5000):
        u = 1.2 if (k // 30) % 2 == 0 else 1.0  # 30 ms above, 30 ms below
        assert protection_check(u, e, h, k * 1e-3) is None


# -- supervise -----------------------------------------------------------------


def _state(kind=ModeKind.N, block=False):
    return SupervisorState(Mode(kind, -10.0), window=100, switching_block=block)


def test_supervise_n_mode_commands():
    cmd = supervise(Snapshot(0.48, 0.48, 1.0, 0.4), 1.0, _state(), env(), 1e-3)
    assert (cmd.mode, cmd.msc, cmd.branch, cmd.disconnect) == (ModeKind.N, MscSelector.MPPT, Branch.VOLTAGE, False)


def test_supervise_switches_to_e_at_rated():
    s = _state()
    cmd = supervise(Snapshot(0.61, 0.7, 1.0, 0.6), 1.0, s, env(p_rated=0.6, p_min=0.06), 1e-3)
    assert cmd.mode is ModeKind.E and "mode:N->E" in cmd.events
    assert cmd.msc is MscSelector.DROOP and cmd.branch is Branch.POWER
    assert cmd.P_AEL_ref == pytest.approx(0.6)


def test_supervise_e_disconnects_at_low_wind():
    cmd = supervise(Snapshot(0.05, 0.05, 1.0, 0.0), 1.0, _state(ModeKind.E), env(), 1e-3)
    assert cmd.disconnect and cmd.msc is MscSelector.OFF and cmd.P_AEL_ref == 0.0


def test_supervise_blocked_switching_only_trips():
    s, e = _state(block=True), env(p_rated=0.6, p_min=0.06)
    events = []
    for k in range(200):
        cmd = supervise(Snapshot(0.9, 0.9, 1.2, 0.6), k * 1e-3, s, e, 1e-3)
        events += cmd.events
    assert events == ["mode:N->Tripped", "trip"]
    assert cmd.mode is ModeKind.TRIPPED and cmd.disconnect and cmd.P_AEL_ref == 0.0
