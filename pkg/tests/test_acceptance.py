"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line; conftest repeats them in the
terminal summary.  Tolerances are pinned as module constants.
"""

import dataclasses
import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import ACCEPTANCE_LINES, case_trace
from h2grid.engine import find_equilibrium, run
from h2grid.params import MicrogridParams, OperatingEnvelope
from h2grid.plant import RectifierPort, rectifier_ac_voltage, rectifier_dc_current
from h2grid.scenario import BUILTINS, builtin
from h2grid.supervisor import schedule_steady_state
from h2grid.traceio import format_record
from h2grid.verify import frequency_bound, verify_trace
from oracles import GRID_STEP, brute_force_batch

# criterion 1
COEFF_TOL = 1e-3
POWER_CONSISTENCY_TOL = 1e-3
C1_RUNTIME = 1.0
# criterion 2
N_INSTANCES = 100_000
SCHEDULE_TOL = GRID_STEP
C2_RUNTIME = 30.0
# criterion 3
FREQ_TOL = 1e-9
# criterion 4
PLATEAU, PLATEAU_TOL = 0.82, 0.05
INITIAL, INITIAL_TOL = 0.48, 0.05
U_RECOVERY_TOL, U_RECOVERY_TIME = 0.02, 1.0
C4_RUNTIME = 10.0
# criterion 5
RAMP_LIMIT, RAMP_TOL = 0.05, 1e-9
OMEGA_CLAMP = 1.2
# criterion 7
SWITCH_POWER, SWITCH_TOL = 0.6, 0.02
U_BAND = (0.95, 1.10)
U_MAX_MARGIN = 0.01
# criterion 8
WIND_MEAN, WIND_MEAN_TOL = 10.5, 0.01
N_DRAWS = 1_000_000
SWITCHES = (3, 7)
C8_RUNTIME = 60.0
# criterion 9
DT_HALVING_TOL = 0.01
EQUILIBRIUM_TOL = 0.01
STEADY_RATE = 1e-4  # p.u./s
STEADY_MIN_LEN = 0.1  # s


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _switches(trace):
    return [(i, e) for i, r in enumerate(trace) for e in r.events if e.startswith("mode:")]


def test_criterion_01_rectifier_coefficients():
    t0 = time.perf_counter()
    k_idc = 3 / math.pi * quad(lambda x: math.sqrt(2) * math.sin(x), math.pi / 3, 2 * math.pi / 3)[0]
    n = 36_000
    theta = (np.arange(n) + 0.5) * 2 * math.pi / n
    wave = np.where((theta > math.pi / 6) & (theta < 5 * math.pi / 6), 1.0, 0.0)
    wave -= np.where((theta > 7 * math.pi / 6) & (theta < 11 * math.pi / 6), 1.0, 0.0)
    k_uac = math.sqrt(np.mean(wave**2))
    k_uac1 = 2 * abs(np.fft.rfft(wave)[1]) / n / math.sqrt(2)
    u, u1 = rectifier_ac_voltage(1.0)
    errs = [
        abs(rectifier_dc_current(1.0) - 1.35),
        abs(rectifier_dc_current(1.0) - k_idc),
        abs(u - 0.816),
        abs(u - k_uac),
        abs(u1 - 0.78),
        abs(u1 - k_uac1),
    ]
    rng = np.random.default_rng(0)
    worst = 0.0
    for i_ac, u_dc in rng.uniform(0.0, 2000.0, size=(1000, 2)):
        port = RectifierPort.from_ac_current(i_ac, u_dc)
        worst = max(worst, abs(port.ac_power - port.dc_power) / port.dc_power)
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= COEFF_TOL and worst <= POWER_CONSISTENCY_TOL and elapsed < C1_RUNTIME
    report(1, ok, f"max coefficient error {max(errs):.2e}, power mismatch {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_scheduler_vs_brute_force():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    half = N_INSTANCES // 2
    for p_rated, p_min in ((1.0, 0.1), (0.6, 0.06)):
        env = OperatingEnvelope(p_min, p_rated, 0.05, 0.05, 1.15, 0.05, 0.2)
        m = rng.uniform(0.0, 1.2, half)
        prev = rng.uniform(0.0, p_rated, half)
        dt = 10 ** rng.uniform(-4, 0.5, half)
        oracle = brute_force_batch(m, prev, p_min, p_rated, 0.05, dt)
        got = np.array([schedule_steady_state(a, b, env, c).P_AEL_result for a, b, c in zip(m, prev, dt)])
        worst = max(worst, float(np.max(np.abs(got - oracle))))
    elapsed = time.perf_counter() - t0
    ok = worst <= SCHEDULE_TOL and elapsed < C2_RUNTIME
    report(2, ok, f"{2 * half} instances, max |closed form - brute force| {worst:.2e} p.u., {elapsed:.1f} s")


def test_criterion_03_frequency_decoupling():
    worst_margin, ok = math.inf, True
    for name in BUILTINS:
        tr = case_trace(name)
        p = builtin(name).microgrid_params()
        bound = frequency_bound(tr, p) + FREQ_TOL
        dev = max(abs(r.f_hz - p.grid.frequency) for r in tr)
        ok &= dev <= bound
        worst_margin = min(worst_margin, bound - dev)
    rep3 = verify_trace(case_trace("case3"), builtin("case3"))
    ok &= rep3["frequency"].passed and not rep3["voltage_band"].passed
    report(3, ok, f"all five cases within the one-sample bound (min margin {worst_margin:.2e} Hz); case 3 frequency passes")


def test_criterion_04_case1_shape():
    t0 = time.perf_counter()
    tr = run(builtin("case1"))
    elapsed = time.perf_counter() - t0
    plateau = float(np.mean([r.p_w_pu for r in tr if 6.0 <= r.t <= 7.0]))
    initial = tr[0].p_w_pu
    worst_u = 0.0
    for t_step, t_next in ((3.0, 7.0), (7.0, 10.0)):
        worst_u = max(worst_u, max(abs(r.u_ac_pu - 1.0) for r in tr if t_step + U_RECOVERY_TIME <= r.t <= t_next))
    ok = (
        abs(plateau - PLATEAU) <= PLATEAU_TOL
        and abs(initial - INITIAL) <= INITIAL_TOL
        and worst_u <= U_RECOVERY_TOL
        and elapsed < C4_RUNTIME
    )
    report(4, ok, f"plateau {plateau:.4f}, initial {initial:.4f}, |U-1| after 1 s {worst_u:.2e}, {elapsed:.2f} s")


def test_criterion_05_case2_ramp_and_clamp():
    tr = case_trace("case2")
    dt = builtin("case2").dt
    rate = max(abs(b.p_ael_pu - a.p_ael_pu) / dt for a, b in zip(tr, tr[1:]))
    w_max = max(r.omega_pu for r in tr)
    pitched = any(r.beta_deg > 0.0 for r in tr if r.omega_pu >= OMEGA_CLAMP - 0.02)
    ok = rate <= RAMP_LIMIT + RAMP_TOL and math.isclose(w_max, OMEGA_CLAMP, abs_tol=1e-9) and pitched
    report(5, ok, f"max |dP_AEL/dt| {rate:.5f} p.u./s, max omega {w_max:.6f} p.u., pitch active {pitched}")


def test_criterion_06_case3_trip():
    tr = case_trace("case3")
    rep = verify_trace(tr, builtin("case3"))
    t_trip = next((r.t for r in tr if r.mode == "Tripped"), None)
    ok = tr[-1].mode == "Tripped" and not rep["voltage_band"].passed and rep["frequency"].passed
    report(6, ok, f"tripped at t={t_trip} s, voltage band FAIL, frequency PASS")


def test_criterion_07_case4_mode_cycle():
    sc = builtin("case4")
    tr = case_trace("case4")
    p = sc.microgrid_params()
    eta, pb, k, w_r = p.grid.efficiency, p.p_base, p.turbine.mppt_gain, p.turbine.rated_speed
    sw = _switches(tr)
    kinds = [e for _, e in sw]
    i_ne = next(i for i, e in sw if e == "mode:N->E")
    i_en = next(i for i, e in sw if e == "mode:E->N")
    p_switch = tr[i_ne].p_ael_pu
    w = tr[i_en].omega_pu * w_r
    avail = eta * min(k * w**3, p.p_gen_max) / pb
    settle = p.supervisor.mode_dwell
    e_u = [r.u_ac_pu for r in tr if r.mode == "E" and tr[i_ne].t + settle <= r.t < tr[i_en].t]
    u_all_e = [r.u_ac_pu for r in tr if r.mode == "E"]
    u_max = p.control.u_max_pu
    ok = (
        kinds == ["mode:N->E", "mode:E->N"]
        and abs(p_switch - SWITCH_POWER) <= SWITCH_TOL
        and SWITCH_POWER - SWITCH_TOL <= avail < SWITCH_POWER
        and U_BAND[0] <= min(e_u) and max(e_u) <= U_BAND[1]
        and max(u_all_e) <= u_max + U_MAX_MARGIN
    )
    report(
        7,
        ok,
        f"N->E at {tr[i_ne].t:.3f} s with P_AEL {p_switch:.4f}; E->N at {tr[i_en].t:.3f} s with P_mppt {avail:.4f}; "
        f"E-mode U in [{min(e_u):.4f}, {max(e_u):.4f}], peak {max(u_all_e):.4f}",
    )


def test_criterion_08_case5_stochastic():
    sc = builtin("case5")
    draws = sc.wind.scale_param * np.random.default_rng(sc.seed).weibull(sc.wind.shape, N_DRAWS)
    t0 = time.perf_counter()
    tr = run(sc)
    elapsed = time.perf_counter() - t0
    realised = float(np.mean([r.v_wind for r in tr]))
    n_sw = len(_switches(tr))
    rep = verify_trace(tr, sc)
    ok = (
        abs(draws.mean() - WIND_MEAN) / WIND_MEAN <= WIND_MEAN_TOL
        and abs(realised - WIND_MEAN) / WIND_MEAN <= WIND_MEAN_TOL
        and SWITCHES[0] <= n_sw <= SWITCHES[1]
        and rep.passed
        and elapsed < C8_RUNTIME
    )
    report(
        8,
        ok,
        f"draw mean {draws.mean():.3f}, realised mean {realised:.3f} m/s, {n_sw} switches, "
        f"audit {'clean' if rep.passed else rep.failed}, {elapsed:.1f} s",
    )


def _steady_segments(trace, dt):
    pw = np.array([r.p_w_pu for r in trace])
    rate = np.gradient(pw, dt)
    flags = [r.mode == "N" and abs(q) < STEADY_RATE for r, q in zip(trace, rate)]
    segs, start = [], None
    for i, f in enumerate([*flags, False]):
        if f and start is None:
            start = i
        elif not f and start is not None:
            if (i - start) * dt >= STEADY_MIN_LEN:
                segs.append((start, i))
            start = None
    return segs


def test_criterion_09_numerical_hygiene():
    sc = builtin("case1")
    coarse = case_trace("case1")
    fine = run(dataclasses.replace(sc, dt=sc.dt / 2))[::2]
    worst_rms = 0.0
    for ch in ("omega_pu", "beta_deg", "p_w_pu", "p_ael_pu", "u_ac_pu", "f_hz", "u_dc2_pu", "duty"):
        x = np.array([getattr(r, ch) for r in coarse])
        y = np.array([getattr(r, ch) for r in fine])
        ref = math.sqrt(np.mean(x**2))
        if ref > 0:
            worst_rms = max(worst_rms, math.sqrt(np.mean((x - y) ** 2)) / ref)
    worst_eq, n_segs = 0.0, 0
    for name in BUILTINS:
        scn = builtin(name)
        tr = case_trace(name)
        params = scn.microgrid_params()
        for a, b in _steady_segments(tr, scn.dt):
            n_segs += 1
            for r in tr[a:b]:
                eq = find_equilibrium("N", r.v_wind, params)
                worst_eq = max(worst_eq, abs(r.p_w_pu - eq.P) / eq.P, abs(r.u_ac_pu - eq.U_ac) / eq.U_ac)
    ok = worst_rms < DT_HALVING_TOL and n_segs > 0 and worst_eq <= EQUILIBRIUM_TOL
    report(9, ok, f"dt-halving worst relative RMS {worst_rms:.2e}; {n_segs} steady N segments, worst mismatch {worst_eq:.2e}")


def test_criterion_10_determinism():
    sc = builtin("case5").with_seed(7)
    sc = dataclasses.replace(sc, duration=10.0)
    a = "\n".join(map(format_record, run(sc))).encode()
    b = "\n".join(map(format_record, run(sc))).encode()
    report(10, a == b, f"two seeded runs, {len(a)} CSV bytes each, identical: {a == b}")
