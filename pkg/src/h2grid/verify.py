"""Post-hoc invariant auditor for simulation traces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .params import MicrogridParams

_EPS = 1e-9  # p.u. margin when re-evaluating mode conditions from rounded trace values


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    first_violation: int | None = None  # record index
    t: float | None = None
    detail: str = ""
    skipped: bool = False

    def line(self) -> str:
        if self.skipped:
            return f"{self.name}: SKIP ({self.detail})"
        if self.passed:
            return f"{self.name}: PASS"
        return f"{self.name}: FAIL at record {self.first_violation} (t={self.t:.6g} s): {self.detail}"


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def summary(self) -> str:
        return "\n".join(c.line() for c in self.checks)


@dataclass(frozen=True)
class AuditConfig:
    params: MicrogridParams
    dt: float
    ramp_limits: bool = False
    switching_block: bool = False
    decimation: int = 1

    @classmethod
    def from_scenario(cls, scenario) -> "AuditConfig":
        return cls(
            scenario.microgrid_params(),
            scenario.dt,
            scenario.ramp_limits,
            scenario.switching_block,
            scenario.decimation,
        )


def _fail(name, i, rec, detail):
    return CheckResult(name, False, i, rec.t, detail)


def check_finite(trace) -> CheckResult:
    for i, r in enumerate(trace):
        for k, v in zip(r._fields[:10], r[:10]):
            if not math.isfinite(v):
                return _fail("finite", i, r, f"{k} = {v!r}")
    return CheckResult("finite", True)


def check_time_grid(trace, cfg: AuditConfig) -> CheckResult:
    step = cfg.dt * cfg.decimation
    for i, r in enumerate(trace):
        if abs(r.t - i * step) > 1e-9 * max(1.0, i * step):
            return _fail("time_grid", i, r, f"t = {r.t!r}, expected {i * step!r}")
    return CheckResult("time_grid", True)


def check_power_balance(trace, cfg: AuditConfig) -> CheckResult:
    """eta*P_W - P_AEL = dE/dt on the IPBC bus; losses (1 - eta)*P_W."""
    name = "power_balance"
    if cfg.decimation != 1:
        return CheckResult(name, True, skipped=True, detail="needs an undecimated trace")
    p = cfg.params
    h, eta, tol = p.dc_link.h_dc2, p.grid.efficiency, p.audit.power_balance_tol
    for i in range(len(trace) - 1):
        a, b = trace[i], trace[i + 1]
        if "undervoltage" in a.events:
            continue
        de = h * (b.u_dc2_pu**2 - a.u_dc2_pu**2) / cfg.dt
        p_loss = (1.0 - eta) * a.p_w_pu
        err = a.p_w_pu - a.p_ael_pu - p_loss - de
        if abs(err) > tol:
            return _fail(name, i, a, f"residual {err:.3e} p.u. exceeds {tol:g}")
        if p_loss < -tol:
            return _fail(name, i, a, f"negative loss {p_loss:.3e} p.u.")
    return CheckResult(name, True)


def check_ramp(trace, cfg: AuditConfig) -> CheckResult:
    """Discrete |dP_AEL/dt| within the ramp limit; connect/disconnect edges and trips exempt."""
    name = "ramp"
    if not cfg.ramp_limits:
        return CheckResult(name, True, skipped=True, detail="ramp limits off")
    p = cfg.params
    ael = p.electrolyzer_model()
    limit = min(ael.ramp_limit, p.control.delta_wind) * ael.P_rated / p.p_base + p.audit.ramp_tol
    step = cfg.dt * cfg.decimation
    for i in range(len(trace) - 1):
        a, b = trace[i], trace[i + 1]
        if a.mode == "Tripped" or b.mode == "Tripped" or a.p_ael_pu == 0.0 or b.p_ael_pu == 0.0:
            continue
        rate = abs(b.p_ael_pu - a.p_ael_pu) / step
        if rate > limit:
            return _fail(name, i + 1, b, f"|dP_AEL/dt| = {rate:.6g} p.u./s > {limit:.6g}")
    return CheckResult(name, True)


def frequency_bound(trace, params: MicrogridParams) -> float:
    """Largest |f - f_nom| allowed by the one-sample slip delay (Hz)."""
    dw = max((abs(trace[i].omega_pu - trace[i - 1].omega_pu) for i in range(1, len(trace))), default=0.0)
    return params.grid.frequency * dw


def check_frequency(trace, cfg: AuditConfig) -> CheckResult:
    name = "frequency"
    p = cfg.params
    bound = frequency_bound(trace, p) + p.audit.freq_tol
    f0 = p.grid.frequency
    for i, r in enumerate(trace):
        if abs(r.f_hz - f0) > bound:
            return _fail(name, i, r, f"|f - {f0:g}| = {abs(r.f_hz - f0):.3e} Hz > bound {bound:.3e}")
    return CheckResult(name, True)


def check_voltage_band(trace, cfg: AuditConfig) -> CheckResult:
    name = "voltage_band"
    lo, hi = cfg.params.audit.u_band_min_pu, cfg.params.control.u_max_pu
    for i, r in enumerate(trace):
        if r.mode in ("N", "E") and not lo <= r.u_ac_pu <= hi:
            return _fail(name, i, r, f"U_ac = {r.u_ac_pu:.6f} p.u. outside [{lo:g}, {hi:g}] in {r.mode}-mode")
    return CheckResult(name, True)


def _switch_times(trace) -> list[tuple[int, float]]:
    return [(i, r.t) for i, r in enumerate(trace) if any(e.startswith("mode:") for e in r.events)]


def check_no_chatter(trace, cfg: AuditConfig) -> CheckResult:
    name = "no_chatter"
    dwell = cfg.params.supervisor.mode_dwell
    sw = [(i, t) for i, t in _switch_times(trace) if "trip" not in trace[i].events]
    for (i0, t0), (i1, t1) in zip(sw, sw[1:]):
        if t1 - t0 < dwell - 0.5 * cfg.dt:
            return _fail(name, i1, trace[i1], f"switches {t1 - t0:.6g} s apart (< {dwell:g} s)")
    return CheckResult(name, True)


def check_mode_soundness(trace, cfg: AuditConfig) -> CheckResult:
    """N only when the normal-mode conditions hold; never E once they hold and the dwell has passed."""
    name = "mode_soundness"
    if cfg.switching_block:
        return CheckResult(name, True, skipped=True, detail="mode switching blocked")
    if cfg.decimation != 1:
        return CheckResult(name, True, skipped=True, detail="needs an undecimated trace")
    p = cfg.params
    pb, tp = p.p_base, p.turbine
    ael = p.electrolyzer_model()
    env = p.envelope(cfg.ramp_limits)
    p_min, p_rated = ael.P_min / pb, ael.P_rated / pb
    rate_max = env.ramp_rate / pb * (1.0 + env.rate_tolerance)
    dwell = p.supervisor.mode_dwell
    window = max(1, round(p.supervisor.rate_window / cfg.dt))
    eta, gmax = p.grid.efficiency, p.p_gen_max
    last_switch = 0.0
    for i, r in enumerate(trace):
        if any(e.startswith("mode:") for e in r.events):
            last_switch = r.t
        if r.mode == "Tripped":
            continue
        w = r.omega_pu * tp.rated_speed
        avail = eta * min(tp.mppt_gain * w**3, gmax) / pb
        rate_known = not cfg.ramp_limits or i > window + 1
        rate = 0.0
        if cfg.ramp_limits and rate_known:
            j = i - 1 - window
            rate = (trace[i - 1].p_w_pu - trace[j].p_w_pu) / (window * cfg.dt)
        inside = p_min + _EPS < avail < p_rated - _EPS and abs(rate) <= rate_max * (1 - 1e-6)
        outside = not (p_min - _EPS < avail < p_rated + _EPS) or abs(rate) > rate_max * (1 + 1e-6)
        settled = r.t - last_switch >= dwell + cfg.dt
        if r.mode == "N" and outside and settled and rate_known:
            return _fail(name, i, r, f"N-mode with P_mppt = {avail:.6f} p.u., rate {rate:.4g} p.u./s")
        if r.mode == "E" and inside and settled and rate_known:
            return _fail(name, i, r, f"E-mode although P_mppt = {avail:.6f} p.u. admits N-mode")
    return CheckResult(name, True)


def check_trip_absorption(trace) -> CheckResult:
    name = "trip_absorption"
    tripped = False
    for i, r in enumerate(trace):
        if r.mode == "Tripped":
            tripped = True
            if r.p_w_pu != 0.0 or r.p_ael_pu != 0.0:
                return _fail(name, i, r, "power flows after the trip")
        elif tripped:
            return _fail(name, i, r, "left the Tripped mode")
    return CheckResult(name, True)


def verify_trace(trace: Sequence, config) -> VerificationReport:
    """Run every invariant check; ``config`` is a ``Scenario`` or an ``AuditConfig``."""
    cfg = config if isinstance(config, AuditConfig) else AuditConfig.from_scenario(config)
    trace = list(trace)
    checks = [check_finite(trace)]
    if not checks[0].passed:
        return VerificationReport(tuple(checks))
    checks += [
        check_time_grid(trace, cfg),
        check_power_balance(trace, cfg),
        check_ramp(trace, cfg),
        check_frequency(trace, cfg),
        check_voltage_band(trace, cfg),
        check_mode_soundness(trace, cfg),
        check_no_chatter(trace, cfg),
        check_trip_absorption(trace),
    ]
    return VerificationReport(tuple(checks))
