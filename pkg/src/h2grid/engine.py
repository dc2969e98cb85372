"""Fixed-step RK4 simulation of the composed plant, controllers and supervisor,
plus steady-state equilibrium finding on the P-U curves.

Per step the ordering is supervisor, then controllers, then plant
integration.  Controller outputs (pitch angle, MSC power, LSC power, IPBC
duty) are held over the step while the continuous states (rotor speed and
the two DC-link energies) are integrated with classic RK4.  The powers
written to the trace are the RK4-weighted averages over the step, so the
stored-energy change of the IPBC bus equals ``dt * (eta*P_W - P_AEL)`` to
rounding.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import NamedTuple

from scipy.optimize import bisect, brentq

from .control import (
    FrequencyChannel,
    IpbcControllerState,
    IpbcMeasurement,
    MscState,
    PiState,
    PitchState,
    frequency_step,
    ipbc_step,
    lsc_step,
    make_ipbc,
    make_pitch,
    msc_loop_step,
    msc_power_reference,
    pitch_step,
)
from .modes import Branch, Mode, ModeKind
from .params import K_UAC, K_UAEL, MicrogridParams
from .plant import DcBusState, DrivetrainState, aero_power, capped_torque
from .supervisor import MscSelector, Snapshot, SupervisorState, n_mode_conditions, supervise


class SimulationError(RuntimeError):
    """The integration produced a non-finite state."""


class TraceRecord(NamedTuple):
    t: float
    v_wind: float
    omega_pu: float
    beta_deg: float
    p_w_pu: float
    p_ael_pu: float
    u_ac_pu: float
    f_hz: float
    u_dc2_pu: float
    duty: float
    mode: str
    events: tuple = ()


@dataclass
class SystemState:
    n: int
    t: float
    drive: DrivetrainState
    dc1: DcBusState
    dc2: DcBusState
    pitch: PitchState
    msc: MscState
    lsc: PiState
    freq: FrequencyChannel
    ipbc: IpbcControllerState
    sup: SupervisorState
    u_filt: float  # V, droop voltage measurement
    p_w: float  # W, average over the last step
    p_ael: float  # W

    @property
    def mode(self) -> Mode:
        return self.sup.mode


@dataclass(frozen=True)
class Equilibrium:
    U_ac: float  # p.u.
    P: float  # p.u., DFIG output power
    mode: ModeKind
    classification: str  # "stable" | "none" | "boundary"
    P_AEL: float = math.nan  # p.u.


# -- steady-state helpers ------------------------------------------------------


def available_power(omega_m: float, params: MicrogridParams) -> float:
    """MPPT power (W) at ``omega_m`` referred to the AEL terminals."""
    tp = params.turbine
    return params.grid.efficiency * min(tp.mppt_gain * omega_m**3, params.p_gen_max)


def _pitch_speed(params: MicrogridParams) -> float:
    tp = params.turbine
    return (tp.speed_upper_limit - params.control.pitch_margin) * tp.rated_speed


def steady_rotor(v: float, p_target: float, params: MicrogridParams) -> tuple[float, float] | None:
    """Rotor speed and pitch (rad/s, deg) where the rotor delivers ``p_target`` W.

    Searches the stable branch at or above the optimal tip-speed ratio and
    falls back to pitching at the speed-regulation point.  ``None`` if the
    wind cannot supply ``p_target``.
    """
    tp = params.turbine
    if v <= 0.0:
        return None
    w_opt = tp.lambda_opt * v / tp.blade_radius
    w_top = _pitch_speed(params)

    def surplus(w, beta=0.0):
        return aero_power(v, w, beta, tp) - p_target

    lo = min(w_opt, w_top)
    if surplus(lo) < 0.0:
        return None
    if surplus(w_top) <= 0.0:
        return brentq(surplus, lo, w_top, xtol=1e-12), 0.0
    beta_max = params.control.beta_max
    if surplus(w_top, beta_max) > 0.0:
        return None
    return w_top, brentq(lambda b: surplus(w_top, b), 0.0, beta_max, xtol=1e-12)


def mppt_steady_power(v: float, params: MicrogridParams) -> float:
    """DFIG output (W) in steady MPPT operation at wind ``v``."""
    tp = params.turbine
    if v <= 0.0:
        return 0.0
    w = min(tp.lambda_opt * v / tp.blade_radius, _pitch_speed(params))
    p = min(tp.mppt_gain * w**3, aero_power(v, w, 0.0, tp))
    if p <= params.p_gen_max:
        return p
    return params.p_gen_max


def find_equilibrium(mode, v_wind: float, params: MicrogridParams, duty: float | None = None) -> Equilibrium:
    """Intersection of the DFIG and AEL P-U curves.

    N-mode: the DFIG holds its MPPT power and the AEL curve is fixed by the
    duty cycle ``duty`` (default: the duty that puts the intersection at
    rated voltage).  E-mode: the droop line (with the conversion loss)
    against the AEL held at rated power, solved by bisection.
    """
    kind = mode.kind if isinstance(mode, Mode) else ModeKind(mode)
    if v_wind < 0:
        raise ValueError("v_wind must be >= 0")
    ael = params.electrolyzer_model()
    eta = params.grid.efficiency
    pb, ub = params.p_base, params.u_base
    p_w = mppt_steady_power(v_wind, params)

    if kind is ModeKind.N:
        p_ael = eta * p_w
        if duty is None:
            duty = ael.voltage_for_power(min(p_ael, ael.P_rated)) / (K_UAEL * ub) if p_ael > 0 else 0.0
        if p_ael > ael.P_rated * (1 + 1e-12) or duty <= 0.0 or p_ael <= 0.0:
            return Equilibrium(math.nan, float(p_w / pb), kind, "none", float(p_ael / pb))
        u = ael.voltage_for_power(p_ael) / (K_UAEL * duty)
        tag = "boundary" if math.isclose(p_ael, ael.P_rated, rel_tol=1e-12) else "stable"
        return Equilibrium(float(u / ub), float(p_w / pb), kind, tag, float(p_ael / pb))

    if kind is ModeKind.E:
        droop = params.droop()
        u_hi = params.supervisor.u_trip_pu

        def residual(u_pu):
            p = msc_power_reference(ModeKind.E, 0.0, u_pu * ub, droop)
            return eta * min(max(p, 0.0), params.p_gen_max) / ael.P_rated - 1.0

        r0, r1 = residual(0.0), residual(u_hi)
        if r0 < 0.0 or r1 > 0.0:
            return Equilibrium(math.nan, math.nan, kind, "none")
        u = bisect(residual, 0.0, u_hi, xtol=1e-9)
        p = ael.P_rated / eta
        if p > p_w * (1 + 1e-9):
            # the rotor cannot sustain the droop operating point
            return Equilibrium(u, p / pb, kind, "none", ael.P_rated / pb)
        tag = "boundary" if math.isclose(p, p_w, rel_tol=1e-9) else "stable"
        return Equilibrium(u, p / pb, kind, tag, ael.P_rated / pb)

    return Equilibrium(math.nan, 0.0, kind, "none", 0.0)


# -- simulator -------------------------------------------------------------------


class Simulator:
    """Holds the per-run constants; all mutable run state lives in ``SystemState``."""

    def __init__(self, params: MicrogridParams, dt: float, ramp_limits: bool = False, switching_block: bool = False):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.params = params
        self.dt = dt
        self.ramp_limits = ramp_limits
        self.switching_block = switching_block
        tp, ctl = params.turbine, params.control
        self.turbine = tp
        self.ael = params.electrolyzer_model()
        self.droop = params.droop()
        self.env = params.envelope(ramp_limits)
        self.eta = params.grid.efficiency
        self.w_rated = tp.rated_speed
        self.w_max = tp.speed_upper_limit * tp.rated_speed
        self.w_pitch_pu = tp.speed_upper_limit - ctl.pitch_margin
        self.k_mppt = tp.mppt_gain
        self.c_dc1 = params.c_dc1
        self.c_dc2 = params.c_dc2
        self.u_dc2_rated = params.u_dc2_rated
        self.window = max(1, round(params.supervisor.rate_window / dt))
        self.u_alpha = 1.0 - math.exp(-dt / ctl.u_filter_tau)

    # -- initial conditions ----------------------------------------------------

    def _base_state(self, omega, beta, p_e, u2, mode, branch) -> SystemState:
        p, ctl = self.params, self.params.control
        pitch = make_pitch(ctl.pitch_kp, ctl.pitch_ki, ctl.beta_max, ctl.pitch_rate)
        pitch.beta = beta
        pitch.pi.integrator = beta
        ipbc = make_ipbc(ctl, self.u_dc2_rated)
        ipbc.branch = branch
        sup = SupervisorState(Mode(mode, 0.0), self.window, self.switching_block)
        return SystemState(
            n=0,
            t=0.0,
            drive=DrivetrainState(omega, self.turbine.inertia),
            dc1=DcBusState.at_voltage(self.c_dc1, p.dc_link.u_dc1_ref),  # B2B link is pre-charged
            dc2=DcBusState.at_voltage(self.c_dc2, u2),
            pitch=pitch,
            msc=MscState(P_l=p_e, P_l_ref=p_e, tau_p=ctl.msc_tau),
            lsc=PiState(ctl.lsc_kp, ctl.lsc_ki),
            freq=FrequencyChannel.start(p.omega_s_ref, omega / self.w_rated * p.omega_s_ref),
            ipbc=ipbc,
            sup=sup,
            u_filt=K_UAC * u2,
            p_w=p_e,
            p_ael=0.0,
        )

    def _load_ael(self, s: SystemState, p_ael: float) -> None:
        ael, ipbc = self.ael, s.ipbc
        u2 = s.dc2.u_dc2
        if p_ael <= 0.0 or u2 <= 0.0:
            ipbc.d = 0.0
            return
        v = ael.voltage_for_power(p_ael)
        ipbc.d = min(v / u2, 1.0)
        ipbc.voltage_pi.integrator = p_ael / self.params.p_base
        ipbc.power_pi.integrator = ael.current(v) / ael.current(ael.voltage_for_power(ael.P_rated))
        ipbc.current_pi.integrator = ipbc.d
        ipbc.P_AEL_ref = p_ael
        s.p_ael = p_ael
        s.sup.last_ref = p_ael

    def initial_state(self, v0: float, p_e0: float | None = None) -> SystemState:
        """Steady operating point for wind ``v0``.

        With ``p_e0`` (W) the rotor starts at its MPPT speed while the DFIG
        delivers ``p_e0`` in N-mode, which is generally not an equilibrium.
        """
        p = self.params
        tp, ael, eta = self.turbine, self.ael, self.eta
        u2_rated = self.u_dc2_rated
        if v0 <= 0.0:
            return self._base_state(0.0, 0.0, 0.0, 0.0, ModeKind.E, Branch.POWER)
        w_opt = min(tp.lambda_opt * v0 / tp.blade_radius, _pitch_speed(p))

        if p_e0 is not None:
            s = self._base_state(w_opt, 0.0, p_e0, u2_rated, ModeKind.N, Branch.VOLTAGE)
            self._load_ael(s, min(eta * p_e0, ael.P_rated))
            return s

        # N-mode: DFIG on the MPPT curve
        pt = None
        p_gen = mppt_steady_power(v0, p)
        w = tp.lambda_opt * v0 / tp.blade_radius
        if w <= _pitch_speed(p) and self.k_mppt * w**3 <= p.p_gen_max:
            beta, pt = 0.0, self.k_mppt * w**3
        else:
            rotor = steady_rotor(v0, p_gen, p)
            if rotor is not None:
                w, beta = rotor
                pt = min(self.k_mppt * w**3, p.p_gen_max)
        if pt is not None and n_mode_conditions(eta * pt, 0.0, self.env):
            s = self._base_state(w, beta, pt, u2_rated, ModeKind.N, Branch.VOLTAGE)
            self._load_ael(s, eta * pt)
            return s

        # E-mode: droop against the AEL at rated power
        eq = find_equilibrium(ModeKind.E, v0, p)
        if eq.classification != "none" and eta * p_gen >= ael.P_rated:
            p_e = ael.P_rated / eta
            w, beta = steady_rotor(v0, p_e, p)
            u2 = eq.U_ac * p.u_base / K_UAC
            s = self._base_state(w, beta, p_e, u2, ModeKind.E, Branch.POWER)
            self._load_ael(s, ael.P_rated)
            return s

        # not enough wind for minimum load: AEL disconnected, DFIG idle
        return self._base_state(w_opt, 0.0, 0.0, u2_rated, ModeKind.E, Branch.POWER)

    # -- one step --------------------------------------------------------------

    def _rates(self, w, e1, e2, v, beta, p_e, p_lsc, d):
        tp = self.turbine
        p_m = aero_power(v, w if w > 0.0 else 0.0, beta, tp)
        dw = (capped_torque(p_m, w, tp) - capped_torque(p_e, w, tp)) / tp.inertia
        p_s = p_e / max(w / self.w_rated, tp.cutin_speed_pu)
        p_w = p_s + p_lsc
        u2 = math.sqrt(2.0 * e2 / self.c_dc2) if e2 > 0.0 else 0.0
        p_ael = self.ael.power(d * u2)
        return dw, (p_e - p_s) - p_lsc, self.eta * p_w - p_ael, p_w, p_ael

    def advance(self, s: SystemState, v: float) -> TraceRecord:
        """Advance ``s`` in place by one step with wind ``v`` held; return the record for t_n."""
        p, dt = self.params, self.dt
        tp = self.turbine
        t = s.n * dt
        w = s.drive.omega_m
        w_pu = w / self.w_rated
        u2 = s.dc2.u_dc2
        u_ac = K_UAC * u2

        # measurements
        ctl = s.ipbc
        u_ael = ctl.d * u2
        meas = IpbcMeasurement(u2, self.ael.power(u_ael), self.ael.current(u_ael))
        s.freq = frequency_step(s.freq, w_pu * p.omega_s_ref, dt)
        s.u_filt += (u_ac - s.u_filt) * self.u_alpha

        # supervisor
        p_mppt = min(self.k_mppt * w**3, p.p_gen_max)
        cmd = supervise(Snapshot(self.eta * p_mppt, s.p_w, u_ac, meas.P_AEL), t, s.sup, self.env, dt)
        events = list(cmd.events)

        # controllers
        beta = pitch_step(w_pu, self.w_pitch_pu, s.pitch, dt)
        if cmd.mode is ModeKind.TRIPPED:
            s.msc = MscState(tau_p=s.msc.tau_p)
            p_e = 0.0
        else:
            if cmd.msc is MscSelector.MPPT:
                ref = p_mppt
            elif cmd.msc is MscSelector.DROOP:
                # the droop only ever curtails: never ask for more than the MPPT power
                ref = min(max(msc_power_reference(ModeKind.E, p_mppt, s.u_filt, self.droop), 0.0), p_mppt)
            else:
                ref = 0.0
            s.msc, p_e = msc_loop_step(s.msc, ref, dt, self.env.ramp_rate)
        if cmd.mode is ModeKind.TRIPPED:
            p_lsc = 0.0
        else:
            p_rot = p_e - p_e / max(w_pu, tp.cutin_speed_pu)
            p_lsc = p_rot + lsc_step(_bus_voltage(s.dc1), p.dc_link.u_dc1_ref, s.lsc, dt, p.p_base)
        d = ipbc_step(ctl, meas, cmd.branch, dt, self.ael, p.p_base, cmd.P_AEL_ref, cmd.disconnect)

        # plant
        y0 = (w, s.dc1.energy, s.dc2.energy)
        args = (v, beta, p_e, p_lsc, d)
        k1 = self._rates(*y0, *args)
        k2 = self._rates(*(y0[i] + 0.5 * dt * k1[i] for i in range(3)), *args)
        k3 = self._rates(*(y0[i] + 0.5 * dt * k2[i] for i in range(3)), *args)
        k4 = self._rates(*(y0[i] + dt * k3[i] for i in range(3)), *args)
        avg = [(k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0 for i in range(5)]
        w1, e1, e2 = (y0[i] + dt * avg[i] for i in range(3))

        if not all(math.isfinite(x) for x in (w1, e1, e2, *avg)):
            raise SimulationError(f"non-finite state at t={t:.6f}s: omega={w1}, E1={e1}, E2={e2}")
        clamped = False
        if w1 > self.w_max:
            w1, clamped = self.w_max, True
        elif w1 < 0.0:
            w1, clamped = 0.0, True
        if clamped and not s.drive.clamped:
            events.append("clamp")
        if e2 < 0.0:
            e2 = 0.0
            events.append("undervoltage")
        e1 = max(e1, 0.0)

        s.drive = DrivetrainState(w1, tp.inertia, clamped=clamped)
        s.dc1 = DcBusState(self.c_dc1, e1)
        s.dc2 = DcBusState(self.c_dc2, e2, undervoltage=e2 == 0.0 and y0[2] > 0.0)
        s.p_w, s.p_ael = avg[3], avg[4]
        pb = p.p_base
        rec = TraceRecord(
            t,
            v,
            w_pu,
            beta,
            avg[3] / pb,
            avg[4] / pb,
            u_ac / p.u_base,
            s.freq.frequency,
            u2 / self.u_dc2_rated,
            d,
            cmd.mode.value,
            tuple(events),
        )
        s.n += 1
        s.t = s.n * dt
        return rec


def _bus_voltage(bus: DcBusState) -> float:
    return math.sqrt(2.0 * bus.energy / bus.capacitance) if bus.energy > 0.0 else 0.0


def step(state: SystemState, v_wind: float, dt: float, sim: Simulator) -> tuple[SystemState, TraceRecord]:
    """Pure single step: returns a new state and leaves ``state`` untouched."""
    if dt != sim.dt:
        raise ValueError("dt must match the simulator step")
    nxt = copy.deepcopy(state)
    rec = sim.advance(nxt, v_wind)
    return nxt, rec


def simulate(
    sim: Simulator, state: SystemState, wind, n_steps: int, decimation: int = 1
) -> list[TraceRecord]:
    """Run ``n_steps`` from ``state`` (mutated) with ``wind(t)``; keep every ``decimation``-th record.

    Events from skipped steps are merged into the next kept record.
    """
    out = []
    pending: list[str] = []
    dt = sim.dt
    for n in range(n_steps):
        rec = sim.advance(state, wind(n * dt))
        if decimation == 1:
            out.append(rec)
            continue
        pending.extend(rec.events)
        if n % decimation == 0:
            out.append(rec._replace(events=tuple(pending)))
            pending = []
    return out


def run(scenario) -> list[TraceRecord]:
    """Simulate a validated ``Scenario`` over [0, T]."""
    params = scenario.microgrid_params()
    sim = Simulator(params, scenario.dt, scenario.ramp_limits, scenario.switching_block)
    wind = scenario.wind_function()
    p_e0 = None if scenario.initial_power_pu is None else scenario.initial_power_pu * params.p_base
    state = sim.initial_state(wind(0.0), p_e0)
    n_steps = int(round(scenario.duration / scenario.dt)) + 1
    return simulate(sim, state, wind, n_steps, scenario.decimation)
