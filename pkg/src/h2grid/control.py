"""Regulators: pitch, MSC power loop and frequency channel, LSC DC-link loop,
and the dual-branch IPBC controller with its E-mode droop law.

Controllers are discrete-time and run once per engine step with their
outputs held over the step.  ``PiState`` and the composite controller
records are mutable plain data owned by one simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .modes import Branch, Mode, ModeKind
from .params import DroopParams, ElectrolyzerModel

TWO_PI = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)


@dataclass
class PiState:
    """Discrete PI regulator with output limits and conditional-integration anti-windup.

    While the output is saturated the integrator is frozen whenever the error
    pushes further into saturation, and it is never allowed outside the
    output range.
    """

    kp: float
    ki: float
    integrator: float = 0.0
    out_min: float = -math.inf
    out_max: float = math.inf
    anti_windup: bool = True
    saturated: bool = False

    def update(self, error: float, dt: float) -> float:
        i_old = self.integrator
        i_new = i_old + self.ki * error * dt
        u = self.kp * error + i_new
        hi = u > self.out_max
        lo = u < self.out_min
        if self.anti_windup and (hi or lo):
            if (hi and error > 0.0) or (lo and error < 0.0):
                i_new = i_old
            i_new = min(max(i_new, min(self.out_min, 0.0)), max(self.out_max, 0.0))
            if abs(i_new) > abs(i_old):
                i_new = i_old
        self.integrator = i_new
        self.saturated = hi or lo
        return min(max(self.kp * error + i_new, self.out_min), self.out_max)

    def preload(self, output: float, error: float = 0.0) -> None:
        """Set the integrator so that the next output with ``error`` equals ``output``."""
        self.integrator = output - self.kp * error

    def reset(self) -> None:
        self.integrator = 0.0
        self.saturated = False


# -- pitch ---------------------------------------------------------------------


@dataclass
class PitchState:
    pi: PiState
    beta: float = 0.0  # deg
    rate: float = 10.0  # deg/s
    rate_limited: bool = False


def make_pitch(kp: float, ki: float, beta_max: float, rate: float) -> PitchState:
    return PitchState(PiState(kp, ki, out_min=0.0, out_max=beta_max), rate=rate)


def pitch_step(omega_m: float, omega_limit: float, state: PitchState, dt: float) -> float:
    """Pitch angle (deg) from rotor speed in p.u.; PI above ``omega_limit``, zero below."""
    cmd = state.pi.update(omega_m - omega_limit, dt)
    dmax = state.rate * dt
    delta = cmd - state.beta
    state.rate_limited = abs(delta) > dmax
    if state.rate_limited:
        delta = math.copysign(dmax, delta)
    state.beta = min(max(state.beta + delta, 0.0), state.pi.out_max)
    return state.beta


# -- MSC -----------------------------------------------------------------------


def msc_power_reference(mode: Mode | ModeKind, P_mppt: float, U_ac: float, droop: DroopParams) -> float:
    """Stator active-power reference: MPPT in N-mode, P-U droop in E-mode."""
    kind = mode.kind if isinstance(mode, Mode) else mode
    if kind is ModeKind.N:
        return P_mppt
    if kind is ModeKind.E:
        return droop.P_AEL_rated + droop.m * (SQRT2 * U_ac - SQRT2 * droop.U_ac_rated)
    if kind is ModeKind.TRIPPED:
        return 0.0
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class MscState:
    P_l: float = 0.0  # W delivered
    Q_l: float = 0.0  # var
    P_l_ref: float = 0.0
    Q_l_ref: float = 0.0
    tau_p: float = 0.02  # s
    rate_limited: bool = False


def msc_loop_step(
    state: MscState, P_ref: float, dt: float, ramp_rate: float = math.inf
) -> tuple[MscState, float]:
    """Closed MSC power loop reduced to a first-order lag, then rate-limited.

    ``ramp_rate`` is the admissible |dP/dt| in W/s.
    """
    if dt <= 0 or state.tau_p <= 0:
        raise ValueError("dt and tau_p must be positive")
    a = math.exp(-dt / state.tau_p)
    target = P_ref + (state.P_l - P_ref) * a
    delta = target - state.P_l
    lim = ramp_rate * dt
    limited = abs(delta) > lim
    if limited:
        delta = math.copysign(lim, delta)
    p_new = state.P_l + delta
    q_new = state.Q_l_ref + (state.Q_l - state.Q_l_ref) * a
    return replace(state, P_l=p_new, Q_l=q_new, P_l_ref=P_ref, rate_limited=limited), p_new


# -- frequency channel ---------------------------------------------------------


@dataclass(frozen=True)
class FrequencyChannel:
    omega_s_ref: float  # rad/s
    omega_r: float  # rad/s electrical, latest sample
    omega_r_prev: float  # previous sample
    omega_sl: float  # rad/s
    theta_sl: float = 0.0  # rad in [0, 2 pi)
    theta_s: float = 0.0
    omega_s_measured: float = 0.0

    @classmethod
    def start(cls, omega_s_ref: float, omega_r: float) -> "FrequencyChannel":
        return cls(omega_s_ref, omega_r, omega_r, omega_s_ref - omega_r, 0.0, 0.0, omega_s_ref)

    @property
    def frequency(self) -> float:
        return self.omega_s_measured / TWO_PI


def frequency_step(ch: FrequencyChannel, omega_r_now: float, dt: float) -> FrequencyChannel:
    """One control period of the slip-frequency channel.

    The slip command is built from the rotor frequency of the previous
    sample, so the stator frequency seen on the bus is off by exactly the
    rotor-frequency change over one period.
    """
    omega_sl = ch.omega_s_ref - ch.omega_r
    theta_sl = math.fmod(ch.theta_sl + omega_sl * dt, TWO_PI)
    if theta_sl < 0.0:
        theta_sl += TWO_PI
    omega_s = omega_r_now + omega_sl
    theta_s = math.fmod(ch.theta_s + omega_s * dt, TWO_PI)
    if theta_s < 0.0:
        theta_s += TWO_PI
    return FrequencyChannel(ch.omega_s_ref, omega_r_now, ch.omega_r, omega_sl, theta_sl, theta_s, omega_s)


# -- LSC -----------------------------------------------------------------------


def lsc_step(u_dc1: float, u_dc1_ref: float, state: PiState, dt: float, p_base: float = 1.0) -> float:
    """Corrective line-side power (W, exported to the AC bus) holding the B2B DC link.

    The engine adds a rotor-power feedforward on top of this; the same law
    runs in both operating modes.
    """
    return p_base * state.update((u_dc1 - u_dc1_ref) / u_dc1_ref, dt)


# -- IPBC ----------------------------------------------------------------------


class IpbcMeasurement(NamedTuple):
    u_dc2: float  # V
    P_AEL: float  # W
    I_AEL: float  # A


@dataclass
class IpbcControllerState:
    branch: Branch
    voltage_pi: PiState
    power_pi: PiState
    current_pi: PiState
    d: float = 0.0
    u_dc2_ref: float = 0.0
    P_AEL_ref: float = 0.0
    last_jump: float = 0.0  # |delta d| at the most recent branch transfer


def make_ipbc(ctl, u_dc2_ref: float) -> IpbcControllerState:
    """Build the IPBC controller from a ``ControlParams`` record."""
    return IpbcControllerState(
        branch=Branch.VOLTAGE,
        voltage_pi=PiState(ctl.ipbc_v_kp, ctl.ipbc_v_ki, out_min=0.0),
        power_pi=PiState(ctl.ipbc_p_kp, ctl.ipbc_p_ki, out_min=0.0, out_max=1.5),
        current_pi=PiState(ctl.ipbc_i_kp, ctl.ipbc_i_ki, out_min=0.0, out_max=1.0),
        u_dc2_ref=u_dc2_ref,
    )


def duty_cap(u_dc2: float, ael: ElectrolyzerModel) -> float:
    """Largest duty that keeps the AEL at or below rated power."""
    if u_dc2 <= 0.0:
        return 1.0
    return min(1.0, ael.voltage_for_power(ael.P_rated) / u_dc2)


def _rated_current(ael: ElectrolyzerModel) -> float:
    return ael.current(ael.voltage_for_power(ael.P_rated))


def _voltage_output_for_duty(d: float, ctl: IpbcControllerState, ael: ElectrolyzerModel, p_base: float) -> float:
    return ael.power(d * ctl.u_dc2_ref) / p_base


def _transfer(ctl: IpbcControllerState, branch: Branch, meas: IpbcMeasurement, ael, p_base) -> None:
    # bumpless: preload the newly active integrators from the last applied duty
    if branch is Branch.VOLTAGE:
        e = (meas.u_dc2 - ctl.u_dc2_ref) / ctl.u_dc2_ref
        ctl.voltage_pi.preload(_voltage_output_for_duty(ctl.d, ctl, ael, p_base), e)
    else:
        i_pu = meas.I_AEL / _rated_current(ael)
        ctl.power_pi.preload(i_pu, (ctl.P_AEL_ref - meas.P_AEL) / ael.P_rated)
        ctl.current_pi.preload(ctl.d, 0.0)
    ctl.branch = branch


def ipbc_step(
    ctl: IpbcControllerState,
    meas: IpbcMeasurement,
    branch: Branch,
    dt: float,
    ael: ElectrolyzerModel,
    p_base: float,
    P_AEL_ref: float = 0.0,
    disconnect: bool = False,
) -> float:
    """Duty cycle for the next period.

    ``Branch.VOLTAGE``: PI on the DC-bus voltage error.  Its output is a
    power-like command y (p.u., the AEL power at reference voltage) mapped
    to duty through the static stack model, which keeps the loop gain
    independent of the operating point.  ``Branch.POWER``: outer power PI
    feeding an inner current PI.  Either way the duty is capped so the AEL
    never exceeds rated power.
    """
    d_prev = ctl.d
    ctl.P_AEL_ref = P_AEL_ref
    if disconnect:
        ctl.d = 0.0
        ctl.branch = branch
        for pi in (ctl.voltage_pi, ctl.power_pi, ctl.current_pi):
            pi.reset()
        return 0.0
    jumped = branch is not ctl.branch
    if jumped:
        _transfer(ctl, branch, meas, ael, p_base)
    d_max = duty_cap(meas.u_dc2, ael)
    if branch is Branch.VOLTAGE:
        pi = ctl.voltage_pi
        pi.out_max = _voltage_output_for_duty(d_max, ctl, ael, p_base)
        y = pi.update((meas.u_dc2 - ctl.u_dc2_ref) / ctl.u_dc2_ref, dt)
        d = ael.voltage_for_power(y * p_base) / ctl.u_dc2_ref
    else:
        i_ref = ctl.power_pi.update((P_AEL_ref - meas.P_AEL) / ael.P_rated, dt)
        ctl.current_pi.out_max = d_max
        d = ctl.current_pi.update(i_ref - meas.I_AEL / _rated_current(ael), dt)
    ctl.d = min(max(d, 0.0), d_max)
    if jumped:
        ctl.last_jump = abs(ctl.d - d_prev)
    return ctl.d


def ael_power_reference(
    P_mppt: float,
    P_prev: float,
    limits: ElectrolyzerModel,
    dt: float,
    delta_wind: float = math.inf,
    ramp_limits: bool = True,
) -> float:
    """E-mode AEL power reference (rated cap, disconnect below minimum, ramp cap)."""
    from .supervisor import ramp_cap, scheduled_power

    rc = ramp_cap(P_prev, limits.P_rated, limits.P_min, min(limits.ramp_limit, delta_wind), dt, ramp_limits)
    return scheduled_power(P_mppt, limits.P_min, limits.P_rated, rc)[0]
