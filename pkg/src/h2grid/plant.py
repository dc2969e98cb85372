"""Physical component models: rotor aerodynamics, drivetrain, CS-fed rectifier,
interleaved buck converter, electrolyzer load and the IPBC input DC bus.

All functions are pure; state records are immutable and every step returns a
new record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .params import K_IDC, K_UAC, K_UAC1, K_UAEL, TurbineParams, cp_surface


class DomainError(ValueError):
    """An argument lies outside the physical domain of an operation."""


def _nonneg(name: str, value: float) -> None:
    if not value >= 0.0:  # also rejects NaN
        raise DomainError(f"{name} must be >= 0, got {value!r}")


def _duty(d: float) -> None:
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"duty cycle must lie in [0, 1], got {d!r}")


# -- turbine -----------------------------------------------------------------


def mppt_power(omega_m: float, params: TurbineParams) -> float:
    """Maximum mechanical power along the optimal tip-speed-ratio locus (W)."""
    _nonneg("omega_m", omega_m)
    return 0.5 * params.cp_max * params.air_density * math.pi * params.blade_radius**2 * (
        omega_m * params.blade_radius / params.lambda_opt
    ) ** 3


def power_coefficient(lam: float, beta: float, params: TurbineParams) -> float:
    return cp_surface(lam, beta, params.cp_coeffs)


def aero_power(v_wind: float, omega_m: float, beta: float, params: TurbineParams) -> float:
    _nonneg("v_wind", v_wind)
    _nonneg("beta", beta)
    if v_wind == 0.0:
        return 0.0
    lam = omega_m * params.blade_radius / v_wind
    cp = cp_surface(lam, beta, params.cp_coeffs)
    return 0.5 * cp * params.air_density * params.swept_area * v_wind**3


def capped_torque(power: float, omega_m: float, params: TurbineParams) -> float:
    """T = P/omega with the low-speed singularity removed.

    Below the cut-in speed omega is replaced by the cut-in speed, and the
    magnitude is limited to ``torque_cap_pu`` times rated torque.
    """
    w_min = params.cutin_speed_pu * params.rated_speed
    t = power / max(omega_m, w_min)
    t_cap = params.torque_cap_pu * params.rated_mech_power / params.rated_speed
    return max(-t_cap, min(t, t_cap))


def aero_torque(v_wind: float, omega_m: float, beta: float, params: TurbineParams) -> float:
    """Aerodynamic shaft torque (N m)."""
    return capped_torque(aero_power(v_wind, omega_m, beta, params), omega_m, params)


@dataclass(frozen=True)
class DrivetrainState:
    omega_m: float  # rad/s
    inertia: float  # kg m^2
    mech_torque: float = 0.0  # N m
    em_torque: float = 0.0  # N m
    theta: float = 0.0  # rad, accumulated shaft angle
    clamped: bool = False  # speed limit hit on the last step

    def omega_pu(self, params: TurbineParams) -> float:
        return self.omega_m / params.rated_speed


def drivetrain_step(state: DrivetrainState, dt: float, omega_max: float = math.inf) -> DrivetrainState:
    """Explicit single-mass swing step with torques held over ``dt``.

    Speed is clamped to ``[0, omega_max]``; ``clamped`` reports whether the
    clamp engaged.  The shaft angle is advanced with the trapezoidal rule so
    that kinetic-energy gain equals T_m * dtheta exactly when T_e = 0.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    w0 = state.omega_m
    w1 = w0 + (state.mech_torque - state.em_torque) / state.inertia * dt
    clamped = False
    if w1 > omega_max:
        w1, clamped = omega_max, True
    elif w1 < 0.0:
        w1, clamped = 0.0, True
    theta = state.theta + 0.5 * (w0 + w1) * dt
    return replace(state, omega_m=w1, theta=theta, clamped=clamped)


# -- rectifier and buck ------------------------------------------------------


def rectifier_dc_current(I_ac: float) -> float:
    """Average DC current of the CS-fed bridge from the RMS line current."""
    _nonneg("I_ac", I_ac)
    return K_IDC * I_ac


def rectifier_ac_voltage(U_dc: float) -> tuple[float, float]:
    """(RMS line voltage, RMS fundamental line voltage) for an average DC voltage."""
    _nonneg("U_dc", U_dc)
    return K_UAC * U_dc, K_UAC1 * U_dc


@dataclass(frozen=True)
class RectifierPort:
    I_dc: float
    U_dc: float
    I_ac: float
    U_ac: float
    U_ac_1: float

    @classmethod
    def from_ac_current(cls, I_ac: float, U_dc: float) -> "RectifierPort":
        u_ac, u_ac1 = rectifier_ac_voltage(U_dc)
        return cls(rectifier_dc_current(I_ac), U_dc, I_ac, u_ac, u_ac1)

    @property
    def dc_power(self) -> float:
        return self.U_dc * self.I_dc

    @property
    def ac_power(self) -> float:
        return math.sqrt(3.0) * self.U_ac_1 * self.I_ac


def buck_output(d: float, u_in: float) -> float:
    _duty(d)
    _nonneg("u_in", u_in)
    return d * u_in


@dataclass(frozen=True)
class BuckState:
    d: float
    u_in: float

    def __post_init__(self):
        _duty(self.d)
        _nonneg("u_in", self.u_in)

    @property
    def u_out(self) -> float:
        return self.d * self.u_in


# -- electrolyzer ------------------------------------------------------------


def ael_voltage_from_duty(d: float, U_ac: float) -> float:
    """Stack voltage seen through the rectifier and buck: U_dc = U_ac/K_UAC, then d*U_dc."""
    _duty(d)
    _nonneg("U_ac", U_ac)
    return K_UAEL * d * U_ac


def equivalent_resistance(R_AEL: float, d: float) -> float:
    """Resistance seen from the AC bus; ``math.inf`` means disconnected (d = 0)."""
    if not R_AEL > 0:
        raise DomainError("R_AEL must be positive")
    _duty(d)
    if d == 0.0:
        return math.inf
    return R_AEL / (K_UAEL * d) ** 2


def ael_power(U_ac: float, R_eq: float) -> float:
    _nonneg("U_ac", U_ac)
    if not R_eq > 0:
        raise DomainError("R_eq must be positive")
    if math.isinf(R_eq):
        return 0.0
    return U_ac * U_ac / R_eq


# -- IPBC input DC bus -------------------------------------------------------


@dataclass(frozen=True)
class DcBusState:
    capacitance: float  # F
    energy: float  # J
    undervoltage: bool = False

    @classmethod
    def at_voltage(cls, capacitance: float, u: float) -> "DcBusState":
        return cls(capacitance, 0.5 * capacitance * u * u)

    @property
    def u_dc2(self) -> float:
        return math.sqrt(2.0 * self.energy / self.capacitance)


def dc_bus_step(state: DcBusState, p_in: float, p_out: float, dt: float) -> DcBusState:
    """Advance the stored energy by (p_in - p_out) dt; clamp at zero with an undervoltage flag."""
    if dt <= 0 or state.capacitance <= 0:
        raise DomainError("dt and capacitance must be positive")
    e = state.energy + (p_in - p_out) * dt
    if e < 0.0:
        return replace(state, energy=0.0, undervoltage=True)
    return replace(state, energy=e, undervoltage=False)
