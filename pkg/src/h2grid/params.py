"""Parameter sets for the wind-to-electrolyzer microgrid.

Everything is SI internally.  Per-unit bases are the DFIG rated power, the
rated AC line voltage (RMS) and the rated rotor speed.  ``MicrogridParams``
is the single configuration root; the smaller records used by the plant,
control and supervisor modules (``TurbineParams``, ``ElectrolyzerModel``,
``DroopParams``, ``OperatingEnvelope``) are derived views of it.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

from scipy.optimize import minimize_scalar

# Exact CS-fed rectifier constants (120-degree conduction square wave).
K_IDC = 3.0 * math.sqrt(2.0) / math.pi  # I_dc / I_ac            ~1.3505
K_UAC = math.sqrt(2.0 / 3.0)  # U_ac / U_dc                     ~0.8165
K_UAC1 = math.sqrt(6.0) / math.pi  # U_ac,1 / U_dc              ~0.7797
K_UAEL = 1.0 / K_UAC  # U_AEL / (d U_ac)                        ~1.2247

# Default Cp surface: c1..c6 of the exponential approximation, then the
# lambda_i coupling terms  1/lambda_i = 1/(lambda + c7 beta) - c8/(1 + c9 beta^3).
DEFAULT_CP_COEFFS = (0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068, 0.08, 0.035, 0.0)


class ParameterError(ValueError):
    """Raised when a parameter set violates one of its invariants."""


def cp_surface(lam: float, beta: float, c: tuple) -> float:
    """Power coefficient for tip-speed ratio ``lam`` and pitch ``beta`` (deg), clipped at 0."""
    c1, c2, c3, c4, c5, c6, c7, c8, c9 = c
    denom = lam + c7 * beta
    if denom <= 0.0:
        return 0.0
    inv = 1.0 / denom - c8 / (1.0 + c9 * beta**3)
    cp = c1 * (c2 * inv - c3 * beta - c4) * math.exp(-c5 * inv) + c6 * lam
    return cp if cp > 0.0 else 0.0


@dataclass(frozen=True)
class TurbineParams:
    air_density: float = 1.225  # kg/m^3
    blade_radius: float = 36.77  # m
    cp_coeffs: tuple = DEFAULT_CP_COEFFS
    rated_wind_speed: float = 11.7  # m/s
    rated_mech_power: float = 2.0e6  # W
    speed_upper_limit: float = 1.2  # p.u.
    inertia_h: float = 1.5  # s, on (rated_mech_power, rated speed)
    cutin_speed_pu: float = 0.05  # torque = P/omega is capped below this speed
    torque_cap_pu: float = 2.5
    # derived in __post_init__
    cp_max: float = field(init=False)
    lambda_opt: float = field(init=False)
    rated_speed: float = field(init=False)  # rad/s
    inertia: float = field(init=False)  # kg m^2

    def __post_init__(self):
        object.__setattr__(self, "cp_coeffs", tuple(float(x) for x in self.cp_coeffs))
        if len(self.cp_coeffs) != 9:
            raise ParameterError("turbine.cp_coeffs needs 9 entries (c1..c9)")
        if self.air_density <= 0 or self.blade_radius <= 0:
            raise ParameterError("turbine: air_density and blade_radius must be positive")
        res = minimize_scalar(
            lambda lam: -cp_surface(lam, 0.0, self.cp_coeffs),
            bounds=(1.0, 20.0),
            method="bounded",
            options={"xatol": 1e-10},
        )
        object.__setattr__(self, "lambda_opt", float(res.x))
        object.__setattr__(self, "cp_max", cp_surface(res.x, 0.0, self.cp_coeffs))
        if not 0.0 < self.cp_max < 16.0 / 27.0:
            raise ParameterError(f"turbine: cp_max={self.cp_max:.4f} outside (0, Betz)")
        w = self.lambda_opt * self.rated_wind_speed / self.blade_radius
        object.__setattr__(self, "rated_speed", w)
        object.__setattr__(self, "inertia", 2.0 * self.inertia_h * self.rated_mech_power / w**2)

    @property
    def swept_area(self) -> float:
        return math.pi * self.blade_radius**2

    @property
    def mppt_gain(self) -> float:
        """k in P_mppt = k * omega_m^3 (W s^3/rad^3)."""
        return 0.5 * self.cp_max * self.air_density * self.swept_area * (self.blade_radius / self.lambda_opt) ** 3


@dataclass(frozen=True)
class GridParams:
    rated_power: float = 2.0e6  # DFIG rated power, W (power base)
    rated_voltage: float = 690.0  # AC line voltage RMS, V (voltage base)
    frequency: float = 50.0  # Hz
    gen_power_max_pu: float = 1.0
    efficiency: float = 0.4 / 0.48  # P_AEL / P_W at steady state


@dataclass(frozen=True)
class ElectrolyzerParams:
    capacity_ratio: float = 1.0  # AEL rated power / DFIG rated power
    rated_voltage: float = 600.0  # V at rated power
    reverse_voltage: float = 0.0  # V
    min_load: float = 0.10  # fraction of rated
    ramp_limit: float = 0.05  # fraction of rated per second


@dataclass(frozen=True)
class DcLinkParams:
    h_dc2: float = 0.05  # stored energy at rated voltage / rated power, s
    h_dc1: float = 0.02
    u_dc1_ref: float = 1150.0  # V, back-to-back DC link


@dataclass(frozen=True)
class ControlParams:
    # pitch
    pitch_kp: float = 60.0  # deg per p.u. speed error
    pitch_ki: float = 120.0  # deg per (p.u. s)
    pitch_rate: float = 10.0  # deg/s
    beta_max: float = 30.0  # deg
    pitch_margin: float = 0.01  # p.u. below the speed limit where pitch regulates
    # MSC
    msc_tau: float = 0.02  # s
    delta_wind: float = 0.05  # fraction of AEL rated per second
    # LSC
    lsc_kp: float = 5.0  # p.u. power per p.u. voltage error
    lsc_ki: float = 50.0
    # IPBC
    ipbc_v_kp: float = 10.0
    ipbc_v_ki: float = 50.0
    ipbc_p_kp: float = 0.5
    ipbc_p_ki: float = 20.0
    ipbc_i_kp: float = 0.05
    ipbc_i_ki: float = 60.0
    # droop
    droop_x: float = 0.1
    u_max_pu: float = 1.10
    u_filter_tau: float = 0.01  # s, droop voltage measurement


@dataclass(frozen=True)
class SupervisorParams:
    mode_dwell: float = 0.2  # s
    u_trip_pu: float = 1.15
    trip_dwell: float = 0.05  # s
    rate_window: float = 0.1  # s, backward difference for dP_W/dt
    rate_tolerance: float = 0.01  # relative slack on the ramp comparison


@dataclass(frozen=True)
class AuditParams:
    u_band_min_pu: float = 0.90
    power_balance_tol: float = 1e-6  # p.u.
    ramp_tol: float = 1e-9  # p.u./s
    freq_tol: float = 1e-9  # Hz


SECTIONS = {
    "turbine": TurbineParams,
    "grid": GridParams,
    "electrolyzer": ElectrolyzerParams,
    "dc_link": DcLinkParams,
    "control": ControlParams,
    "supervisor": SupervisorParams,
    "audit": AuditParams,
}


def section_fields(cls) -> list[str]:
    return [f.name for f in dataclasses.fields(cls) if f.init]


@dataclass(frozen=True)
class ElectrolyzerModel:
    R_AEL: float  # ohm
    U_rev: float  # V
    P_rated: float  # W
    P_min: float  # W
    ramp_limit: float  # fraction of rated per second

    def __post_init__(self):
        if self.R_AEL <= 0:
            raise ParameterError("electrolyzer resistance must be positive")
        if self.U_rev < 0:
            raise ParameterError("electrolyzer reverse voltage must be nonnegative")
        if not 0.0 < self.P_min < self.P_rated:
            raise ParameterError("need 0 < P_min < P_rated")

    def power(self, u_ael: float) -> float:
        """Terminal power at stack voltage ``u_ael``."""
        if u_ael <= self.U_rev:
            return 0.0
        return u_ael * (u_ael - self.U_rev) / self.R_AEL

    def current(self, u_ael: float) -> float:
        if u_ael <= self.U_rev:
            return 0.0
        return (u_ael - self.U_rev) / self.R_AEL

    def voltage_for_power(self, p: float) -> float:
        """Inverse of :meth:`power` on the conducting branch."""
        if p <= 0.0:
            return 0.0
        return 0.5 * (self.U_rev + math.sqrt(self.U_rev**2 + 4.0 * p * self.R_AEL))


@dataclass(frozen=True)
class DroopParams:
    P_AEL_rated: float
    U_ac_rated: float
    U_ac_max: float
    x: float

    def __post_init__(self):
        if not self.U_ac_max > self.U_ac_rated:
            raise ParameterError("droop needs U_ac_max > U_ac_rated")
        if not 0.0 < self.x < 1.0:
            raise ParameterError("droop x must lie in (0, 1)")

    @property
    def m(self) -> float:
        s2 = math.sqrt(2.0)
        return (self.P_AEL_rated - self.x * self.P_AEL_rated) / (s2 * self.U_ac_rated - s2 * self.U_ac_max)


@dataclass(frozen=True)
class OperatingEnvelope:
    P_AEL_min: float
    P_AEL_rated: float
    delta_ael: float  # 1/s
    delta_wind: float  # 1/s
    U_trip: float  # V
    trip_dwell: float
    mode_dwell: float
    ramp_limits: bool = True
    rate_tolerance: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.P_AEL_min < self.P_AEL_rated:
            raise ParameterError("envelope needs 0 < P_AEL_min < P_AEL_rated")
        if self.delta_ael <= 0 or self.delta_wind <= 0:
            raise ParameterError("ramp rates must be positive")

    @property
    def ramp_rate(self) -> float:
        """Admissible |dP/dt| in W/s, ``inf`` when ramp limits are off."""
        if not self.ramp_limits:
            return math.inf
        return min(self.delta_ael, self.delta_wind) * self.P_AEL_rated


@dataclass(frozen=True)
class MicrogridParams:
    turbine: TurbineParams = field(default_factory=TurbineParams)
    grid: GridParams = field(default_factory=GridParams)
    electrolyzer: ElectrolyzerParams = field(default_factory=ElectrolyzerParams)
    dc_link: DcLinkParams = field(default_factory=DcLinkParams)
    control: ControlParams = field(default_factory=ControlParams)
    supervisor: SupervisorParams = field(default_factory=SupervisorParams)
    audit: AuditParams = field(default_factory=AuditParams)

    def __post_init__(self):
        ctl, sup, el = self.control, self.supervisor, self.electrolyzer
        if not 0.0 < el.capacity_ratio <= 2.0:
            raise ParameterError("electrolyzer.capacity_ratio must lie in (0, 2]")
        if not sup.u_trip_pu > ctl.u_max_pu > 1.0:
            raise ParameterError("need supervisor.u_trip_pu > control.u_max_pu > 1")
        if not 0.0 < self.grid.efficiency <= 1.0:
            raise ParameterError("grid.efficiency must lie in (0, 1]")

    # -- bases ---------------------------------------------------------------
    @property
    def p_base(self) -> float:
        return self.grid.rated_power

    @property
    def u_base(self) -> float:
        return self.grid.rated_voltage

    @property
    def u_dc2_rated(self) -> float:
        return self.grid.rated_voltage / K_UAC

    @property
    def c_dc2(self) -> float:
        return 2.0 * self.dc_link.h_dc2 * self.p_base / self.u_dc2_rated**2

    @property
    def c_dc1(self) -> float:
        return 2.0 * self.dc_link.h_dc1 * self.p_base / self.dc_link.u_dc1_ref**2

    @property
    def omega_s_ref(self) -> float:
        return 2.0 * math.pi * self.grid.frequency

    @property
    def p_gen_max(self) -> float:
        return self.grid.gen_power_max_pu * self.p_base

    # -- derived views -------------------------------------------------------
    def electrolyzer_model(self) -> ElectrolyzerModel:
        el = self.electrolyzer
        p_rated = el.capacity_ratio * self.p_base
        u = el.rated_voltage
        if u <= el.reverse_voltage:
            raise ParameterError("electrolyzer rated voltage must exceed the reverse voltage")
        r = u * (u - el.reverse_voltage) / p_rated
        return ElectrolyzerModel(r, el.reverse_voltage, p_rated, el.min_load * p_rated, el.ramp_limit)

    def droop(self) -> DroopParams:
        u = self.grid.rated_voltage
        return DroopParams(self.electrolyzer_model().P_rated, u, self.control.u_max_pu * u, self.control.droop_x)

    def envelope(self, ramp_limits: bool = True) -> OperatingEnvelope:
        ael = self.electrolyzer_model()
        sup = self.supervisor
        return OperatingEnvelope(
            P_AEL_min=ael.P_min,
            P_AEL_rated=ael.P_rated,
            delta_ael=ael.ramp_limit,
            delta_wind=self.control.delta_wind,
            U_trip=sup.u_trip_pu * self.grid.rated_voltage,
            trip_dwell=sup.trip_dwell,
            mode_dwell=sup.mode_dwell,
            ramp_limits=ramp_limits,
            rate_tolerance=sup.rate_tolerance,
        )

    # -- (de)serialisation ---------------------------------------------------
    def to_dict(self) -> dict[str, dict[str, Any]]:
        out = {}
        for name, cls in SECTIONS.items():
            sec = getattr(self, name)
            out[name] = {}
            for f in section_fields(cls):
                v = getattr(sec, f)
                out[name][f] = list(v) if isinstance(v, tuple) else v
        return out

    def with_overrides(self, overlay: dict[str, dict[str, Any]]) -> "MicrogridParams":
        """Return a copy with ``{section: {field: value}}`` applied."""
        kwargs = {}
        for name, changes in overlay.items():
            if name not in SECTIONS:
                raise ParameterError(f"unknown parameter section '{name}'")
            sec = getattr(self, name)
            allowed = section_fields(SECTIONS[name])
            bad = [k for k in changes if k not in allowed]
            if bad:
                raise ParameterError(f"unknown field(s) in '{name}': {', '.join(bad)}")
            values = {f: getattr(sec, f) for f in allowed}
            values.update(changes)
            kwargs[name] = SECTIONS[name](**values)
        return dataclasses.replace(self, **kwargs)
