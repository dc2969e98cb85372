"""Central control: N/E mode state machine, steady-state AEL scheduling and
overvoltage protection.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .modes import Branch, Mode, ModeKind
from .params import OperatingEnvelope

__all__ = [
    "Binding",
    "CommandSet",
    "Mode",
    "ModeKind",
    "MscSelector",
    "ProtectionHistory",
    "ScheduleResult",
    "Snapshot",
    "SupervisorState",
    "TripEvent",
    "mode_decision",
    "n_mode_conditions",
    "protection_check",
    "ramp_cap",
    "schedule_steady_state",
    "scheduled_power",
    "supervise",
]


class Binding(str, enum.Enum):
    MPPT = "MPPT"
    RATED = "Rated"
    RAMP_CAP = "RampCap"
    DISCONNECTED = "Disconnected"


@dataclass(frozen=True)
class ScheduleResult:
    P_AEL_result: float
    binding: Binding


def ramp_cap(P_prev: float, P_rated: float, P_min: float, delta: float, dt: float, ramp_limits: bool = True) -> float:
    """Highest AEL power reachable from ``P_prev`` in ``dt``.

    A disconnected stack restarts at minimum load, so the cap never falls
    below ``P_min``.
    """
    if not ramp_limits:
        return math.inf
    return max(P_prev + delta * P_rated * dt, P_min)


def scheduled_power(P_mppt: float, P_min: float, P_rated: float, rc: float) -> tuple[float, Binding]:
    if P_mppt < P_min:
        return 0.0, Binding.DISCONNECTED
    # ties resolve in the order MPPT, Rated, RampCap
    candidates = ((P_mppt, Binding.MPPT), (P_rated, Binding.RATED), (rc, Binding.RAMP_CAP))
    value, tag = candidates[0]
    for v, b in candidates[1:]:
        if v < value:
            value, tag = v, b
    return value, tag


def schedule_steady_state(P_mppt: float, P_prev: float, env: OperatingEnvelope, dt: float) -> ScheduleResult:
    """Maximum AEL power subject to balance, ramp and range constraints.

    ``P_mppt`` is the MPPT power available at the AEL terminals.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    delta = min(env.delta_ael, env.delta_wind)
    rc = ramp_cap(P_prev, env.P_AEL_rated, env.P_AEL_min, delta, dt, env.ramp_limits)
    return ScheduleResult(*scheduled_power(P_mppt, env.P_AEL_min, env.P_AEL_rated, rc))


def n_mode_conditions(P_mppt: float, P_W_rate: float, env: OperatingEnvelope) -> bool:
    """Power window and ramp condition for normal operation."""
    in_window = env.P_AEL_min < P_mppt < env.P_AEL_rated
    if not env.ramp_limits:
        return in_window
    return in_window and abs(P_W_rate) <= env.ramp_rate * (1.0 + env.rate_tolerance)


def mode_decision(P_mppt: float, P_W_rate: float, env: OperatingEnvelope, current: Mode, t: float) -> Mode:
    """N when the normal-operation conditions hold, E otherwise.

    A switch is only taken once ``mode_dwell`` has elapsed since the last
    one; Tripped never changes.
    """
    if current.is_tripped:
        return current
    want = ModeKind.N if n_mode_conditions(P_mppt, P_W_rate, env) else ModeKind.E
    if want is current.kind or t - current.entered_at < env.mode_dwell:
        return current
    return Mode(want, t)


class TripEvent(NamedTuple):
    t: float
    U_ac: float


@dataclass
class ProtectionHistory:
    above_since: float | None = None


def protection_check(U_ac: float, env: OperatingEnvelope, history: ProtectionHistory, t: float) -> TripEvent | None:
    if U_ac > env.U_trip:
        if history.above_since is None:
            history.above_since = t
        if t - history.above_since >= env.trip_dwell - 1e-12:
            return TripEvent(t, U_ac)
    else:
        history.above_since = None
    return None


class MscSelector(str, enum.Enum):
    MPPT = "mppt"
    DROOP = "droop"
    OFF = "off"


class Snapshot(NamedTuple):
    P_mppt: float  # W, MPPT power referred to the AEL terminals
    P_W: float  # W, DFIG output over the last period
    U_ac: float  # V RMS
    P_AEL: float  # W


@dataclass(frozen=True)
class CommandSet:
    mode: ModeKind
    P_AEL_ref: float
    msc: MscSelector
    disconnect: bool
    branch: Branch
    events: tuple[str, ...] = ()


@dataclass
class SupervisorState:
    mode: Mode
    window: int  # samples in the rate estimator
    switching_block: bool = False
    protection: ProtectionHistory = field(default_factory=ProtectionHistory)
    history: deque = field(default_factory=deque)
    last_ref: float = 0.0

    def push_power(self, P_W: float, dt: float) -> float:
        """Record the latest P_W and return its backward-difference rate (W/s)."""
        h = self.history
        if h.maxlen != self.window + 1:
            self.history = h = deque(h, maxlen=self.window + 1)
        h.append(P_W)
        if len(h) < 2:
            return 0.0
        return (h[-1] - h[0]) / ((len(h) - 1) * dt)


def supervise(snap: Snapshot, t: float, state: SupervisorState, env: OperatingEnvelope, dt: float) -> CommandSet:
    """One control period of the central controller."""
    events = []
    rate = state.push_power(snap.P_W, dt)
    if not state.mode.is_tripped and protection_check(snap.U_ac, env, state.protection, t):
        events.append(f"mode:{state.mode.kind.value}->Tripped")
        events.append("trip")
        state.mode = Mode(ModeKind.TRIPPED, t)
    if not state.mode.is_tripped and not state.switching_block:
        new = mode_decision(snap.P_mppt, rate, env, state.mode, t)
        if new.kind is not state.mode.kind:
            events.append(f"mode:{state.mode.kind.value}->{new.kind.value}")
            if new.kind is ModeKind.E:
                state.last_ref = snap.P_AEL
        state.mode = new

    kind = state.mode.kind
    if kind is ModeKind.TRIPPED:
        return CommandSet(kind, 0.0, MscSelector.OFF, True, Branch.VOLTAGE, tuple(events))
    if kind is ModeKind.N:
        state.last_ref = snap.P_AEL
        return CommandSet(kind, 0.0, MscSelector.MPPT, False, Branch.VOLTAGE, tuple(events))
    sched = schedule_steady_state(snap.P_mppt, state.last_ref, env, dt)
    state.last_ref = sched.P_AEL_result
    off = sched.binding is Binding.DISCONNECTED
    return CommandSet(
        kind,
        sched.P_AEL_result,
        MscSelector.OFF if off else MscSelector.DROOP,
        off,
        Branch.POWER,
        tuple(events),
    )
