"""Scenario definitions: YAML schema, validation, wind profiles and the
built-in case studies.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np
import yaml

from .params import SECTIONS, MicrogridParams, ParameterError, section_fields


class ScenarioError(ValueError):
    """Validation failed; ``errors`` lists every problem found, each prefixed with its key path."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))


# -- wind profiles -----------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    v: float = 9.0


@dataclass(frozen=True)
class Steps:
    """Piecewise-constant wind; each (t, v) holds from t until the next entry."""

    steps: tuple = ((0.0, 9.0),)


@dataclass(frozen=True)
class Weibull:
    """Weibull draws every ``sample_interval`` seconds, smoothed by a first-order low-pass."""

    shape: float = 2.0
    scale: float | None = None
    mean: float | None = None
    tau: float = 2.0  # s
    sample_interval: float = 1.0  # s
    seed: int = 0

    @property
    def scale_param(self) -> float:
        if self.scale is not None:
            return self.scale
        return self.mean / math.gamma(1.0 + 1.0 / self.shape)


WindProfile = Union[Constant, Steps, Weibull]


class WeibullSampler:
    """Deterministic realisation of a ``Weibull`` profile over [0, duration].

    The draws are held piecewise constant and filtered exactly, so the value
    at any t is independent of the simulation step.
    """

    def __init__(self, profile: Weibull, duration: float):
        self.profile = profile
        n = int(math.floor(duration / profile.sample_interval)) + 2
        rng = np.random.default_rng(profile.seed)
        self.draws = profile.scale_param * rng.weibull(profile.shape, size=n)
        a = math.exp(-profile.sample_interval / profile.tau)
        y = np.empty(n)
        y[0] = self.draws[0]
        for k in range(1, n):
            y[k] = self.draws[k - 1] + (y[k - 1] - self.draws[k - 1]) * a
        self.knots = y

    def __call__(self, t: float) -> float:
        p = self.profile
        k = min(int(t // p.sample_interval), len(self.draws) - 1)
        x = self.draws[k]
        return float(x + (self.knots[k] - x) * math.exp(-(t - k * p.sample_interval) / p.tau))


def generate_wind(profile: WindProfile, t: float, rng_state: WeibullSampler | None = None) -> float:
    """Wind speed (m/s) at time ``t``; Weibull profiles need their sampler as ``rng_state``."""
    if isinstance(profile, Constant):
        return profile.v
    if isinstance(profile, Steps):
        v = profile.steps[0][1]
        for ti, vi in profile.steps:
            if t >= ti:
                v = vi
            else:
                break
        return v
    if isinstance(profile, Weibull):
        if rng_state is None:
            raise ValueError("a Weibull profile needs a WeibullSampler")
        return rng_state(t)
    raise TypeError(f"unknown wind profile {profile!r}")


# -- scenario ------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    duration: float = 10.0  # s
    dt: float = 1e-3  # s
    decimation: int = 1
    wind: WindProfile = field(default_factory=Constant)
    capacity_ratio: float = 1.0
    ramp_limits: bool = False
    switching_block: bool = False
    initial_power_pu: float | None = None  # start the DFIG at this output instead of an equilibrium
    params: dict = field(default_factory=dict)  # {section: {field: value}} overlay

    def microgrid_params(self) -> MicrogridParams:
        overlay = {k: dict(v) for k, v in self.params.items()}
        overlay.setdefault("electrolyzer", {})["capacity_ratio"] = self.capacity_ratio
        return MicrogridParams().with_overrides(overlay)

    def wind_function(self):
        if isinstance(self.wind, Weibull):
            sampler = WeibullSampler(self.wind, self.duration)
            return sampler
        return lambda t: generate_wind(self.wind, t)

    @property
    def seed(self) -> int | None:
        return self.wind.seed if isinstance(self.wind, Weibull) else None

    def with_seed(self, seed: int) -> "Scenario":
        if not isinstance(self.wind, Weibull):
            return self
        return dataclasses.replace(self, wind=dataclasses.replace(self.wind, seed=seed))


# -- parsing -------------------------------------------------------------------

_TOP_KEYS = {f.name for f in dataclasses.fields(Scenario)}
_WIND_KEYS = {
    "constant": {"type", "v"},
    "steps": {"type", "steps"},
    "weibull": {"type", "shape", "scale", "mean", "tau", "sample_interval", "seed"},
}


def _number(errors, path, value, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        errors.append(f"{path}: expected a finite number, got {value!r}")
        return None
    if positive and not value > 0:
        errors.append(f"{path}: must be > 0, got {value!r}")
    if nonneg and not value >= 0:
        errors.append(f"{path}: must be >= 0, got {value!r}")
    return float(value)


def _parse_wind(doc, errors, unknown) -> WindProfile:
    if not isinstance(doc, dict):
        errors.append(f"wind: expected a mapping, got {doc!r}")
        return Constant()
    kind = doc.get("type", "constant")
    if kind not in _WIND_KEYS:
        errors.append(f"wind.type: must be one of {sorted(_WIND_KEYS)}, got {kind!r}")
        return Constant()
    for k in doc:
        if k not in _WIND_KEYS[kind]:
            unknown.append(f"wind.{k}")
    if kind == "constant":
        v = _number(errors, "wind.v", doc.get("v", 9.0), nonneg=True)
        return Constant(9.0 if v is None else v)
    if kind == "steps":
        raw = doc.get("steps")
        if not isinstance(raw, list) or not raw:
            errors.append("wind.steps: expected a non-empty list of [t, v] pairs")
            return Steps()
        steps = []
        for i, item in enumerate(raw):
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                errors.append(f"wind.steps[{i}]: expected [t, v], got {item!r}")
                continue
            t = _number(errors, f"wind.steps[{i}].t", item[0], nonneg=True)
            v = _number(errors, f"wind.steps[{i}].v", item[1], nonneg=True)
            if t is None or v is None:
                continue
            if steps and t <= steps[-1][0]:
                errors.append(f"wind.steps[{i}]: step time {t!r} not after previous time {steps[-1][0]!r}")
            steps.append((t, v))
        return Steps(tuple(steps)) if steps else Steps()
    # weibull
    shape = _number(errors, "wind.shape", doc.get("shape", 2.0), positive=True)
    scale, mean = doc.get("scale"), doc.get("mean")
    if (scale is None) == (mean is None):
        errors.append("wind: give exactly one of 'scale' or 'mean' for a Weibull profile")
    if scale is not None:
        scale = _number(errors, "wind.scale", scale, positive=True)
    if mean is not None:
        mean = _number(errors, "wind.mean", mean, positive=True)
    tau = _number(errors, "wind.tau", doc.get("tau", 2.0), positive=True)
    dts = _number(errors, "wind.sample_interval", doc.get("sample_interval", 1.0), positive=True)
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        errors.append(f"wind.seed: expected a non-negative integer, got {seed!r}")
        seed = 0
    return Weibull(shape or 2.0, scale, mean, tau or 2.0, dts or 1.0, seed)


def _check_overlay(doc, errors, unknown) -> dict:
    if not isinstance(doc, dict):
        errors.append(f"params: expected a mapping, got {doc!r}")
        return {}
    out = {}
    for sec, changes in doc.items():
        if sec not in SECTIONS:
            unknown.append(f"params.{sec}")
            continue
        if not isinstance(changes, dict):
            errors.append(f"params.{sec}: expected a mapping")
            continue
        allowed = section_fields(SECTIONS[sec])
        kept = {}
        for k, v in changes.items():
            if k not in allowed:
                unknown.append(f"params.{sec}.{k}")
            else:
                kept[k] = v
        if kept:
            out[sec] = kept
    return out


def parse_scenario(text: str, lenient: bool = False) -> Scenario:
    """Parse and validate a YAML scenario document.

    Unknown keys are errors unless ``lenient``, in which case they are
    dropped with a warning.  All problems are collected before raising.
    """
    try:
        doc = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ScenarioError([f"document: malformed YAML ({exc})"]) from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ScenarioError([f"document: expected a mapping at top level, got {type(doc).__name__}"])

    errors: list[str] = []
    unknown = [k for k in doc if k not in _TOP_KEYS]
    d = Scenario()
    name = doc.get("name", d.name)
    if not isinstance(name, str) or not name:
        errors.append(f"name: expected a non-empty string, got {name!r}")
        name = d.name
    duration = _number(errors, "duration", doc.get("duration", d.duration), positive=True)
    dt = _number(errors, "dt", doc.get("dt", d.dt), positive=True)
    if duration and dt and dt > duration:
        errors.append("dt: must not exceed duration")
    decimation = doc.get("decimation", d.decimation)
    if isinstance(decimation, bool) or not isinstance(decimation, int) or decimation < 1:
        errors.append(f"decimation: expected a positive integer, got {decimation!r}")
        decimation = 1
    ratio = _number(errors, "capacity_ratio", doc.get("capacity_ratio", d.capacity_ratio))
    if ratio is not None and not 0.0 < ratio <= 2.0:
        errors.append(f"capacity_ratio: must lie in (0, 2], got {ratio!r}")
    toggles = {}
    for key in ("ramp_limits", "switching_block"):
        val = doc.get(key, getattr(d, key))
        if not isinstance(val, bool):
            errors.append(f"{key}: expected true or false, got {val!r}")
            val = False
        toggles[key] = val
    p0 = doc.get("initial_power_pu")
    if p0 is not None:
        p0 = _number(errors, "initial_power_pu", p0, nonneg=True)
    wind = _parse_wind(doc.get("wind", {"type": "constant"}), errors, unknown)
    params = _check_overlay(doc.get("params", {}) or {}, errors, unknown)

    if unknown:
        msg = [f"{k}: unknown key" for k in unknown]
        if lenient:
            for m in msg:
                warnings.warn(m, stacklevel=2)
        else:
            errors.extend(msg)

    sc = None
    if not errors:
        sc = Scenario(
            name=name,
            duration=duration,
            dt=dt,
            decimation=decimation,
            wind=wind,
            capacity_ratio=ratio,
            ramp_limits=toggles["ramp_limits"],
            switching_block=toggles["switching_block"],
            initial_power_pu=p0,
            params=params,
        )
        try:
            sc.microgrid_params()
        except (ParameterError, TypeError, ValueError) as exc:
            errors.append(f"params: {exc}")
    if errors:
        raise ScenarioError(errors)
    return sc


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    w = sc.wind
    if isinstance(w, Constant):
        wind = {"type": "constant", "v": w.v}
    elif isinstance(w, Steps):
        wind = {"type": "steps", "steps": [[t, v] for t, v in w.steps]}
    else:
        wind = {"type": "weibull", "shape": w.shape}
        wind["scale" if w.scale is not None else "mean"] = w.scale if w.scale is not None else w.mean
        wind.update(tau=w.tau, sample_interval=w.sample_interval, seed=w.seed)
    out = {
        "name": sc.name,
        "duration": sc.duration,
        "dt": sc.dt,
        "decimation": sc.decimation,
        "capacity_ratio": sc.capacity_ratio,
        "ramp_limits": sc.ramp_limits,
        "switching_block": sc.switching_block,
        "initial_power_pu": sc.initial_power_pu,
        "wind": wind,
        "params": {k: dict(v) for k, v in sc.params.items()},
    }
    return out


def serialize_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)


# -- built-in case studies -------------------------------------------------------

_STEPS_1 = Steps(((0.0, 9.0), (3.0, 11.0), (7.0, 9.0)))

BUILTINS = {
    "case1": Scenario(name="case1", duration=10.0, wind=_STEPS_1, capacity_ratio=1.0),
    "case2": Scenario(
        name="case2", duration=10.0, wind=_STEPS_1, capacity_ratio=1.0, ramp_limits=True, initial_power_pu=0.15
    ),
    "case3": Scenario(
        name="case3",
        duration=10.0,
        wind=Steps(((0.0, 9.0), (3.0, 12.0))),
        capacity_ratio=0.6,
        switching_block=True,
    ),
    "case4": Scenario(name="case4", duration=10.0, wind=Steps(((0.0, 9.0), (2.0, 11.0), (5.0, 9.0))), capacity_ratio=0.6),
    "case5": Scenario(
        name="case5",
        duration=30.0,
        wind=Weibull(shape=2.0, mean=10.5, tau=2.0, sample_interval=1.0, seed=13),
        capacity_ratio=0.6,
    ),
}


def builtin(name: str) -> Scenario:
    try:
        return BUILTINS[name]
    except KeyError:
        raise ScenarioError([f"scenario: unknown built-in '{name}' (have {', '.join(BUILTINS)})"]) from None


def load_scenario(ref: str, lenient: bool = False) -> Scenario:
    """A built-in name or a path to a YAML file."""
    if ref in BUILTINS:
        return BUILTINS[ref]
    try:
        with open(ref, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError([f"scenario: cannot read '{ref}': {exc.strerror}"]) from None
    return parse_scenario(text, lenient=lenient)
