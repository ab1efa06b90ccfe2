"""Outcome models for the discrete-time simulation.

Each scenario is a linear-additive probability model for the per-period
event hazard:

    h = intercept + beta_c * C + [t >= onset_period] * beta_x * X
        + beta_cumx * cumX + beta_prevx * prevX

``cumX`` counts exposed periods including the current one and ``prevX`` is
the exposure indicator of the immediately preceding period.  Hazards that
fall outside [0, 1] raise :class:`ConfigurationError`; they are never clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ConfigurationError

DEFAULT_HORIZON = 3


@dataclass(frozen=True)
class ExposureState:
    """Exposure summary for one person in one period.

    Exposure is persistent, so the state is fully determined by the start
    period; see :meth:`from_start`.
    """

    x: int
    cum_x: int
    prev_x: int
    t: int

    def __post_init__(self):
        if self.x not in (0, 1) or self.prev_x not in (0, 1):
            raise ConfigurationError(f"x and prev_x must be binary: {self}")
        if self.t < 0:
            raise ConfigurationError(f"period must be nonnegative: {self}")
        if self.x == 0:
            if self.cum_x != 0 or self.prev_x != 0:
                raise ConfigurationError(f"unexposed state with exposure history: {self}")
        else:
            if not 1 <= self.cum_x <= self.t + 1:
                raise ConfigurationError(f"cum_x must lie in [1, t+1] when exposed: {self}")
            if self.prev_x != int(self.cum_x >= 2):
                raise ConfigurationError(f"prev_x inconsistent with cum_x: {self}")

    @classmethod
    def from_start(cls, start_time: int | None, t: int) -> "ExposureState":
        """State at period ``t`` for someone who started at ``start_time``."""
        if start_time is None or start_time > t:
            return cls(0, 0, 0, t)
        return cls(1, t - start_time + 1, int(start_time <= t - 1), t)


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    intercept: float = 0.05
    beta_c: float = 0.0
    beta_x: float = 0.0
    beta_cumx: float = 0.0
    beta_prevx: float = 0.0
    onset_period: int = 0

    def __post_init__(self):
        for f in ("intercept", "beta_c", "beta_x", "beta_cumx", "beta_prevx"):
            value = getattr(self, f)
            if not math.isfinite(value):
                raise ConfigurationError(f"scenario {self.name!r}: {f} must be finite, got {value}")
        if self.onset_period < 0:
            raise ConfigurationError(f"scenario {self.name!r}: onset_period must be >= 0")

    def coefficients(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "name"}

    def hazard(self, c: int, state: ExposureState) -> float:
        return hazard(self, c, state)

    def hazard_array(self, c, x, cum_x, prev_x, t: int) -> np.ndarray:
        """Vectorised hazard for period ``t`` over arrays of individuals."""
        c, x, cum_x, prev_x = (np.asarray(a) for a in (c, x, cum_x, prev_x))
        h = self.intercept + self.beta_c * c + self.beta_cumx * cum_x + self.beta_prevx * prev_x
        if t >= self.onset_period:
            h = h + self.beta_x * x
        h = np.broadcast_to(np.asarray(h, dtype=float), np.broadcast_shapes(c.shape, x.shape))
        bad = (h < 0.0) | (h > 1.0) | ~np.isfinite(h)
        if bad.any():
            i = np.flatnonzero(bad.ravel())[0]
            pick = lambda a: int(np.broadcast_to(a, h.shape).ravel()[i])
            _raise_out_of_range(self, pick(c), pick(x), pick(cum_x), pick(prev_x), t, float(h.ravel()[i]))
        return h

    def validate(self, horizon: int = DEFAULT_HORIZON) -> "ScenarioSpec":
        """Check the hazard lies in [0, 1] on every reachable state."""
        for c, state in reachable_states(horizon):
            hazard(self, c, state)
        return self


def _raise_out_of_range(spec, c, x, cum_x, prev_x, t, value):
    raise ConfigurationError(
        f"scenario {spec.name!r} gives hazard {value!r} outside [0, 1] at "
        f"(c={c}, x={x}, cum_x={cum_x}, prev_x={prev_x}, t={t}); "
        f"coefficients {spec.coefficients()}"
    )


def hazard(spec: ScenarioSpec, c: int, state: ExposureState) -> float:
    """Event probability in period ``state.t`` given survival to that period."""
    h = spec.intercept + spec.beta_c * c + spec.beta_cumx * state.cum_x + spec.beta_prevx * state.prev_x
    if state.t >= spec.onset_period:
        h += spec.beta_x * state.x
    if not 0.0 <= h <= 1.0:
        _raise_out_of_range(spec, c, state.x, state.cum_x, state.prev_x, state.t, h)
    return h


def reachable_states(horizon: int = DEFAULT_HORIZON) -> Iterator[tuple[int, ExposureState]]:
    """All (c, state) pairs a persistent-exposure path can visit."""
    for c in (0, 1):
        for t in range(horizon):
            yield c, ExposureState(0, 0, 0, t)
            for cum in range(1, t + 2):
                yield c, ExposureState(1, cum, int(cum >= 2), t)


CATALOG: dict[str, ScenarioSpec] = {
    "base": ScenarioSpec("base", 0.05, beta_c=0.1, beta_x=0.1, beta_cumx=0.04, beta_prevx=0.05),
    "A": ScenarioSpec("A", 0.05, beta_c=0.1),
    "B": ScenarioSpec("B", 0.05, beta_c=0.1, beta_x=0.1),
    "C": ScenarioSpec("C", 0.05, beta_c=0.1, beta_x=0.1, onset_period=1),
    "D": ScenarioSpec("D", 0.05, beta_c=0.1, beta_prevx=0.1),
    "E": ScenarioSpec("E", 0.05, beta_c=0.1, beta_cumx=0.05),
}

SCENARIO_ORDER = tuple(CATALOG)


def get_scenario(name: str) -> ScenarioSpec:
    try:
        return CATALOG[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown scenario {name!r}; choose from {', '.join(CATALOG)}"
        ) from None


_FLOAT_KEYS = ("intercept", "beta_c", "beta_x", "beta_cumx", "beta_prevx")


def parse_scenario_text(text: str, horizon: int = DEFAULT_HORIZON) -> ScenarioSpec:
    """Build a scenario from ``key=value`` lines.

    Blank lines and ``#`` comments are ignored.  Recognised keys are ``name``,
    ``onset_period`` and the coefficient names of :class:`ScenarioSpec`;
    omitted coefficients default to zero (intercept to 0.05).
    """
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise ConfigurationError(f"scenario line {lineno}: expected key=value, got {raw!r}")
        if key in values:
            raise ConfigurationError(f"scenario line {lineno}: duplicate key {key!r}")
        try:
            if key == "name":
                values[key] = value
            elif key == "onset_period":
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            else:
                raise ConfigurationError(f"scenario line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"scenario line {lineno}: bad value for {key}: {value!r}") from None
    values.setdefault("name", "custom")
    return ScenarioSpec(**values).validate(horizon)


def load_scenario(path: str | Path, horizon: int = DEFAULT_HORIZON) -> ScenarioSpec:
    return parse_scenario_text(Path(path).read_text(), horizon)
