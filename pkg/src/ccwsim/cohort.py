"""Cohort simulation under the natural course and hypothetical interventions.

Two oracles live here: :func:`mc_risk`, a Monte Carlo g-formula that
simulates the intervened cohort forward with the true treatment and outcome
models, and :func:`closed_form_risk`, the exact risk for interventions that
fix everyone's start period.

All interventions of one replicate read the same per-person uniforms (see
:mod:`ccwsim.streams`), so risks under different interventions, and CCW
estimates computed on the natural cohort of replicate 0, are evaluated with
common random numbers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from collections.abc import Iterable, Iterator, Sequence

import numpy as np

from . import streams
from .errors import ConfigurationError, DegenerateStratumError
from .scenarios import ExposureState, ScenarioSpec, hazard

NONE = -1  # sentinel for "no start" / "no event" in columnar arrays


@dataclass(frozen=True)
class TreatmentModel:
    """Natural-course initiation process.

    ``p_init[t][c]`` is the probability of starting in period ``t`` for a
    person with covariate ``c`` who has not started and is event-free.  The
    number of rows fixes the follow-up horizon.
    """

    p_c1: float = 0.5
    p_init: tuple = ((0.2, 0.4), (0.3, 0.3), (0.0, 0.0))

    def __post_init__(self):
        rows = tuple(tuple(float(p) for p in row) for row in self.p_init)
        object.__setattr__(self, "p_init", rows)
        object.__setattr__(self, "p_c1", float(self.p_c1))
        if not rows:
            raise ConfigurationError("treatment model needs at least one period")
        if not 0.0 <= self.p_c1 <= 1.0:
            raise ConfigurationError(f"p_c1 must lie in [0, 1], got {self.p_c1}")
        for t, row in enumerate(rows):
            if len(row) != 2:
                raise ConfigurationError(f"p_init[{t}] needs one entry per C level, got {row}")
            if not all(0.0 <= p <= 1.0 for p in row):
                raise ConfigurationError(f"p_init[{t}] entries must lie in [0, 1], got {row}")

    @property
    def horizon(self) -> int:
        return len(self.p_init)


DEFAULT_TREATMENT = TreatmentModel()


@dataclass(frozen=True)
class PersonPath:
    """One individual: baseline covariate, start period and event period.

    ``start_time`` and ``event_period`` are ``None`` when the person never
    initiates, or stays event-free through the horizon.  ``c`` is the binary
    confounder in simulated data, or a tuple of baseline covariates for
    external data with several covariate columns.
    """

    id: int
    c: object
    start_time: int | None
    event_period: int | None

    def __post_init__(self):
        if self.start_time is not None and self.start_time < 0:
            raise ConfigurationError(f"person {self.id}: negative start_time")
        if self.event_period is not None and self.event_period < 0:
            raise ConfigurationError(f"person {self.id}: negative event_period")
        if (
            self.start_time is not None
            and self.event_period is not None
            and self.start_time > self.event_period
        ):
            raise ConfigurationError(f"person {self.id}: initiation after the absorbing event")

    def state(self, t: int) -> ExposureState:
        return ExposureState.from_start(self.start_time, t)


INTERVENTION_KINDS = ("natural", "start_at_0", "start_at_1", "feasible", "impossible", "delayed_window")


@dataclass(frozen=True)
class Intervention:
    """A hypothetical intervention on treatment initiation.

    ``window_end`` is the period at which the feasible, impossible and
    delayed-window interventions force remaining non-initiators to start;
    ``window_start`` only matters for ``delayed_window``.  ``history``
    selects whether the impossible intervention borrows exposure histories
    within covariate strata (``"conditional"``) or from all natural
    initiators (``"marginal"``).
    """

    kind: str
    window_start: int = 0
    window_end: int = 1
    history: str = "conditional"

    def __post_init__(self):
        if self.kind not in INTERVENTION_KINDS:
            raise ConfigurationError(
                f"unknown intervention {self.kind!r}; choose from {', '.join(INTERVENTION_KINDS)}"
            )
        if self.history not in ("conditional", "marginal"):
            raise ConfigurationError(f"history must be 'conditional' or 'marginal', got {self.history!r}")
        if self.window_end < 0 or not 0 <= self.window_start <= self.window_end:
            raise ConfigurationError(
                f"need 0 <= window_start <= window_end, got {self.window_start}, {self.window_end}"
            )
        if self.kind in ("feasible", "impossible") and self.window_end < 1:
            raise ConfigurationError(f"{self.kind} intervention needs window_end >= 1")

    @classmethod
    def natural(cls):
        return cls("natural")

    @classmethod
    def start_at_0(cls):
        return cls("start_at_0")

    @classmethod
    def start_at_1(cls):
        return cls("start_at_1")

    @classmethod
    def feasible(cls, window_end: int = 1):
        return cls("feasible", window_end=window_end)

    @classmethod
    def impossible(cls, window_end: int = 1, history: str = "conditional"):
        return cls("impossible", window_end=window_end, history=history)

    @classmethod
    def delayed_window(cls, window_start: int, window_end: int):
        return cls("delayed_window", window_start=window_start, window_end=window_end)

    @property
    def label(self) -> str:
        if self.kind == "delayed_window":
            return f"delayed_window({self.window_start},{self.window_end})"
        return self.kind

    def policy(self, t: int) -> tuple[bool, bool]:
        """(natural initiation allowed, force remaining starters) at period ``t``."""
        k = self.kind
        if k == "natural":
            return True, False
        if k in ("start_at_0", "start_at_1"):
            return False, t == int(k[-1])
        if k == "feasible":
            return t < self.window_end, t == self.window_end
        if k == "impossible":
            return t <= self.window_end, t == self.window_end
        return self.window_start <= t < self.window_end, t == self.window_end


class Cohort(Sequence):
    """Columnar collection of :class:`PersonPath`.

    Arrays use ``-1`` for a missing start or event.  ``history_start`` is set
    only by the impossible intervention: it is the (pseudo) start period used
    for cumulative and lagged exposure from the forcing period onward.
    """

    def __init__(self, ids, c, start_time, event_period, horizon, history_start=None, covariate_names=("C",)):
        self.covariate_names = tuple(covariate_names)
        self.ids = np.asarray(ids, dtype=np.int64)
        self.c = np.asarray(c)
        self.start_time = np.asarray(start_time, dtype=np.int64)
        self.event_period = np.asarray(event_period, dtype=np.int64)
        self.horizon = int(horizon)
        self.history_start = None if history_start is None else np.asarray(history_start, dtype=np.int64)
        n = len(self.ids)
        if not (len(self.c) == len(self.start_time) == len(self.event_period) == n):
            raise ValueError("cohort columns must have equal length")

    @classmethod
    def from_paths(cls, paths: Iterable[PersonPath], horizon: int, covariate_names=("C",)) -> "Cohort":
        paths = list(paths)
        cs = [p.c for p in paths]
        if all(isinstance(v, (int, np.integer)) for v in cs):
            c = np.asarray(cs, dtype=np.int64)
        else:
            c = np.empty(len(cs), dtype=object)
            c[:] = cs
        return cls(
            [p.id for p in paths],
            c,
            [NONE if p.start_time is None else p.start_time for p in paths],
            [NONE if p.event_period is None else p.event_period for p in paths],
            horizon,
            covariate_names=covariate_names,
        )

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        s, e = int(self.start_time[i]), int(self.event_period[i])
        c = self.c[i]
        return PersonPath(
            int(self.ids[i]),
            c.item() if isinstance(c, np.generic) else c,
            None if s == NONE else s,
            None if e == NONE else e,
        )

    def __iter__(self) -> Iterator[PersonPath]:
        for i in range(len(self)):
            yield self[i]

    def events_by(self, horizon: int | None = None) -> int:
        horizon = self.horizon if horizon is None else horizon
        return int(np.count_nonzero((self.event_period != NONE) & (self.event_period < horizon)))

    def risk(self, horizon: int | None = None) -> float:
        return self.events_by(horizon) / len(self)


@dataclass(frozen=True)
class RiskEstimate:
    risk: object
    horizon: int
    method: str
    n: int
    reps: int = 1
    scenario: str | None = None

    def __float__(self):
        return float(self.risk)


def _borrow_history(c, start, donors, forced, u, history):
    """Draw pseudo start periods for forced starters from natural initiators."""
    hist = start.copy()
    if history == "marginal":
        groups = [(None, np.ones(len(c), dtype=bool))]
    else:
        groups = [(g, c == g) for g in np.unique(c[forced])]
    for g, member in groups:
        f = forced & member
        if not f.any():
            continue
        d = donors & member
        if not d.any():
            where = "the cohort" if g is None else f"stratum C={g}"
            raise DegenerateStratumError(
                f"impossible intervention: no natural initiators in {where} to borrow exposure history from"
            )
        values, counts = np.unique(start[d], return_counts=True)
        cdf = np.cumsum(counts) / counts.sum()
        idx = np.minimum(np.searchsorted(cdf, u[f], side="right"), len(values) - 1)
        hist[f] = values[idx]
    return hist


def _simulate(spec: ScenarioSpec, tm: TreatmentModel, iv: Intervention, u: np.ndarray, ids) -> Cohort:
    H = tm.horizon
    n = len(u)
    c = (u[:, streams.COL_C] < tm.p_c1).astype(np.int64)
    start = np.full(n, NONE, dtype=np.int64)
    event = np.full(n, NONE, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    hist = None
    p_init = np.asarray(tm.p_init)
    for t in range(H):
        natural, force = iv.policy(t)
        if natural:
            pending = alive & (start == NONE)
            start[pending & (u[:, streams.col_init(t)] < p_init[t][c])] = t
        if force:
            forced = alive & (start == NONE)
            if iv.kind == "impossible":
                donors = alive & (start != NONE)
                hist = _borrow_history(c, start, donors, forced, u[:, streams.col_pseudo(H)], iv.history)
            start[forced] = t
        hs = hist if hist is not None and t >= iv.window_end else start
        x = (start != NONE) & (start <= t)
        on = (hs != NONE) & (hs <= t)
        cum_x = np.where(on, t - hs + 1, 0)
        prev_x = on & (hs <= t - 1)
        h = spec.hazard_array(c, x.astype(np.int64), cum_x, prev_x.astype(np.int64), t)
        ev = alive & (u[:, streams.col_event(t, H)] < h)
        event[ev] = t
        alive &= ~ev
    return Cohort(ids, c, start, event, H, history_start=hist)


def _check_n(n):
    if int(n) != n or n < 1:
        raise ConfigurationError(f"cohort size must be a positive integer, got {n}")


def simulate_natural(
    spec: ScenarioSpec,
    tm: TreatmentModel,
    n: int,
    seed: int,
    replicate: int = 0,
    workers: int = 1,
) -> Cohort:
    """Simulate ``n`` people under the natural course.

    Each period an event-free, unexposed person initiates with probability
    ``tm.p_init[t][c]``; initiation affects that same period's hazard.  The
    result depends only on ``(seed, replicate, n)``.
    """
    return simulate_intervention(spec, tm, Intervention.natural(), n, seed, replicate, workers)


def simulate_intervention(
    spec: ScenarioSpec,
    tm: TreatmentModel,
    iv: Intervention,
    n: int,
    seed: int,
    replicate: int = 0,
    workers: int = 1,
) -> Cohort:
    """Simulate ``n`` people under intervention ``iv``.

    The impossible intervention draws each forced starter's exposure history
    from the start periods of natural initiators who are event-free at the
    forcing period (within the same C stratum unless ``iv.history`` is
    ``"marginal"``).  The period-0 hazard of a forced starter still uses
    their true, unexposed state.
    """
    _check_n(n)
    u = streams.cohort_uniforms(seed, replicate, n, tm.horizon, workers)
    return _simulate(spec, tm, iv, u, np.arange(n))


def mc_risk(
    spec: ScenarioSpec,
    tm: TreatmentModel,
    iv: Intervention,
    n: int,
    reps: int,
    seed: int,
    horizon: int | None = None,
    workers: int = 1,
) -> RiskEstimate:
    """Monte Carlo risk by ``horizon`` averaged over ``reps`` replicate cohorts.

    Replicate ``r`` uses the stream keyed by ``(seed, r)``.  Event counts are
    summed as integers, so the result does not depend on ``workers``.
    """
    _check_n(n)
    if reps < 1:
        raise ConfigurationError(f"reps must be >= 1, got {reps}")
    horizon = tm.horizon if horizon is None else horizon

    def one(r):
        return simulate_intervention(spec, tm, iv, n, seed, r).events_by(horizon)

    if workers > 1 and reps > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(one, range(reps)))
    else:
        counts = [one(r) for r in range(reps)]
    return RiskEstimate(sum(counts) / (n * reps), horizon, f"mc:{iv.label}", n, reps, spec.name)


def closed_form_risk(
    spec: ScenarioSpec,
    p_c1: float,
    start_time: int | None,
    horizon: int = 3,
) -> float:
    """Exact risk when everyone starts at ``start_time`` (``None`` = never)."""
    risk = 0.0
    for c, weight in ((0, 1.0 - p_c1), (1, p_c1)):
        survival = 1.0
        for t in range(horizon):
            survival *= 1.0 - hazard(spec, c, ExposureState.from_start(start_time, t))
        risk += weight * (1.0 - survival)
    return risk
