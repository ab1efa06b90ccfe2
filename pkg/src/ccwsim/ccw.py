"""Clone, censor and weight for an "initiate by ``window_end``" regimen.

The engine works on columnar arrays; :class:`CloneSet` presents them as a
sequence of :class:`CloneRecord`.  Weights are nonparametric: the
probability of remaining uncensored is a proportion within each baseline
covariate stratum.

Two weighting schemes are provided:

``limited``
    The uncensored probability is estimated only among clones that had not
    initiated before the window end.  Window-end initiators receive its
    inverse; earlier initiators keep weight 1.
``all_initiator``
    Every uncensored clone at the window end contributes to, and receives,
    the inverse probability of remaining uncensored.

Pass ``exact=True`` to :func:`estimate_weights` to carry weights as
:class:`fractions.Fraction`; the risk estimators then compute in exact
rational arithmetic.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cohort import NONE, Cohort, PersonPath, RiskEstimate
from .errors import ConfigurationError, EstimationError, PositivityError


class WeightScheme(str, enum.Enum):
    LIMITED = "limited"
    ALL_INITIATOR = "all_initiator"


@dataclass(frozen=True)
class CloneRecord:
    person_id: int
    strata: object
    start_time: int | None
    censor_period: int | None
    event_period: int | None
    weight: tuple


class CloneSet(Sequence):
    """Clones of one regimen with their per-period weights."""

    def __init__(self, person_id, strata, start_time, censor_period, event_period, weights, window_end):
        self.person_id = person_id
        self.strata = strata
        self.start_time = start_time
        self.censor_period = censor_period
        self.event_period = event_period
        self.weights = weights
        self.window_end = window_end

    @property
    def horizon(self) -> int:
        return self.weights.shape[1]

    def __len__(self):
        return len(self.person_id)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        opt = lambda v: None if v == NONE else int(v)
        s = self.strata[i]
        return CloneRecord(
            int(self.person_id[i]),
            s.item() if isinstance(s, np.generic) else s,
            opt(self.start_time[i]),
            opt(self.censor_period[i]),
            opt(self.event_period[i]),
            tuple(self.weights[i].tolist()),
        )

    def with_weights(self, weights) -> "CloneSet":
        return CloneSet(
            self.person_id, self.strata, self.start_time, self.censor_period,
            self.event_period, weights, self.window_end,
        )

    def at_risk(self, t: int) -> np.ndarray:
        """Mask of clones event-free and uncensored at the start of period ``t``."""
        no_event_yet = (self.event_period == NONE) | (self.event_period >= t)
        uncensored = (self.censor_period == NONE) | (self.censor_period > t)
        return no_event_yet & uncensored


def _columns(paths):
    if isinstance(paths, Cohort):
        return paths.ids, paths.c, paths.start_time, paths.event_period, paths.horizon
    paths = list(paths)
    horizon = max(
        [p.event_period + 1 for p in paths if p.event_period is not None]
        + [p.start_time + 1 for p in paths if p.start_time is not None]
        + [0]
    )
    cohort = Cohort.from_paths(paths, horizon)
    return cohort.ids, cohort.c, cohort.start_time, cohort.event_period, None


def clone_and_censor(
    paths: Cohort | Iterable[PersonPath],
    window_end: int,
    horizon: int | None = None,
) -> CloneSet:
    """Clone everyone into the "initiate by ``window_end``" regimen.

    Clones still event-free and unexposed at ``window_end`` are censored
    there.  All weights start at 1.
    """
    if window_end < 1:
        raise ConfigurationError(f"window_end must be >= 1, got {window_end}")
    ids, c, start, event, data_horizon = _columns(paths)
    if horizon is None:
        horizon = data_horizon if data_horizon is not None else 0
    horizon = max(int(horizon), window_end + 1)
    if len(ids) and event.max(initial=NONE) >= horizon:
        raise ConfigurationError(f"events recorded beyond horizon {horizon}")
    event_free = (event == NONE) | (event >= window_end)
    not_started = (start == NONE) | (start > window_end)
    censor = np.where(event_free & not_started, window_end, NONE)
    weights = np.ones((len(ids), horizon))
    return CloneSet(ids, c, start, censor, event, weights, window_end)


def _stratum_codes(strata):
    if strata.dtype != object:
        labels, codes = np.unique(strata, return_inverse=True)
        return list(labels.tolist()), codes
    index: dict = {}
    codes = np.fromiter((index.setdefault(s, len(index)) for s in strata), dtype=np.int64, count=len(strata))
    return list(index), codes


def estimate_weights(
    clones: CloneSet,
    scheme: WeightScheme | str,
    window_end: int | None = None,
    tie_tolerance: int = 0,
    exact: bool = False,
) -> CloneSet:
    """Inverse probability of remaining uncensored at the window end.

    The weight-estimation risk set holds clones event-free at the start of
    ``window_end``; clones with earlier events keep weight 1.  Under the
    limited scheme a clone counts as a window-end initiator when its start
    period lies in ``[window_end - tie_tolerance, window_end]``.

    Raises
    ------
    PositivityError
        If a stratum needing weights has nobody remaining uncensored.
    """
    scheme = WeightScheme(scheme)
    window_end = clones.window_end if window_end is None else window_end
    if window_end != clones.window_end:
        raise ConfigurationError("window_end differs from the one used for censoring")
    if tie_tolerance < 0:
        raise ConfigurationError("tie_tolerance must be >= 0")
    start, event = clones.start_time, clones.event_period
    in_risk_set = (event == NONE) | (event >= window_end)
    started = start != NONE
    uncensored = in_risk_set & (clones.censor_period == NONE)
    if scheme is WeightScheme.LIMITED:
        early = started & (start < window_end - tie_tolerance)
        pool = in_risk_set & ~early
        receivers = pool & uncensored
    else:
        pool = in_risk_set
        receivers = uncensored

    labels, codes = _stratum_codes(clones.strata)
    n_pool = np.bincount(codes[pool], minlength=len(labels))
    n_recv = np.bincount(codes[receivers], minlength=len(labels))
    for k, label in enumerate(labels):
        if n_pool[k] and not n_recv[k]:
            raise PositivityError(
                f"{scheme.value} weights: stratum {label!r} has {n_pool[k]} clone(s) at risk "
                f"at period {window_end} but none remain uncensored"
            )

    if exact:
        weights = np.empty(clones.weights.shape, dtype=object)
        weights[:] = Fraction(1)
        factor = np.empty(len(labels), dtype=object)
        factor[:] = [Fraction(int(p), int(r)) if r else Fraction(1) for p, r in zip(n_pool, n_recv)]
    else:
        weights = np.ones(clones.weights.shape)
        factor = np.divide(n_pool, n_recv, out=np.ones(len(labels)), where=n_recv > 0)
    weights[receivers, window_end:] = factor[codes[receivers]][:, None]
    censored = clones.censor_period != NONE
    weights[censored, window_end:] = Fraction(0) if exact else 0.0
    return clones.with_weights(weights)


def weighted_risk(clones: CloneSet, horizon: int) -> RiskEstimate:
    """Weighted discrete-time cumulative incidence, ``1 - prod(1 - h_t)``.

    ``h_t`` is the weighted event mass over the weighted at-risk mass in
    period ``t``; censored clones leave the risk set at their censoring
    period.
    """
    _check_horizon(clones, horizon)
    survival = 1
    for t in range(horizon):
        risk_set = clones.at_risk(t)
        w = clones.weights[risk_set, t]
        den = w.sum()
        if den == 0:
            if survival != 0:
                raise EstimationError(f"weighted risk set is empty at period {t} while survival is positive")
            break
        num = w[clones.event_period[risk_set] == t].sum()
        survival = survival * (1 - num / den)
    return RiskEstimate(_scalar(1 - survival), horizon, "ccw:hazard_product", len(clones))


def brute_force_risk(clones: CloneSet, horizon: int) -> RiskEstimate:
    """Direct weighted proportion of events by ``horizon``.

    Valid only when clones are censored at the window end and nowhere else:
    events before the window end count with weight 1 and every uncensored
    clone reaching the window end counts with its post-window weight.
    """
    _check_horizon(clones, horizon)
    we = clones.window_end
    cens, event = clones.censor_period, clones.event_period
    if ((cens != NONE) & (cens != we)).any():
        raise ConfigurationError("brute_force_risk requires censoring only at the window end")
    has_event = (event != NONE) & (event < horizon)
    if horizon <= we:
        num, den = int(has_event.sum()), len(clones)
    else:
        early = has_event & (event < we)
        reach = ~early & (cens == NONE)
        post = clones.weights[:, we]
        num = int(early.sum()) + post[reach & has_event].sum()
        den = int(early.sum()) + post[reach].sum()
    if den == 0:
        raise EstimationError("weighted cohort mass is zero")
    exact = clones.weights.dtype == object
    risk = Fraction(num) / Fraction(den) if exact else num / den
    return RiskEstimate(_scalar(risk), horizon, "ccw:direct_proportion", len(clones))


def _scalar(value):
    return value if isinstance(value, Fraction) else float(value)


def _check_horizon(clones, horizon):
    if not 1 <= horizon <= clones.horizon:
        raise ConfigurationError(f"horizon must lie in [1, {clones.horizon}], got {horizon}")


def ccw_risk(
    paths: Cohort | Iterable[PersonPath],
    scheme: WeightScheme | str,
    window_end: int = 1,
    horizon: int = 3,
    tie_tolerance: int = 0,
) -> RiskEstimate:
    """Clone, censor, weight and estimate in one call."""
    clones = clone_and_censor(paths, window_end, horizon)
    clones = estimate_weights(clones, scheme, tie_tolerance=tie_tolerance)
    est = weighted_risk(clones, horizon)
    return RiskEstimate(est.risk, horizon, f"ccw:{WeightScheme(scheme).value}", len(clones))


def weight_trajectories(clones: CloneSet) -> list[tuple]:
    """Audit rows ``(person_id, period, at_risk, event, censored, weight)``.

    One row for every period from 0 until the clone's event, censoring or
    the horizon.
    """
    rows = []
    for i in range(len(clones)):
        e, cp = int(clones.event_period[i]), int(clones.censor_period[i])
        last = clones.horizon - 1 if e == NONE else min(e, clones.horizon - 1)
        if cp != NONE:
            last = min(last, cp)
        for t in range(last + 1):
            is_censored = cp != NONE and t >= cp
            rows.append((
                int(clones.person_id[i]), t,
                int(not is_censored), int(e == t and not is_censored),
                int(is_censored), clones.weights[i, t],
            ))
    return rows
