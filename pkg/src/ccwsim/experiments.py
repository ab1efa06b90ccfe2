"""Result surfaces: the scenario risk table, its decision matrix and initiation curves."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .ccw import WeightScheme, ccw_risk
from .cohort import (
    DEFAULT_TREATMENT,
    Cohort,
    Intervention,
    TreatmentModel,
    closed_form_risk,
    mc_risk,
    simulate_natural,
)
from .errors import ConfigurationError
from .scenarios import CATALOG, ScenarioSpec

DESK_N = 200_000
DESK_REPS = 5
FULL_N = 5_000_000
FULL_REPS = 10
EQUALITY_TOLERANCE = 0.004


def mc_tolerance(n: int, reps: int) -> float:
    """Four binomial standard errors at p = 0.5 for ``n * reps`` draws."""
    return 4.0 * math.sqrt(0.25 / (n * reps))


@dataclass(frozen=True)
class Table2Row:
    scenario: str
    limited_ccw: float
    all_initiator_ccw: float
    iv_start0: float
    iv_start1: float
    iv_feasible: float
    iv_impossible: float

    COLUMNS = (
        "limited_ccw", "all_initiator_ccw", "iv_start0", "iv_start1", "iv_feasible", "iv_impossible",
    )

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, k) for k in self.COLUMNS)


def pooled_natural_cohort(spec, tm, n, reps, seed) -> Cohort:
    """Union of the natural-course populations of replicates ``0 .. reps-1``."""
    parts = [simulate_natural(spec, tm, n, seed, r) for r in range(reps)]
    return Cohort(
        np.arange(n * reps),
        np.concatenate([p.c for p in parts]),
        np.concatenate([p.start_time for p in parts]),
        np.concatenate([p.event_period for p in parts]),
        tm.horizon,
    )


def table2_row(
    spec: ScenarioSpec,
    tm: TreatmentModel,
    n: int,
    reps: int,
    seed: int,
    ccw_pool: int | None = None,
) -> Table2Row:
    """One scenario: both CCW analyses and the four intervention oracles.

    The CCW cohort is the pooled natural course of the first ``ccw_pool``
    replicates (all ``reps`` by default), i.e. the same populations the
    oracles intervene on, so both sides share random numbers.
    """
    pool = reps if ccw_pool is None else ccw_pool
    if not 1 <= pool <= reps:
        raise ConfigurationError(f"ccw_pool must lie in [1, reps], got {pool}")
    horizon = tm.horizon
    cohort = pooled_natural_cohort(spec, tm, n, pool, seed)
    limited = ccw_risk(cohort, WeightScheme.LIMITED, 1, horizon).risk
    all_init = ccw_risk(cohort, WeightScheme.ALL_INITIATOR, 1, horizon).risk
    del cohort
    ivs = (Intervention.start_at_0(), Intervention.start_at_1(), Intervention.feasible(), Intervention.impossible())
    oracle = [mc_risk(spec, tm, iv, n, reps, seed).risk for iv in ivs]
    return Table2Row(spec.name, float(limited), float(all_init), *oracle)


def run_table2(
    tm: TreatmentModel = DEFAULT_TREATMENT,
    n: int = DESK_N,
    reps: int = DESK_REPS,
    seed: int = 42,
    workers: int = 1,
    scenarios: dict[str, ScenarioSpec] | None = None,
    ccw_pool: int | None = None,
) -> list[Table2Row]:
    """Risk table with one row per scenario in catalog order.

    Rows are independent and may be computed on ``workers`` threads; the
    output is identical for any worker count.
    """
    scenarios = CATALOG if scenarios is None else scenarios
    specs = list(scenarios.values())
    job = lambda s: table2_row(s, tm, n, reps, seed, ccw_pool)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, specs))
    return [job(s) for s in specs]


# situation label -> (can include early initiators in IPCW, can ignore initiation distribution)
TABLE3_SITUATIONS = {
    "No exposure effect": (True, True),
    "Exposure effect begins after the end of the period": (True, True),
    "Exposure effect is instantaneous": (True, False),
    "Exposure effect is delayed": (False, False),
    "Exposure effect is cumulative or otherwise time-varying": (False, False),
}

SCENARIO_SITUATION = {
    "A": "No exposure effect",
    "C": "Exposure effect begins after the end of the period",
    "B": "Exposure effect is instantaneous",
    "D": "Exposure effect is delayed",
    "E": "Exposure effect is cumulative or otherwise time-varying",
    "base": "Exposure effect is cumulative or otherwise time-varying",
}


@dataclass(frozen=True)
class Table3Check:
    scenario: str
    situation: str
    include_early: bool
    ignore_distribution: bool
    limited_gap: float
    distribution_gap: float

    @property
    def expected(self) -> tuple[bool, bool]:
        return TABLE3_SITUATIONS[self.situation]

    @property
    def passed(self) -> bool:
        return (self.include_early, self.ignore_distribution) == self.expected


@dataclass
class Table3Report:
    tolerance: float
    checks: list[Table3Check] = field(default_factory=list)

    def situations(self) -> dict[str, bool]:
        """Pass flag per decision-matrix row; a row passes when all its scenarios do."""
        out = {}
        for situation in TABLE3_SITUATIONS:
            members = [c for c in self.checks if c.situation == situation]
            out[situation] = bool(members) and all(c.passed for c in members)
        return out

    @property
    def passed(self) -> bool:
        return all(self.situations().values())

    def render(self) -> str:
        yn = lambda b: "Yes" if b else "No"
        lines = [f"Decision matrix (tolerance {self.tolerance:.4f})", ""]
        lines.append(f"{'scenario':<9}{'include early':>14}{'ignore dist.':>14}{'expected':>12}  result")
        for c in self.checks:
            exp = "/".join(yn(b) for b in c.expected)
            lines.append(
                f"{c.scenario:<9}{yn(c.include_early):>14}{yn(c.ignore_distribution):>14}"
                f"{exp:>12}  {'PASS' if c.passed else 'FAIL'}"
                f"   |all-lim|={c.limited_gap:.4f} |feas-start1|={c.distribution_gap:.4f}"
            )
        lines.append("")
        for situation, ok in self.situations().items():
            lines.append(f"{'PASS' if ok else 'FAIL'}  {situation}")
        return "\n".join(lines) + "\n"


def check_table3(results: list[Table2Row], tolerance: float = EQUALITY_TOLERANCE) -> Table3Report:
    """Evaluate the two yes/no questions from risk-table rows.

    "Include early initiators" is answered yes when the two CCW schemes
    agree within ``tolerance``; "ignore the distribution" is yes when the
    feasible intervention agrees with starting everyone at the window end.
    """
    report = Table3Report(tolerance)
    for row in results:
        situation = SCENARIO_SITUATION.get(row.scenario)
        if situation is None:
            continue
        gap_a = abs(row.all_initiator_ccw - row.limited_ccw)
        gap_b = abs(row.iv_feasible - row.iv_start1)
        report.checks.append(Table3Check(row.scenario, situation, gap_a < tolerance, gap_b < tolerance, gap_a, gap_b))
    return report


def closed_form_columns(p_c1: float = 0.5, horizon: int = 3) -> dict[str, tuple[float, float]]:
    return {
        name: (closed_form_risk(spec, p_c1, 0, horizon), closed_form_risk(spec, p_c1, 1, horizon))
        for name, spec in CATALOG.items()
    }


def render_table2(rows: list[Table2Row]) -> str:
    head = f"{'scenario':<9}" + "".join(f"{k:>19}" for k in Table2Row.COLUMNS)
    body = [f"{r.scenario:<9}" + "".join(f"{v:>19.3f}" for v in r.values()) for r in rows]
    return "\n".join([head, *body]) + "\n"


# -- initiation curves -------------------------------------------------------

DISTRIBUTIONS = ("uniform", "normal", "early", "late", "empirical")


@dataclass(frozen=True)
class StartDistribution:
    """Natural start-day distribution on ``[0, window_end)`` plus a never-start mass.

    ``early`` and ``late`` are exponential shapes with ``rate`` per day,
    truncated to the window, decaying from day 0 or from the window end.
    ``normal`` is truncated to the window.  ``empirical`` uses the listed
    start days.
    """

    kind: str = "uniform"
    never: float = 0.0
    mu: float | None = None
    sigma: float | None = None
    rate: float | None = None
    days: tuple = ()

    def __post_init__(self):
        if self.kind not in DISTRIBUTIONS:
            raise ConfigurationError(f"unknown distribution {self.kind!r}; choose from {', '.join(DISTRIBUTIONS)}")
        if not 0.0 <= self.never <= 1.0:
            raise ConfigurationError(f"never-initiator share must lie in [0, 1], got {self.never}")
        if self.kind == "normal" and (self.mu is None or self.sigma is None or not self.sigma > 0):
            raise ConfigurationError("normal distribution needs mu and sigma > 0")
        if self.kind in ("early", "late") and (self.rate is None or not self.rate > 0):
            raise ConfigurationError(f"{self.kind} distribution needs rate > 0")
        if self.kind == "empirical" and not self.days:
            raise ConfigurationError("empirical distribution needs at least one start day")

    def cdf(self, day: float, window_end: float) -> float:
        """P(start <= day) among eventual natural initiators, for day < window_end."""
        W = window_end
        if self.kind == "uniform":
            return min(max(day / W, 0.0), 1.0)
        if self.kind == "normal":
            nd = NormalDist(self.mu, self.sigma)
            lo, hi = nd.cdf(0.0), nd.cdf(W)
            if hi - lo <= 0:
                raise ConfigurationError("normal distribution has no mass inside the window")
            return (nd.cdf(day) - lo) / (hi - lo)
        if self.kind == "early":
            return -math.expm1(-self.rate * day) / -math.expm1(-self.rate * W)
        if self.kind == "late":
            return (math.exp(-self.rate * (W - day)) - math.exp(-self.rate * W)) / -math.expm1(-self.rate * W)
        days = np.asarray(self.days, dtype=float)
        if (days < 0).any() or (days >= W).any():
            raise ConfigurationError(f"empirical start days must lie in [0, {W})")
        return float(np.count_nonzero(days <= day)) / len(days)


@dataclass(frozen=True)
class InitiationCurve:
    label: str
    points: tuple  # ((day, proportion), ...)


def initiation_curve(dist: StartDistribution, window_end: int = 30, resolution: int = 1) -> InitiationCurve:
    """Cumulative initiation under the intervention a CCW analysis targets.

    Before ``window_end`` the curve follows the natural start distribution
    scaled by the share of eventual natural initiators; at ``window_end``
    everyone remaining starts, so the curve ends at exactly 1.
    """
    if window_end < 1 or resolution < 1:
        raise ConfigurationError("window_end and resolution must be positive")
    share = 1.0 - dist.never
    pts = [(d, share * dist.cdf(d, window_end)) for d in range(0, window_end, resolution)]
    pts.append((window_end, 1.0))
    label = dist.kind if dist.kind == "uniform" else _describe(dist)
    return InitiationCurve(f"{label}, never={dist.never:g}", tuple(pts))


def _describe(dist):
    if dist.kind == "normal":
        return f"normal({dist.mu:g},{dist.sigma:g})"
    if dist.kind in ("early", "late"):
        return f"{dist.kind}({dist.rate:g})"
    return f"empirical(n={len(dist.days)})"


# illustrative populations in the spirit of the four example curves
EXAMPLE_POPULATIONS = {
    "late": StartDistribution("late", never=0.3, rate=0.15),
    "early": StartDistribution("early", never=0.3, rate=0.15),
    "normal": StartDistribution("normal", never=0.3, mu=15, sigma=5),
    "uniform": StartDistribution("uniform", never=0.3),
}
