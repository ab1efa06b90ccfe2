"""Person-period CSV ingestion and plain-text result files.

Cohort files are comma separated with header
``person_id,period,<covariate names...>,exposed,event``.  Each person has
one row per period from 0 until their event or the end of follow-up, with
persistent exposure and at most one event, on the last row.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

from . import __version__
from .ccw import CloneSet, weight_trajectories
from .cohort import Cohort, PersonPath, RiskEstimate
from .errors import CohortFormatError
from .experiments import InitiationCurve, Table2Row

LINE = "\n"


def _open_w(path):
    return open(path, "w", newline="", encoding="utf-8")


def _fmt(x) -> str:
    return f"{float(x):.6f}"


def write_cohort_csv(cohort: Cohort, path, covariate_names=None) -> None:
    names = list(cohort.covariate_names if covariate_names is None else covariate_names)
    with _open_w(path) as fh:
        w = csv.writer(fh, lineterminator=LINE)
        w.writerow(["person_id", "period", *names, "exposed", "event"])
        for p in cohort:
            cov = list(p.c) if isinstance(p.c, tuple) else [p.c]
            if len(cov) != len(names):
                raise ValueError(f"person {p.id}: {len(cov)} covariate values for {len(names)} names")
            last = cohort.horizon - 1 if p.event_period is None else p.event_period
            for t in range(last + 1):
                exposed = int(p.start_time is not None and p.start_time <= t)
                w.writerow([p.id, t, *cov, exposed, int(p.event_period == t)])


def _int(value, what, line):
    try:
        return int(value)
    except ValueError:
        raise CohortFormatError(f"{what} must be an integer, got {value!r}", line) from None


def _category(value):
    try:
        return int(value)
    except ValueError:
        return value


def parse_cohort_csv(path) -> Cohort:
    """Read and validate a person-period file.

    Returns
    -------
    Cohort
        One :class:`PersonPath` per person, in order of first appearance; the
        horizon is one past the largest period in the file.  With a single
        covariate column ``c`` is its value, otherwise a tuple.

    Raises
    ------
    CohortFormatError
        With the offending line number for schema mismatches, duplicate
        ``(person_id, period)`` pairs, gaps, exposure that stops, records
        after an event, changing baseline covariates or incomplete follow-up.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CohortFormatError("file is empty; expected a header row", 1)
        header = [h.strip() for h in header]
        if (
            len(header) < 4
            or header[:2] != ["person_id", "period"]
            or header[-2:] != ["exposed", "event"]
        ):
            raise CohortFormatError(
                f"header must be person_id,period,<covariates>,exposed,event; got {','.join(header)}", 1
            )
        covariates = header[2:-2]
        if len(set(covariates)) != len(covariates) or any(not c for c in covariates):
            raise CohortFormatError("covariate names must be unique and nonempty", 1)

        records = defaultdict(list)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CohortFormatError(f"expected {len(header)} fields, got {len(row)}", lineno)
            pid = _int(row[0], "person_id", lineno)
            period = _int(row[1], "period", lineno)
            exposed = _int(row[-2], "exposed", lineno)
            event = _int(row[-1], "event", lineno)
            if period < 0:
                raise CohortFormatError("period must be nonnegative", lineno)
            if exposed not in (0, 1) or event not in (0, 1):
                raise CohortFormatError("exposed and event must be 0 or 1", lineno)
            cov = tuple(_category(v.strip()) for v in row[2:-2])
            records[pid].append((period, cov, exposed, event, lineno))

    horizon = 1 + max((r[0] for recs in records.values() for r in recs), default=-1)
    paths = []
    for pid, recs in records.items():
        recs.sort()
        seen = set()
        for period, _, _, _, line in recs:
            if period in seen:
                raise CohortFormatError(f"duplicate record for person {pid}, period {period}", line)
            seen.add(period)
        start = event_period = None
        for expected, (period, cov, exposed, event, line) in enumerate(recs):
            if period != expected:
                raise CohortFormatError(f"person {pid}: periods must be contiguous from 0, missing {expected}", line)
            if cov != recs[0][1]:
                raise CohortFormatError(f"person {pid}: baseline covariates change over time", line)
            if event_period is not None:
                raise CohortFormatError(f"person {pid}: record after the event in period {event_period}", line)
            if exposed and start is None:
                start = period
            elif not exposed and start is not None:
                raise CohortFormatError(f"person {pid}: exposure stops in period {period}; exposure must persist", line)
            if event:
                event_period = period
        cov = recs[0][1]
        c = cov[0] if len(cov) == 1 else cov
        paths.append(PersonPath(pid, c, start, event_period))
    # only after every record is validated, so a stray row is reported first
    for p in paths:
        last = records[p.id][-1]
        if p.event_period is None and last[0] != horizon - 1:
            raise CohortFormatError(
                f"person {p.id}: follow-up ends at period {last[0]} without an event (horizon {horizon})", last[4]
            )
    return Cohort.from_paths(paths, horizon, covariate_names=covariates)


def write_weights_csv(clones: CloneSet, path) -> None:
    with _open_w(path) as fh:
        w = csv.writer(fh, lineterminator=LINE)
        w.writerow(["person_id", "period", "at_risk", "event", "censored", "weight"])
        for pid, t, at_risk, event, censored, weight in weight_trajectories(clones):
            w.writerow([pid, t, at_risk, event, censored, _fmt(weight)])


def write_risk_csv(estimates: list[RiskEstimate], path=None) -> str:
    lines = ["method,scenario,horizon,n,reps,risk"]
    for e in estimates:
        lines.append(f"{e.method},{e.scenario or ''},{e.horizon},{e.n},{e.reps},{_fmt(e.risk)}")
    text = LINE.join(lines) + LINE
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def write_table2_csv(rows: list[Table2Row], path) -> None:
    with _open_w(path) as fh:
        w = csv.writer(fh, lineterminator=LINE)
        w.writerow(["scenario", *Table2Row.COLUMNS])
        for r in rows:
            w.writerow([r.scenario, *(_fmt(v) for v in r.values())])


def curve_csv(curve: InitiationCurve) -> str:
    return "day,proportion" + LINE + "".join(f"{d},{_fmt(p)}{LINE}" for d, p in curve.points)


def write_manifest(path, command: str, config: dict) -> None:
    manifest = {"command": command, "config": config, "seed": config.get("seed"), "version": __version__}
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + LINE, encoding="utf-8")
