"""Trial data model: measurement grids, individual records, QALY and total-cost
aggregation, structural-one classification and CSV input/output.

Utilities are quality-of-life scores in [0, 1] recorded at baseline and at each
follow-up visit; costs are per-period amounts recorded at follow-up visits only.
QALYs are the area under the utility curve over the trial horizon, expressed in
units of `TimeGrid.unit` months.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "CONTROL_ARM",
    "INTERVENTION_ARM",
    "TimeGrid",
    "StructuralStatus",
    "IndividualRecord",
    "AggregatedOutcomes",
    "TrialDataset",
    "compute_qaly",
    "compute_total_cost",
    "classify_structural_status",
    "aggregate",
    "load_trial_csv",
    "write_trial_csv",
    "scan_trial_csv",
    "default_times_path",
]

CONTROL_ARM = 1
INTERVENTION_ARM = 2


@dataclass(frozen=True)
class TimeGrid:
    """Measurement schedule in months; the first entry is baseline at time 0.

    `unit` is the number of months in one QALY unit (12 by default), so the
    interval weights sum to (times[-1] - times[0]) / unit.
    """

    times: tuple[float, ...] = (0.0, 3.0, 6.0, 12.0)
    unit: float = 12.0

    def __post_init__(self) -> None:
        if len(self.times) < 2:
            raise ValueError("time grid needs a baseline and at least one follow-up")
        if self.times[0] != 0:
            raise ValueError("first measurement time must be 0 (baseline)")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("measurement times must be strictly increasing")
        if self.unit <= 0:
            raise ValueError("time unit must be positive")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))

    @property
    def n_points(self) -> int:
        return len(self.times)

    @property
    def n_intervals(self) -> int:
        return len(self.times) - 1

    @property
    def interval_weights(self) -> tuple[float, ...]:
        """Fractions of the time unit between consecutive measurements."""
        return tuple(
            (b - a) / self.unit for a, b in zip(self.times, self.times[1:])
        )

    @property
    def horizon(self) -> float:
        """Total follow-up expressed in time units (sum of interval weights)."""
        return (self.times[-1] - self.times[0]) / self.unit


class StructuralStatus(Enum):
    """Whether a record's QALY is known to equal one, known not to, or unresolved."""

    KNOWN_ONE = "known_one"
    KNOWN_NOT_ONE = "known_not_one"
    AMBIGUOUS = "ambiguous"


def compute_qaly(utilities: Sequence[float], grid: TimeGrid) -> float:
    """Trapezoid-rule area under the utility curve, in time units.

    All utilities must be present and in [0, 1]; the all-ones trajectory gives
    exactly `grid.horizon` (1.0 on a one-unit grid).
    """
    if len(utilities) != grid.n_points:
        raise ValueError(
            f"expected {grid.n_points} utilities for this grid, got {len(utilities)}"
        )
    vals = []
    for j, u in enumerate(utilities):
        if u is None:
            raise ValueError(f"utility at position {j} is missing")
        u = float(u)
        if not 0.0 <= u <= 1.0:
            raise ValueError(f"utility at position {j} outside [0, 1]: {u}")
        vals.append(u)
    total = 0.0
    for j, w in enumerate(grid.interval_weights):
        total += (vals[j + 1] + vals[j]) * w / 2.0
    return total


def compute_total_cost(costs: Sequence[float]) -> float:
    """Sum of per-period costs; every entry must be present and non-negative."""
    total = 0.0
    for j, c in enumerate(costs):
        if c is None:
            raise ValueError(f"cost at position {j} is missing")
        c = float(c)
        if c < 0:
            raise ValueError(f"cost at position {j} is negative: {c}")
        total += c
    return total


def classify_structural_status(
    utilities: Sequence[float | None],
) -> StructuralStatus:
    """Classify a (possibly partially observed) utility trajectory.

    A unit QALY requires every utility (baseline included) to equal 1, so any
    observed value below 1 settles the question. If every observed value equals
    1 but at least one is missing, the status cannot be resolved from the data.
    """
    if len(utilities) == 0:
        raise ValueError("empty utility trajectory")
    observed = [u for u in utilities if u is not None]
    if any(u < 1.0 for u in observed):
        return StructuralStatus.KNOWN_NOT_ONE
    if len(observed) == len(utilities):
        return StructuralStatus.KNOWN_ONE
    return StructuralStatus.AMBIGUOUS


@dataclass(frozen=True)
class IndividualRecord:
    """One participant: arm, utility trajectory, per-period costs, covariates.

    `utilities` has one entry per grid point (baseline first), `costs` one entry
    per follow-up interval. Missing values are None. Categorical covariates are
    positive integer codes with 1 as the reference level.
    """

    record_id: str
    arm: int
    utilities: tuple[float | None, ...]
    costs: tuple[float | None, ...]
    age: float | None = None
    ethnicity: int | None = None
    employment: int | None = None

    def __post_init__(self) -> None:
        if self.arm not in (CONTROL_ARM, INTERVENTION_ARM):
            raise ValueError(f"arm must be 1 or 2, got {self.arm}")
        utils = tuple(None if u is None else float(u) for u in self.utilities)
        costs = tuple(None if c is None else float(c) for c in self.costs)
        for j, u in enumerate(utils):
            if u is not None and not 0.0 <= u <= 1.0:
                raise ValueError(
                    f"record {self.record_id}: utility u{j} outside [0, 1]: {u}"
                )
        for j, c in enumerate(costs):
            if c is not None and c < 0:
                raise ValueError(
                    f"record {self.record_id}: cost c{j + 1} is negative: {c}"
                )
        for name in ("ethnicity", "employment"):
            code = getattr(self, name)
            if code is not None and (not isinstance(code, int) or code < 1):
                raise ValueError(
                    f"record {self.record_id}: {name} must be a positive integer code"
                )
        object.__setattr__(self, "utilities", utils)
        object.__setattr__(self, "costs", costs)

    @property
    def baseline_utility(self) -> float | None:
        return self.utilities[0]


@dataclass(frozen=True)
class AggregatedOutcomes:
    """QALY and total cost for one record, present only under full observation."""

    qaly: float | None
    total_cost: float | None
    structural_status: StructuralStatus


def aggregate(record: IndividualRecord, grid: TimeGrid) -> AggregatedOutcomes:
    """Aggregate a record: QALY and cost are absent if any component is missing."""
    if len(record.utilities) != grid.n_points:
        raise ValueError(
            f"record {record.record_id}: expected {grid.n_points} utilities, "
            f"got {len(record.utilities)}"
        )
    if len(record.costs) != grid.n_intervals:
        raise ValueError(
            f"record {record.record_id}: expected {grid.n_intervals} costs, "
            f"got {len(record.costs)}"
        )
    qaly = None
    if all(u is not None for u in record.utilities):
        qaly = compute_qaly(record.utilities, grid)
    total_cost = None
    if all(c is not None for c in record.costs):
        total_cost = compute_total_cost(record.costs)
    return AggregatedOutcomes(
        qaly=qaly,
        total_cost=total_cost,
        structural_status=classify_structural_status(record.utilities),
    )


@dataclass
class TrialDataset:
    """A two-arm trial: one time grid plus individual records."""

    grid: TimeGrid
    records: list[IndividualRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if len(rec.utilities) != self.grid.n_points:
                raise ValueError(
                    f"record {rec.record_id}: utilities length does not match grid"
                )
            if len(rec.costs) != self.grid.n_intervals:
                raise ValueError(
                    f"record {rec.record_id}: costs length does not match grid"
                )
            if rec.record_id in seen:
                raise ValueError(f"duplicate record id {rec.record_id!r}")
            seen.add(rec.record_id)

    def arm_records(self, arm: int) -> list[IndividualRecord]:
        return [r for r in self.records if r.arm == arm]

    def n_arm(self, arm: int) -> int:
        return sum(1 for r in self.records if r.arm == arm)

    def aggregated(self) -> dict[str, AggregatedOutcomes]:
        return {r.record_id: aggregate(r, self.grid) for r in self.records}

    def complete_case_counts(self) -> tuple[int, int]:
        """Records per arm with fully observed utilities and costs."""
        counts = [0, 0]
        for rec in self.records:
            agg = aggregate(rec, self.grid)
            if agg.qaly is not None and agg.total_cost is not None:
                counts[rec.arm - 1] += 1
        return counts[0], counts[1]

    def ambiguous_counts(self) -> tuple[int, int]:
        counts = [0, 0]
        for rec in self.records:
            status = classify_structural_status(rec.utilities)
            if status is StructuralStatus.AMBIGUOUS:
                counts[rec.arm - 1] += 1
        return counts[0], counts[1]

    def complete_cases(self) -> "TrialDataset":
        """Subset with fully observed utilities and costs (baseline included)."""
        kept = []
        for rec in self.records:
            if all(u is not None for u in rec.utilities) and all(
                c is not None for c in rec.costs
            ):
                kept.append(rec)
        return TrialDataset(grid=self.grid, records=kept)

    def observed_counts(self) -> dict[str, tuple[int, int]]:
        """Observed-record counts per arm, by time point.

        Keys: 'baseline' (utility observed), 'followup_<j>' for j = 1..J
        (both the utility and the cost of that period observed) and
        'complete' (everything observed).
        """
        out: dict[str, list[int]] = {"baseline": [0, 0]}
        for j in range(1, self.grid.n_points):
            out[f"followup_{j}"] = [0, 0]
        out["complete"] = [0, 0]
        for rec in self.records:
            a = rec.arm - 1
            if rec.utilities[0] is not None:
                out["baseline"][a] += 1
            complete = rec.utilities[0] is not None
            for j in range(1, self.grid.n_points):
                ok = rec.utilities[j] is not None and rec.costs[j - 1] is not None
                if ok:
                    out[f"followup_{j}"][a] += 1
                complete = complete and ok
            if complete:
                out["complete"][a] += 1
        return {k: (v[0], v[1]) for k, v in out.items()}


# ---------------------------------------------------------------------------
# CSV input/output
#
# Schema (header required): id,arm,u0,...,uJ,c1,...,cJ,age,ethnicity,employment
# Missing values are the literal token NA. A sidecar JSON descriptor holds the
# measurement times (months) and the time unit.
# ---------------------------------------------------------------------------

_NA = "NA"


def default_times_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.parent / (p.stem + ".times.json")


def _expected_header(grid: TimeGrid) -> list[str]:
    cols = ["id", "arm"]
    cols += [f"u{j}" for j in range(grid.n_points)]
    cols += [f"c{j}" for j in range(1, grid.n_points)]
    cols += ["age", "ethnicity", "employment"]
    return cols


def _fmt(value: float | int | None) -> str:
    if value is None:
        return _NA
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_trial_csv(
    dataset: TrialDataset,
    path: str | Path,
    times_path: str | Path | None = None,
) -> None:
    """Write a dataset and its sidecar time descriptor.

    Floats are written with repr so that a round trip through
    `load_trial_csv` is bit-identical.
    """
    path = Path(path)
    times_path = Path(times_path) if times_path else default_times_path(path)
    header = _expected_header(dataset.grid)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in dataset.records:
            row = [rec.record_id, str(rec.arm)]
            row += [_fmt(u) for u in rec.utilities]
            row += [_fmt(c) for c in rec.costs]
            row += [_fmt(rec.age), _fmt(rec.ethnicity), _fmt(rec.employment)]
            writer.writerow(row)
    descriptor = {
        "measurement_times": list(dataset.grid.times),
        "time_unit": dataset.grid.unit,
    }
    with open(times_path, "w") as fh:
        json.dump(descriptor, fh, sort_keys=True)
        fh.write("\n")


def _load_grid(times_path: Path) -> TimeGrid:
    try:
        with open(times_path) as fh:
            descriptor = json.load(fh)
    except FileNotFoundError:
        raise FileNotFoundError(
            f"time descriptor not found: {times_path} "
            "(pass times_path explicitly or create the sidecar JSON)"
        ) from None
    try:
        return TimeGrid(
            times=tuple(descriptor["measurement_times"]),
            unit=float(descriptor["time_unit"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed time descriptor {times_path}: {exc}") from exc


def _parse_float(token: str, what: str, line_no: int) -> float | None:
    if token == _NA:
        return None
    try:
        return float(token)
    except ValueError:
        raise ValueError(f"line {line_no}: {what} is not a number: {token!r}") from None


def _parse_code(token: str, what: str, line_no: int) -> int | None:
    if token == _NA:
        return None
    try:
        code = int(token)
    except ValueError:
        raise ValueError(
            f"line {line_no}: {what} is not an integer code: {token!r}"
        ) from None
    if code < 1:
        raise ValueError(f"line {line_no}: unknown {what} level {code} (codes start at 1)")
    return code


def _parse_row(row: list[str], grid: TimeGrid, line_no: int) -> IndividualRecord:
    expected = 2 + grid.n_points + grid.n_intervals + 3
    if len(row) != expected:
        raise ValueError(
            f"line {line_no}: expected {expected} fields, got {len(row)}"
        )
    rec_id = row[0].strip()
    if not rec_id:
        raise ValueError(f"line {line_no}: empty record id")
    if row[1] not in ("1", "2"):
        raise ValueError(f"line {line_no}: arm must be 1 or 2, got {row[1]!r}")
    arm = int(row[1])
    k = 2
    utilities = []
    for j in range(grid.n_points):
        u = _parse_float(row[k], f"u{j}", line_no)
        if u is not None and not 0.0 <= u <= 1.0:
            raise ValueError(f"line {line_no}: u{j} outside [0, 1]: {u}")
        utilities.append(u)
        k += 1
    costs = []
    for j in range(1, grid.n_points):
        c = _parse_float(row[k], f"c{j}", line_no)
        if c is not None and c < 0:
            raise ValueError(f"line {line_no}: c{j} is negative: {c}")
        costs.append(c)
        k += 1
    age = _parse_float(row[k], "age", line_no)
    ethnicity = _parse_code(row[k + 1], "ethnicity", line_no)
    employment = _parse_code(row[k + 2], "employment", line_no)
    return IndividualRecord(
        record_id=rec_id,
        arm=arm,
        utilities=tuple(utilities),
        costs=tuple(costs),
        age=age,
        ethnicity=ethnicity,
        employment=employment,
    )


def scan_trial_csv(
    path: str | Path,
    times_path: str | Path | None = None,
) -> tuple[TrialDataset | None, list[str]]:
    """Parse a trial CSV collecting every violation instead of stopping.

    Returns (dataset, errors); the dataset is None whenever errors were found.
    """
    path = Path(path)
    grid = _load_grid(Path(times_path) if times_path else default_times_path(path))
    errors: list[str] = []
    records: list[IndividualRecord] = []
    seen: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return None, ["line 1: missing header"]
        expected = _expected_header(grid)
        if header != expected:
            return None, [
                f"line 1: header mismatch; expected {','.join(expected)}"
            ]
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rec = _parse_row(row, grid, line_no)
                if rec.record_id in seen:
                    raise ValueError(
                        f"line {line_no}: duplicate record id {rec.record_id!r}"
                    )
                seen.add(rec.record_id)
                records.append(rec)
            except ValueError as exc:
                errors.append(str(exc))
    if errors:
        return None, errors
    return TrialDataset(grid=grid, records=records), []


def load_trial_csv(
    path: str | Path,
    times_path: str | Path | None = None,
) -> TrialDataset:
    """Load a trial CSV, raising on the full list of schema violations."""
    dataset, errors = scan_trial_csv(path, times_path)
    if errors:
        raise ValueError(f"{path}: " + "; ".join(errors))
    assert dataset is not None
    return dataset
