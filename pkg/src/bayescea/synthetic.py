"""Seeded synthetic two-arm trials for testing and calibration.

The generating process is the hurdle family, which nests the other two: a
Bernoulli draw decides whether a participant is a structural one (all
utilities equal to one), otherwise the QALY is a Beta draw turned into a
constant-level utility trajectory with exactly that area under the curve.
Costs are Gamma conditional on the QALY. Missingness can be switched between
MCAR, MAR (depending on the observed baseline utility) and MNAR (depending on
the unobserved structural indicator).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .densities import expit, logit, sample_beta_mean_sd
from .trial_data import (
    CONTROL_ARM,
    INTERVENTION_ARM,
    IndividualRecord,
    TimeGrid,
    TrialDataset,
)

__all__ = ["ArmTruth", "MissingnessConfig", "SyntheticTrialConfig", "generate_synthetic_trial"]


@dataclass(frozen=True)
class ArmTruth:
    """True parameter values for one arm of the generating process."""

    n: int
    prob_one: float = 0.35  # marginal probability of a unit QALY
    nonone_mean: float = 0.75  # Beta mean of the below-one QALYs
    nonone_sd: float = 0.1
    slope_base: float = 0.0  # logit-scale effect of centred baseline on the mean
    one_slope_base: float = 0.0  # logit-scale effect on the structural probability
    cost_mean: float = 200.0
    cost_slope: float = 0.0  # log-link effect of the centred QALY on cost
    cost_sd: float = 50.0
    base_prob_one: float = 0.3  # probability of a unit baseline utility
    base_mean: float = 0.7  # Beta mean of the below-one baseline utilities
    base_sd: float = 0.15

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("each arm needs at least 2 records")
        for name in ("prob_one", "base_prob_one"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for mean, sd, label in (
            (self.nonone_mean, self.nonone_sd, "nonone"),
            (self.base_mean, self.base_sd, "base"),
        ):
            if not 0.0 < mean < 1.0:
                raise ValueError(f"{label} mean must lie in (0, 1)")
            if sd <= 0 or sd * sd >= mean * (1.0 - mean):
                raise ValueError(
                    f"{label} sd breaks the Beta bound sd^2 < mean(1-mean)"
                )
        if self.cost_mean <= 0 or self.cost_sd <= 0:
            raise ValueError("cost mean and sd must be positive")

    @property
    def baseline_mean(self) -> float:
        """Population mean of the baseline utility (centring point)."""
        return self.base_prob_one + (1.0 - self.base_prob_one) * self.base_mean

    @property
    def marginal_qaly_mean(self) -> float:
        return self.prob_one + (1.0 - self.prob_one) * self.nonone_mean


@dataclass(frozen=True)
class MissingnessConfig:
    """Missingness mechanism applied after generation.

    `mechanism` selects how the outcome-missingness probability varies:
    'none' disables everything, 'mcar' uses the base rates as they are, 'mar'
    adds a logit-scale dependence on the centred baseline utility and 'mnar'
    on the (unobserved) structural-one indicator. Baseline and cost
    missingness are always MCAR at their own rates.
    """

    mechanism: str = "none"
    outcome_rate: float = 0.0
    cost_rate: float = 0.0
    baseline_rate: float = 0.0
    mar_slope: float = 0.0
    mnar_slope: float = 0.0

    def __post_init__(self) -> None:
        if self.mechanism not in ("none", "mcar", "mar", "mnar"):
            raise ValueError(f"unknown missingness mechanism {self.mechanism!r}")
        for name in ("outcome_rate", "cost_rate", "baseline_rate"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class SyntheticTrialConfig:
    seed: int
    control: ArmTruth
    intervention: ArmTruth
    grid: TimeGrid = field(default_factory=TimeGrid)
    missingness: MissingnessConfig = field(default_factory=MissingnessConfig)
    include_covariates: bool = False


def _missing_prob(cfg: MissingnessConfig, u0: float, u0_ref: float, is_one: bool) -> float:
    if cfg.mechanism == "mcar" or cfg.outcome_rate in (0.0, 1.0):
        return cfg.outcome_rate
    base = logit(cfg.outcome_rate)
    if cfg.mechanism == "mar":
        return float(expit(base + cfg.mar_slope * (u0 - u0_ref)))
    return float(expit(base + cfg.mnar_slope * (1.0 if is_one else 0.0)))


def _blank_some(rng: np.random.Generator, values: list, start: int) -> None:
    """Blank a nonempty random subset of values[start:] in place."""
    span = len(values) - start
    mask = rng.random(span) < 0.7
    if not mask.any():
        mask[rng.integers(span)] = True
    for j in range(span):
        if mask[j]:
            values[start + j] = None


def _feasible_qaly(
    rng: np.random.Generator, mean: float, sd: float, u0: float, grid: TimeGrid
) -> float:
    """Draw a below-one QALY consistent with some trajectory starting at u0.

    With a constant follow-up level x the area is u0*w1/2 + x*(total - w1/2),
    so the achievable range given u0 is [u0*w1/2, total - w1*(1-u0)/2]. Draws
    outside it (rare under sensible configurations) are rejected and retried.
    """
    w1 = grid.interval_weights[0]
    total = grid.horizon
    lo = u0 * w1 / 2.0
    hi = total - w1 * (1.0 - u0) / 2.0
    for _ in range(1000):
        e = float(sample_beta_mean_sd(rng, mean, sd))
        if lo + 1e-12 < e < hi - 1e-12:
            return e
    raise ValueError(
        "could not draw a feasible QALY; the configured QALY distribution is "
        "incompatible with the time grid and baseline utilities"
    )


def generate_synthetic_trial(config: SyntheticTrialConfig) -> TrialDataset:
    """Generate a deterministic synthetic dataset for the given seed."""
    rng = np.random.default_rng(config.seed)
    grid = config.grid
    n_follow = grid.n_intervals
    records: list[IndividualRecord] = []
    for arm, truth in (
        (CONTROL_ARM, config.control),
        (INTERVENTION_ARM, config.intervention),
    ):
        u0_ref = truth.baseline_mean
        mu_e = truth.marginal_qaly_mean
        for k in range(truth.n):
            # baseline utility, then the structural indicator given it
            if rng.random() < truth.base_prob_one:
                u0 = 1.0
            else:
                u0 = float(sample_beta_mean_sd(rng, truth.base_mean, truth.base_sd))
            if truth.prob_one in (0.0, 1.0):
                p_one = truth.prob_one
            else:
                p_one = float(
                    expit(logit(truth.prob_one) + truth.one_slope_base * (u0 - u0_ref))
                )
            is_one = rng.random() < p_one

            if is_one:
                e = grid.horizon
                utilities: list[float | None] = [1.0] * grid.n_points
            else:
                mean = float(
                    expit(logit(truth.nonone_mean) + truth.slope_base * (u0 - u0_ref))
                )
                e = _feasible_qaly(rng, mean, truth.nonone_sd, u0, grid)
                w1 = grid.interval_weights[0]
                x = (e - u0 * w1 / 2.0) / (grid.horizon - w1 / 2.0)
                utilities = [u0] + [x] * n_follow

            cost_loc = truth.cost_mean * math.exp(truth.cost_slope * (e - mu_e))
            shape = (cost_loc / truth.cost_sd) ** 2
            total_cost = float(rng.gamma(shape, truth.cost_sd**2 / cost_loc))
            parts = [total_cost / n_follow] * n_follow
            parts[-1] = total_cost - sum(parts[:-1])
            costs: list[float | None] = parts

            age = ethnicity = employment = None
            if config.include_covariates:
                age = float(np.round(rng.normal(32.0, 8.0), 1))
                ethnicity = int(rng.integers(1, 4))
                employment = int(rng.integers(1, 3))

            miss = config.missingness
            if rng.random() < _missing_prob(miss, u0, u0_ref, is_one):
                _blank_some(rng, utilities, start=1)
            if miss.mechanism != "none" and rng.random() < miss.baseline_rate:
                utilities[0] = None
            if miss.mechanism != "none" and rng.random() < miss.cost_rate:
                _blank_some(rng, costs, start=0)

            records.append(
                IndividualRecord(
                    record_id=f"{arm}-{k + 1:04d}",
                    arm=arm,
                    utilities=tuple(utilities),
                    costs=tuple(costs),
                    age=age,
                    ethnicity=ethnicity,
                    employment=employment,
                )
            )
    return TrialDataset(grid=grid, records=records)
