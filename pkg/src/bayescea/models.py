"""Joint outcome models for two-arm trial data.

Three families with increasing structure:

* bivariate normal: Normal marginal for QALYs, Normal conditional for costs;
* beta-gamma: Beta marginal (logit link) for QALYs, Gamma conditional
  (log link) for costs, boundary values rescaled by a small epsilon;
* hurdle: a Bernoulli component for QALYs exactly equal to one mixed with a
  Beta component for the rest, Gamma costs, and a matching hurdle for
  structural ones in the baseline utilities.

Every family factorises the joint outcome density into a marginal
effectiveness module and a conditional cost module centred on the marginal
mean, so the cost slope captures the outcome correlation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .densities import (
    bernoulli_logpmf_logit,
    beta_logpdf_mean_sd,
    expit,
    gamma_logpdf_shape_rate,
    half_cauchy_logpdf,
    logistic_logpdf,
    logit,
    normal_logpdf,
)
from .trial_data import StructuralStatus, TrialDataset, classify_structural_status

__all__ = [
    "ModelFamily",
    "MnarScenario",
    "PointMassMode",
    "PriorConfig",
    "ModelSpec",
    "EffectParams",
    "CostParams",
    "BaselineParams",
    "StructuralParams",
    "ArmParams",
    "DEGENERATE_ONES_MEAN",
    "log_likelihood_effect",
    "log_likelihood_cost",
    "log_likelihood_structural",
    "structural_linear_predictor",
    "marginal_mean_qalys",
    "log_prior",
    "apply_mnar_scenario",
    "degenerate_ones_component",
    "spec_to_json",
    "spec_from_json",
]

# Mean of the near-degenerate Beta used to approximate the spike at one.
DEGENERATE_ONES_MEAN = 0.999999


class ModelFamily(Enum):
    BIVARIATE_NORMAL = "bn"
    BETA_GAMMA = "bg"
    HURDLE = "hurdle"


class MnarScenario(Enum):
    """How unresolved structural-one indicators are treated during fitting."""

    MAR = "mar"
    MNAR1 = "mnar1"  # ambiguous records set to one in both arms
    MNAR2 = "mnar2"  # ambiguous records set to zero in both arms
    MNAR3 = "mnar3"  # control one, intervention zero
    MNAR4 = "mnar4"  # control zero, intervention one
    CUSTOM = "custom"


@dataclass(frozen=True)
class PointMassMode:
    """Treatment of the spike at one inside the hurdle family.

    `exact` handles the spike as a true point mass; `degenerate_beta`
    approximates it with a Beta centred at a mean just below one
    (logit 0.999999) and a tiny fixed standard deviation, which is useful for
    sensitivity analyses on that standard deviation.
    """

    kind: str = "exact"
    ones_sd: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "degenerate_beta"):
            raise ValueError(f"unknown point mass mode {self.kind!r}")
        if self.kind == "degenerate_beta":
            degenerate_ones_component(self)  # validates ones_sd
        elif self.ones_sd is not None:
            raise ValueError("ones_sd only applies to the degenerate_beta mode")

    @classmethod
    def exact(cls) -> "PointMassMode":
        return cls(kind="exact")

    @classmethod
    def degenerate_beta(cls, ones_sd: float) -> "PointMassMode":
        return cls(kind="degenerate_beta", ones_sd=ones_sd)


def degenerate_ones_component(mode: PointMassMode) -> tuple[float, float]:
    """Location (logit scale) and sd of the ones component implied by `mode`.

    The exact mode returns (inf, 0): a point mass at one. The degenerate-Beta
    mode returns logit(0.999999) with the supplied sd, which must be small
    enough that the Beta variance bound at that mean still holds.
    """
    if mode.kind == "exact":
        return math.inf, 0.0
    sd = mode.ones_sd
    if sd is None or not 0.0 < sd <= 1e-3:
        raise ValueError("degenerate-Beta ones sd must lie in (0, 1e-3]")
    bound = math.sqrt(DEGENERATE_ONES_MEAN * (1.0 - DEGENERATE_ONES_MEAN))
    if sd >= bound:
        raise ValueError(
            f"ones sd {sd} is infeasible: the Beta variance bound at mean "
            f"{DEGENERATE_ONES_MEAN} requires sd < {bound:.6g}"
        )
    return float(logit(DEGENERATE_ONES_MEAN)), float(sd)


@dataclass(frozen=True)
class PriorConfig:
    """Default vague priors, overridable per analysis.

    Regression coefficients get Normal(0, coef_sd) with coef_sd matching a
    precision of 1e-5; logistic-regression intercepts get a standard logistic
    prior (uniform implied probability). Scales get either Uniform(0, upper)
    or Half-Cauchy; standard deviations of Beta components are always bounded
    by sqrt(mean(1-mean)) whatever the prior shape.
    """

    coef_sd: float = 1.0 / math.sqrt(1e-5)
    scale_prior: str = "uniform"  # or "half_cauchy"
    sigma_upper: float = 1000.0
    half_cauchy_scale: float = 2.5

    def __post_init__(self) -> None:
        if self.scale_prior not in ("uniform", "half_cauchy"):
            raise ValueError(f"unknown scale prior {self.scale_prior!r}")
        if self.coef_sd <= 0 or self.sigma_upper <= 0 or self.half_cauchy_scale <= 0:
            raise ValueError("prior hyperparameters must be positive")


_VALID_COVARIATES = ("age", "ethnicity", "employment")


@dataclass(frozen=True)
class ModelSpec:
    """Which family to fit and how to treat boundaries, priors and missingness."""

    family: ModelFamily
    epsilon: float = 1e-4
    prior_config: PriorConfig = field(default_factory=PriorConfig)
    hurdle_covariates: tuple[str, ...] = ()
    point_mass_mode: PointMassMode = field(default_factory=PointMassMode.exact)
    mnar_scenario: MnarScenario = MnarScenario.MAR
    custom_indicators: Mapping[str, int] | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must be in (0, 0.5)")
        bad = [c for c in self.hurdle_covariates if c not in _VALID_COVARIATES]
        if bad:
            raise ValueError(f"unknown hurdle covariates: {bad}")
        if self.family is not ModelFamily.HURDLE:
            if self.mnar_scenario is not MnarScenario.MAR:
                raise ValueError(
                    "missingness scenarios other than MAR are only defined for "
                    "the hurdle family"
                )
            if self.hurdle_covariates:
                raise ValueError("hurdle covariates require the hurdle family")
        if (self.mnar_scenario is MnarScenario.CUSTOM) != (
            self.custom_indicators is not None
        ):
            raise ValueError(
                "custom indicator assignments must be given exactly when the "
                "scenario is custom"
            )


# ---------------------------------------------------------------------------
# Parameter containers (one arm each; immutable values)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EffectParams:
    """Marginal QALY model: intercept and baseline-utility slope on the link
    scale plus the marginal sd. For the hurdle family this describes the
    below-one component."""

    intercept: float
    slope_base: float
    sd: float


@dataclass(frozen=True)
class CostParams:
    """Conditional cost model: intercept, effectiveness slope and marginal sd."""

    intercept: float
    slope_eff: float
    sd: float


@dataclass(frozen=True)
class BaselineParams:
    """Baseline-utility model: location on the link scale plus sd.

    Identity link under the bivariate normal family, logit link under the Beta
    families (where it describes the below-one component for the hurdle).
    """

    location: float
    sd: float


@dataclass(frozen=True)
class StructuralParams:
    """Logistic model for a structural-one indicator.

    Optional covariate terms are enabled by setting the matching field;
    categorical effects are indexed by level code with the reference level
    (code 1) pinned at zero.
    """

    intercept: float
    slope_base: float = 0.0
    slope_age: float | None = None
    ethnicity_effects: tuple[float, ...] | None = None
    employment_effects: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        for name in ("ethnicity_effects", "employment_effects"):
            effects = getattr(self, name)
            if effects is not None:
                if len(effects) < 1 or effects[0] != 0.0:
                    raise ValueError(
                        f"{name} must pin the reference level (first entry) at 0"
                    )
                object.__setattr__(self, name, tuple(float(v) for v in effects))


@dataclass(frozen=True)
class ArmParams:
    """Full parameter assignment for one arm of one family."""

    effect: EffectParams
    cost: CostParams
    baseline: BaselineParams
    structural: StructuralParams | None = None
    baseline_ones: StructuralParams | None = None


# ---------------------------------------------------------------------------
# Likelihood modules
# ---------------------------------------------------------------------------


def log_likelihood_effect(
    params: EffectParams,
    family: ModelFamily,
    qalys: np.ndarray,
    baseline_centered: np.ndarray,
) -> np.ndarray:
    """Per-record log density of the marginal QALY module.

    Under the Beta families the location is expit(intercept + slope * x) and
    the density is the mean/sd Beta, valid only while sd^2 stays below the
    per-record variance bound (violations give -inf). For the hurdle family
    pass the below-one values only.
    """
    lp = params.intercept + params.slope_base * np.asarray(baseline_centered)
    if family is ModelFamily.BIVARIATE_NORMAL:
        return normal_logpdf(qalys, lp, params.sd)
    return beta_logpdf_mean_sd(qalys, expit(lp), params.sd)


def log_likelihood_cost(
    params: CostParams,
    family: ModelFamily,
    costs: np.ndarray,
    qalys: np.ndarray,
    mean_qaly: float,
    effect_sd: float | None = None,
) -> np.ndarray:
    """Per-record log density of the conditional cost module.

    The location is centred on the marginal QALY mean. The bivariate normal
    conditional variance is sd_c^2 - sd_e^2 * slope^2 (requires `effect_sd`);
    the Gamma families use a log link with shape = location * rate and
    rate = location / sd_c^2, so the conditional variance is sd_c^2.
    """
    centred = np.asarray(qalys, dtype=float) - mean_qaly
    if family is ModelFamily.BIVARIATE_NORMAL:
        if effect_sd is None:
            raise ValueError("the bivariate normal cost module needs effect_sd")
        cond_var = params.sd**2 - (effect_sd * params.slope_eff) ** 2
        if cond_var <= 0:
            return np.full(np.shape(costs), -np.inf)
        loc = params.intercept + params.slope_eff * centred
        return normal_logpdf(costs, loc, math.sqrt(cond_var))
    if params.sd <= 0:
        return np.full(np.shape(costs), -np.inf)
    loc = np.exp(params.intercept + params.slope_eff * centred)
    rate = loc / params.sd**2
    return gamma_logpdf_shape_rate(costs, loc * rate, rate)


def structural_linear_predictor(
    params: StructuralParams,
    baseline_centered: np.ndarray | None = None,
    age_centered: np.ndarray | None = None,
    ethnicity: np.ndarray | None = None,
    employment: np.ndarray | None = None,
) -> np.ndarray:
    """Logit-scale probability of a structural one for each record."""
    lp = np.asarray(
        params.intercept
        + (
            params.slope_base * np.asarray(baseline_centered, dtype=float)
            if baseline_centered is not None
            else 0.0
        ),
        dtype=float,
    )
    if params.slope_age is not None:
        if age_centered is None:
            raise ValueError("model includes age but no age values were given")
        lp = lp + params.slope_age * np.asarray(age_centered, dtype=float)
    for effects, codes, name in (
        (params.ethnicity_effects, ethnicity, "ethnicity"),
        (params.employment_effects, employment, "employment"),
    ):
        if effects is not None:
            if codes is None:
                raise ValueError(f"model includes {name} but no codes were given")
            codes = np.asarray(codes)
            if codes.min() < 1 or codes.max() > len(effects):
                raise ValueError(f"{name} code outside the modelled levels")
            lp = lp + np.asarray(effects)[codes - 1]
    return lp


def log_likelihood_structural(
    params: StructuralParams,
    indicators: np.ndarray,
    baseline_centered: np.ndarray | None = None,
    age_centered: np.ndarray | None = None,
    ethnicity: np.ndarray | None = None,
    employment: np.ndarray | None = None,
) -> np.ndarray:
    """Per-record Bernoulli log pmf for structural-one indicators."""
    lp = structural_linear_predictor(
        params, baseline_centered, age_centered, ethnicity, employment
    )
    return bernoulli_logpmf_logit(indicators, lp)


def marginal_mean_qalys(prob_one: float, mean_below_one: float) -> float:
    """Mixture mean: ones with weight prob_one, the below-one mean otherwise."""
    if not 0.0 <= prob_one <= 1.0:
        raise ValueError("prob_one must lie in [0, 1]")
    if not 0.0 < mean_below_one < 1.0:
        raise ValueError("mean_below_one must lie in (0, 1)")
    return (1.0 - prob_one) * mean_below_one + prob_one


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------


def _scale_log_prior(sd: float, upper: float, cfg: PriorConfig) -> float:
    """Log prior for a standard deviation bounded above by `upper`.

    The bound may move with other parameters (the Beta variance constraint),
    so the density accounts for it: Uniform(0, upper) has density 1/upper and
    the Half-Cauchy alternative is renormalised to the interval.
    """
    if not 0.0 < sd < upper:
        return -np.inf
    if cfg.scale_prior == "uniform":
        return -math.log(upper)
    lp = float(half_cauchy_logpdf(sd, cfg.half_cauchy_scale))
    mass = (2.0 / math.pi) * math.atan(upper / cfg.half_cauchy_scale)
    return lp - math.log(mass)


def _coef_log_prior(value: float, cfg: PriorConfig) -> float:
    return float(normal_logpdf(value, 0.0, cfg.coef_sd))


def _logistic_block_log_prior(params: StructuralParams, cfg: PriorConfig) -> float:
    total = float(logistic_logpdf(params.intercept))
    total += _coef_log_prior(params.slope_base, cfg)
    if params.slope_age is not None:
        total += _coef_log_prior(params.slope_age, cfg)
    for effects in (params.ethnicity_effects, params.employment_effects):
        if effects is not None:
            for value in effects[1:]:
                total += _coef_log_prior(value, cfg)
    return total


def log_prior(params: ArmParams, family: ModelFamily, cfg: PriorConfig) -> float:
    """Joint log prior for one arm; -inf outside the parameter support."""
    total = _coef_log_prior(params.effect.intercept, cfg)
    total += _coef_log_prior(params.effect.slope_base, cfg)
    total += _coef_log_prior(params.cost.intercept, cfg)
    total += _coef_log_prior(params.cost.slope_eff, cfg)
    total += _coef_log_prior(params.baseline.location, cfg)

    if family is ModelFamily.BIVARIATE_NORMAL:
        total += _scale_log_prior(params.effect.sd, cfg.sigma_upper, cfg)
        total += _scale_log_prior(params.baseline.sd, cfg.sigma_upper, cfg)
        # joint support: the conditional cost variance must stay positive
        if params.cost.sd**2 <= (params.effect.sd * params.cost.slope_eff) ** 2:
            return -np.inf
    else:
        mu = float(expit(params.effect.intercept))
        total += _scale_log_prior(params.effect.sd, math.sqrt(mu * (1.0 - mu)), cfg)
        mu_b = float(expit(params.baseline.location))
        total += _scale_log_prior(
            params.baseline.sd, math.sqrt(mu_b * (1.0 - mu_b)), cfg
        )
    total += _scale_log_prior(params.cost.sd, cfg.sigma_upper, cfg)

    if family is ModelFamily.HURDLE:
        if params.structural is None or params.baseline_ones is None:
            raise ValueError("hurdle parameters need both logistic components")
        total += _logistic_block_log_prior(params.structural, cfg)
        total += _logistic_block_log_prior(params.baseline_ones, cfg)
    return float(total)


# ---------------------------------------------------------------------------
# Missingness scenarios for the unresolved indicators
# ---------------------------------------------------------------------------


def apply_mnar_scenario(
    dataset: TrialDataset,
    scenario: MnarScenario,
    custom_assignments: Mapping[str, int] | None = None,
) -> dict[str, int]:
    """Fixed structural-one assignments implied by a missingness scenario.

    Only records whose status is ambiguous are ever assigned; known statuses
    are derived from the data and never altered. Under MAR the result is empty
    and the indicators are left to be sampled.
    """
    status = {
        rec.record_id: classify_structural_status(rec.utilities)
        for rec in dataset.records
    }
    ambiguous = {
        rec.record_id: rec.arm
        for rec in dataset.records
        if status[rec.record_id] is StructuralStatus.AMBIGUOUS
    }
    if scenario is MnarScenario.MAR:
        return {}
    if scenario is MnarScenario.CUSTOM:
        if custom_assignments is None:
            raise ValueError("custom scenario needs explicit assignments")
        out = {}
        for rec_id, value in custom_assignments.items():
            if rec_id not in status:
                raise ValueError(f"unknown record id {rec_id!r}")
            if rec_id not in ambiguous:
                raise ValueError(
                    f"record {rec_id!r} has a known structural status and "
                    "cannot be reassigned"
                )
            if value not in (0, 1):
                raise ValueError(f"indicator for {rec_id!r} must be 0 or 1")
            out[rec_id] = int(value)
        return out
    per_arm = {
        MnarScenario.MNAR1: (1, 1),
        MnarScenario.MNAR2: (0, 0),
        MnarScenario.MNAR3: (1, 0),
        MnarScenario.MNAR4: (0, 1),
    }[scenario]
    return {rec_id: per_arm[arm - 1] for rec_id, arm in ambiguous.items()}


# ---------------------------------------------------------------------------
# Spec (de)serialisation
# ---------------------------------------------------------------------------


def spec_to_json(spec: ModelSpec) -> dict:
    out: dict = {
        "family": spec.family.value,
        "epsilon": spec.epsilon,
        "mnar_scenario": spec.mnar_scenario.value,
        "hurdle_covariates": list(spec.hurdle_covariates),
        "point_mass_mode": {"kind": spec.point_mass_mode.kind},
        "priors": {
            "coef_sd": spec.prior_config.coef_sd,
            "scale_prior": spec.prior_config.scale_prior,
            "sigma_upper": spec.prior_config.sigma_upper,
            "half_cauchy_scale": spec.prior_config.half_cauchy_scale,
        },
    }
    if spec.point_mass_mode.ones_sd is not None:
        out["point_mass_mode"]["ones_sd"] = spec.point_mass_mode.ones_sd
    if spec.custom_indicators is not None:
        out["custom_indicators"] = dict(spec.custom_indicators)
    return out


def spec_from_json(source: dict | str | Path) -> ModelSpec:
    """Build a ModelSpec from a JSON dict or a path to a JSON file."""
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            source = json.load(fh)
    if not isinstance(source, dict):
        raise ValueError("model spec JSON must be an object")
    pm = source.get("point_mass_mode", {"kind": "exact"})
    priors = source.get("priors", {})
    return ModelSpec(
        family=ModelFamily(source["family"]),
        epsilon=float(source.get("epsilon", 1e-4)),
        prior_config=PriorConfig(
            coef_sd=float(priors.get("coef_sd", 1.0 / math.sqrt(1e-5))),
            scale_prior=priors.get("scale_prior", "uniform"),
            sigma_upper=float(priors.get("sigma_upper", 1000.0)),
            half_cauchy_scale=float(priors.get("half_cauchy_scale", 2.5)),
        ),
        hurdle_covariates=tuple(source.get("hurdle_covariates", ())),
        point_mass_mode=PointMassMode(
            kind=pm.get("kind", "exact"),
            ones_sd=pm.get("ones_sd"),
        ),
        mnar_scenario=MnarScenario(source.get("mnar_scenario", "mar")),
        custom_indicators=source.get("custom_indicators"),
    )
