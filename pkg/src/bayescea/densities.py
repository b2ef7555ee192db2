"""Vectorised log densities and the mean/sd Beta parameterisation.

These are the numerical kernels shared by the likelihood modules, the sampler
and the deviance computation. They return -inf (never raise) for points
outside the support so that Metropolis proposals can be rejected cheaply.
"""

from __future__ import annotations

import numpy as np
from scipy.special import betaln, expit, gammaln, logit, ndtri

__all__ = [
    "normal_logpdf",
    "beta_logpdf",
    "beta_logpdf_mean_sd",
    "beta_shapes_from_mean_sd",
    "beta_mean_sd_from_shapes",
    "gamma_logpdf_shape_rate",
    "bernoulli_logpmf_logit",
    "logistic_logpdf",
    "half_cauchy_logpdf",
    "sample_beta_mean_sd",
    "sample_gamma_mean_sd",
    "sample_truncated_normal_positive",
    "expit",
    "logit",
]

_LOG_2PI = np.log(2.0 * np.pi)
NEG_INF = -np.inf


def normal_logpdf(x, mean, sd):
    """Gaussian log density; -inf where sd <= 0."""
    x = np.asarray(x, dtype=float)
    sd = np.asarray(sd, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (x - mean) / sd
        out = -0.5 * z * z - np.log(sd) - 0.5 * _LOG_2PI
    return np.where(sd > 0, out, NEG_INF)


def beta_logpdf(x, a, b):
    """Beta log density with shape parameters; -inf outside (0, 1) or for bad shapes."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    valid = (x > 0.0) & (x < 1.0) & (a > 0.0) & (b > 0.0)
    xc = np.where(valid, x, 0.5)
    ac = np.where(a > 0, a, 1.0)
    bc = np.where(b > 0, b, 1.0)
    out = (
        (ac - 1.0) * np.log(xc)
        + (bc - 1.0) * np.log1p(-xc)
        - betaln(ac, bc)
    )
    return np.where(valid, out, NEG_INF)


def beta_shapes_from_mean_sd(mean, sd):
    """Map (mean, sd) to Beta shapes (a, b) via the scale tau = mean(1-mean)/sd^2 - 1.

    Valid only when sd^2 < mean(1-mean); invalid inputs give non-positive shapes,
    which downstream densities turn into -inf.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = mean * (1.0 - mean) / (sd * sd) - 1.0
    return mean * tau, (1.0 - mean) * tau


def beta_mean_sd_from_shapes(a, b):
    """Inverse of `beta_shapes_from_mean_sd`."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mean = a / (a + b)
    var = a * b / ((a + b) ** 2 * (a + b + 1.0))
    return mean, np.sqrt(var)


def beta_logpdf_mean_sd(x, mean, sd):
    """Beta log density in the mean/sd parameterisation."""
    a, b = beta_shapes_from_mean_sd(mean, sd)
    return beta_logpdf(x, a, b)


def gamma_logpdf_shape_rate(x, shape, rate):
    """Gamma log density; -inf outside (0, inf) or for bad parameters."""
    x = np.asarray(x, dtype=float)
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    valid = (x > 0.0) & (shape > 0.0) & (rate > 0.0)
    xc = np.where(valid, x, 1.0)
    sc = np.where(shape > 0, shape, 1.0)
    rc = np.where(rate > 0, rate, 1.0)
    out = sc * np.log(rc) - gammaln(sc) + (sc - 1.0) * np.log(xc) - rc * xc
    return np.where(valid, out, NEG_INF)


def bernoulli_logpmf_logit(d, logit_p):
    """Bernoulli log pmf with the success probability on the logit scale."""
    d = np.asarray(d, dtype=float)
    logit_p = np.asarray(logit_p, dtype=float)
    # d*lp - log(1 + exp(lp)), stable for large |lp|
    return d * logit_p - np.logaddexp(0.0, logit_p)


def logistic_logpdf(x, loc=0.0, scale=1.0):
    """Standard logistic log density (value log(1/4) at the location)."""
    z = (np.asarray(x, dtype=float) - loc) / scale
    return -z - 2.0 * np.log1p(np.exp(-z)) - np.log(scale)


def half_cauchy_logpdf(x, scale):
    """Half-Cauchy log density on (0, inf)."""
    x = np.asarray(x, dtype=float)
    out = (
        np.log(2.0 / np.pi)
        - np.log(scale)
        - np.log1p((x / scale) ** 2)
    )
    return np.where(x > 0, out, NEG_INF)


def sample_beta_mean_sd(rng, mean, sd, size=None):
    """Draw Beta variates parameterised by mean and sd."""
    a, b = beta_shapes_from_mean_sd(mean, sd)
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
        raise ValueError("beta mean/sd outside the feasible region sd^2 < mean(1-mean)")
    return rng.beta(a, b, size=size)


def sample_gamma_mean_sd(rng, mean, sd, size=None):
    """Draw Gamma variates with the given mean and sd (shape/rate internally)."""
    mean = np.asarray(mean, dtype=float)
    if np.any(mean <= 0) or sd <= 0:
        raise ValueError("gamma mean and sd must be positive")
    shape = (mean / sd) ** 2
    scale = sd * sd / mean
    return rng.gamma(shape, scale, size=size)


def sample_truncated_normal_positive(rng, mean, sd, size=None):
    """Draw from Normal(mean, sd) conditioned on being > 0 (inverse cdf)."""
    mean = np.asarray(mean, dtype=float)
    lo = _ndtr(-mean / sd)  # P(X <= 0)
    u = rng.uniform(size=size if size is not None else np.shape(mean))
    p = lo + u * (1.0 - lo)
    p = np.clip(p, 1e-15, 1.0 - 1e-16)
    return mean + sd * ndtri(p)


def _ndtr(z):
    from scipy.special import ndtr

    return ndtr(z)
