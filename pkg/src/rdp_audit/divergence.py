"""Floored plug-in Renyi divergence and its statistical lower bound.

Given density estimates ``p_hat`` (outputs on one database) and ``q_hat``
(outputs on an adjacent one), the denominator density is floored with a
LogSumExp softmax at level ``tau`` and sharpness ``beta``. The plug-in
divergence plus a normal-quantile multiple of the delta-method standard
error gives a lower bound on the true divergence that holds with
probability about ``1 - alpha``.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from typing import Sequence, Union

import numpy as np
from scipy.special import expit, logsumexp

from . import density as dens
from .density import BandwidthRule, DiscreteDensityTable, GridDensity
from .exceptions import DegenerateEstimateError
from .mechanisms import SampleSet

logger = logging.getLogger(__name__)

Density = Union[DiscreteDensityTable, GridDensity]

DEFAULT_ALPHA = 0.05
DEFAULT_TAU = 1e-5
DEFAULT_BETA = 1e5
DEFAULT_N = 5_000_000


@dataclasses.dataclass(frozen=True)
class FloorParams:
    tau: float = DEFAULT_TAU
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not (self.tau > 0 and self.beta > 0):
            raise ValueError("tau and beta must be positive")
        if self.loose:
            logger.warning("beta * tau = %g < 1: the softmax floor is a loose "
                           "approximation of max(t, tau)", self.beta * self.tau)

    @property
    def loose(self) -> bool:
        return self.beta * self.tau < 1 - 1e-9


@dataclasses.dataclass(frozen=True)
class EstimatorConfig:
    lam: float = 2.0
    alpha: float = DEFAULT_ALPHA
    floor: FloorParams = dataclasses.field(default_factory=FloorParams)
    bandwidth: BandwidthRule = dataclasses.field(default_factory=BandwidthRule)
    kernel: str = "gaussian"
    grid_size: int = dens.DEFAULT_GRID_SIZE

    def __post_init__(self):
        if not self.lam > 1:
            raise ValueError(f"Renyi order must be > 1, got {self.lam}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        dens.get_kernel(self.kernel)


@dataclasses.dataclass(frozen=True)
class BoundResult:
    lower_bound: float
    plugin_divergence: float
    sigma_hat: float
    n: int
    lam: float
    alpha: float
    tau: float
    beta: float
    diagnostics: dict = dataclasses.field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lower_bound": self.lower_bound,
            "plugin_divergence": self.plugin_divergence,
            "sigma_hat": self.sigma_hat,
            "n": self.n,
            "lambda": self.lam,
            "alpha": self.alpha,
            "tau": self.tau,
            "beta": self.beta,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> BoundResult:
        return cls(data["lower_bound"], data["plugin_divergence"], data["sigma_hat"],
                   data["n"], data["lambda"], data["alpha"], data["tau"], data["beta"],
                   dict(data.get("diagnostics", {})))


# Softmax floor --------------------------------------------------------------------


def softmax_floor(t, floor: FloorParams):
    """``log(exp(beta t) + exp(beta tau)) / beta`` without overflow."""
    t = np.asarray(t, dtype=float)
    gap = np.abs(t - floor.tau)
    out = np.maximum(t, floor.tau) + np.log1p(np.exp(-floor.beta * gap)) / floor.beta
    return out if out.ndim else float(out)


def softmax_deriv(t, floor: FloorParams):
    """Derivative of :func:`softmax_floor` in ``t``: a logistic in ``beta (t - tau)``."""
    out = expit(floor.beta * (np.asarray(t, dtype=float) - floor.tau))
    return out if np.ndim(out) else float(out)


# Integrals ------------------------------------------------------------------------------


def _arrays(p: Density, q: Density) -> tuple[np.ndarray, np.ndarray, float]:
    """Value arrays and the integration weight (1 for sums, step for grids)."""
    if isinstance(p, DiscreteDensityTable) and isinstance(q, DiscreteDensityTable):
        if p.probs.size != q.probs.size:
            raise ValueError("discrete densities live on different alphabets")
        return p.probs, q.probs, 1.0
    if isinstance(p, GridDensity) and isinstance(q, GridDensity):
        if not p.same_grid(q):
            raise ValueError("grid densities live on different grids")
        return p.values, q.values, p.step
    raise ValueError("p and q must be densities of the same kind")


def _log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def _power_integral(weight, log_p, p_exp, log_q, q_exp, support) -> float:
    """``weight * sum p^p_exp q^q_exp`` over ``support``; terms off it are 0."""
    terms = np.exp(p_exp * log_p[support] + q_exp * log_q[support])
    return weight * float(np.sum(terms))


def _log_power_integral(weight, log_p, p_exp, log_q, q_exp, support) -> float:
    """Logarithm of :func:`_power_integral`, immune to overflow."""
    terms = p_exp * log_p[support] + q_exp * log_q[support]
    if terms.size == 0:
        return -math.inf
    return math.log(weight) + float(logsumexp(terms))


def renyi_exact(p: Density, q: Density, lam: float) -> float:
    """Renyi divergence of order ``lam`` (sum or grid Riemann sum)."""
    if not lam > 1:
        raise ValueError("Renyi order must be > 1")
    pv, qv, weight = _arrays(p, q)
    support = pv > 0
    if np.any(qv[support] <= 0):
        return math.inf
    return _log_power_integral(weight, _log(pv), lam, _log(qv), 1 - lam, support) / (lam - 1)


def renyi_plugin(p_hat: Density, q_hat: Density, lam: float, floor: FloorParams) -> float:
    """Divergence of ``p_hat`` from the softmax-floored ``q_hat``."""
    if not lam > 1:
        raise ValueError("Renyi order must be > 1")
    pv, qv, weight = _arrays(p_hat, q_hat)
    support = pv > 0
    log_total = _log_power_integral(weight, _log(pv), lam, _log(softmax_floor(qv, floor)), 1 - lam, support)
    return log_total / (lam - 1)


def variance_components(p_hat: Density, q_hat: Density, lam: float, floor: FloorParams) -> dict:
    """Unclamped pieces of the delta-method variance.

    Returns ``s1``, ``s2`` (the two squared partial standard deviations
    before clamping) and ``denominator`` (the integral of
    ``p_hat^lam q_tau^(1-lam)``).
    """
    pv, qv, weight = _arrays(p_hat, q_hat)
    support = pv > 0
    log_p = _log(pv)
    log_qt = _log(softmax_floor(qv, floor))
    i1 = _power_integral(weight, log_p, lam, log_qt, 1 - lam, support)
    i2 = _power_integral(weight, log_p, 2 * lam - 1, log_qt, 2 - 2 * lam, support)

    # terms carrying q_hat itself also vanish where q_hat = 0
    both = support & (qv > 0)
    log_pi = _log(softmax_deriv(qv, floor))
    log_q = _log(qv)
    base = log_q[both] - lam * log_qt[both] + lam * log_p[both] + log_pi[both]
    j1 = weight * float(np.sum(np.exp(2 * base - log_q[both])))
    j2 = weight * float(np.sum(np.exp(base)))

    return {
        "s1": lam**2 * (i2 - i1 * i1),
        "s2": (1 - lam) ** 2 * (j1 - j2 * j2),
        "denominator": i1,
    }


def variance_estimate(p_hat: Density, q_hat: Density, lam: float, floor: FloorParams) -> float:
    """Estimated asymptotic standard deviation ``sigma_hat`` (not its square)."""
    return _sigma_from(variance_components(p_hat, q_hat, lam, floor), lam)[0]


def _sigma_from(parts: dict, lam: float) -> tuple[float, bool]:
    denom = parts["denominator"]
    if not denom > 0:
        raise DegenerateEstimateError("the plug-in integral is zero")
    s1, s2 = parts["s1"], parts["s2"]
    clamped = s1 < 0 or s2 < 0
    var = (max(s1, 0.0) + max(s2, 0.0)) / ((lam - 1) * denom) ** 2
    return math.sqrt(var), clamped


# Normal quantile ---------------------------------------------------------------------

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_quantile(alpha: float) -> float:
    """Standard normal quantile.

    Acklam's rational approximation (relative error about 1e-9) followed
    by one Newton step against the erfc-based CDF.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if alpha == 0.5:
        return 0.0
    if alpha < _P_LOW:
        r = math.sqrt(-2 * math.log(alpha))
        x = ((((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5])
             / ((((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1))
    elif alpha <= 1 - _P_LOW:
        r = alpha - 0.5
        s = r * r
        x = ((((((_A[0] * s + _A[1]) * s + _A[2]) * s + _A[3]) * s + _A[4]) * s + _A[5]) * r
             / (((((_B[0] * s + _B[1]) * s + _B[2]) * s + _B[3]) * s + _B[4]) * s + 1))
    else:
        r = math.sqrt(-2 * math.log1p(-alpha))
        x = -((((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5])
              / ((((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1))
    density = math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    return x - (_normal_cdf(x) - alpha) / density


# Lower bound -----------------------------------------------------------------------------


def estimate_densities(samples_p: SampleSet, samples_q: SampleSet,
                       config: EstimatorConfig) -> tuple[Density, Density, dict]:
    """RFE tables for discrete samples, KDEs on one shared grid otherwise."""
    if samples_p.kind != samples_q.kind:
        raise ValueError("samples must be of the same kind")
    if samples_p.kind == "discrete":
        if samples_p.alphabet_size != samples_q.alphabet_size:
            raise ValueError("discrete samples use different alphabets")
        info = {"alphabet_size": samples_p.alphabet_size}
        return dens.fit_rfe(samples_p), dens.fit_rfe(samples_q), info

    h_p = dens.select_bandwidth(samples_p, config.bandwidth)
    h_q = dens.select_bandwidth(samples_q, config.bandwidth)
    start, step = dens.make_joint_grid(samples_p, samples_q, max(h_p, h_q), config.grid_size)
    grid = (start, step, config.grid_size)
    p_hat = dens.fit_kde(samples_p, config.kernel, h_p, grid)
    q_hat = dens.fit_kde(samples_q, config.kernel, h_q, grid)
    info = {
        "bandwidth_p": h_p,
        "bandwidth_q": h_q,
        "grid_start": start,
        "grid_step": step,
        "grid_size": config.grid_size,
        "mass_deficit_p": 1.0 - p_hat.mass(),
        "mass_deficit_q": 1.0 - q_hat.mass(),
        "clamped_points": p_hat.diagnostics["clamped_points"] + q_hat.diagnostics["clamped_points"],
        "clamped_mass": p_hat.diagnostics["clamped_mass"] + q_hat.diagnostics["clamped_mass"],
    }
    return p_hat, q_hat, info


def bound_from_densities(p_hat: Density, q_hat: Density, n: int, lam: float, alpha: float,
                         floor: FloorParams, info: dict | None = None) -> BoundResult:
    """Assemble the lower bound from already fitted density estimates."""
    plugin = renyi_plugin(p_hat, q_hat, lam, floor)
    parts = variance_components(p_hat, q_hat, lam, floor)
    sigma, clamped = _sigma_from(parts, lam)
    z = normal_quantile(alpha)
    lower = plugin + z * sigma / math.sqrt(n) if z != 0.0 else plugin

    pv, qv, weight = _arrays(p_hat, q_hat)
    low_q_mass = weight * float(np.sum(pv[qv < floor.tau]))
    p_mass = weight * float(np.sum(pv))
    diagnostics = dict(info or {})
    diagnostics.update(
        denominator=parts["denominator"],
        sigma1_sq=parts["s1"],
        sigma2_sq=parts["s2"],
        variance_clamped=clamped,
        floor_loose=floor.loose,
        low_q_mass_fraction=low_q_mass / p_mass if p_mass > 0 else 0.0,
    )
    if diagnostics["low_q_mass_fraction"] > 0.5:
        logger.warning("more than half of the p_hat mass sits where q_hat < tau")
    return BoundResult(lower, plugin, sigma, int(n), float(lam), float(alpha),
                       floor.tau, floor.beta, diagnostics)


def lower_bound(samples_p: SampleSet, samples_q: SampleSet, config: EstimatorConfig) -> BoundResult:
    """Statistical lower bound on the Renyi divergence of the two output laws."""
    if samples_p.n != samples_q.n:
        raise ValueError("both samples must have the same size")
    if samples_p.n == 0:
        raise ValueError("samples are empty")
    p_hat, q_hat, info = estimate_densities(samples_p, samples_q, config)
    return bound_from_densities(p_hat, q_hat, samples_p.n, config.lam, config.alpha,
                                config.floor, info)


def combine_bounds(bounds: Sequence[BoundResult]) -> tuple[float, float]:
    """Maximum of independent lower bounds and its joint confidence ``(1-alpha)^N``."""
    if len(bounds) == 0:
        raise ValueError("need at least one bound")
    alphas = {b.alpha for b in bounds}
    if len(alphas) != 1:
        raise ValueError("bounds must share a common alpha")
    alpha = alphas.pop()
    return max(b.lower_bound for b in bounds), (1 - alpha) ** len(bounds)
