"""Closed-form Renyi divergences for the audited mechanisms.

All values refer to the adjacent pair ``x = (1, 0, ..., 0)``,
``x' = (0, ..., 0)`` on the unit cube, where the sum statistic and the total
loss gradient both have sensitivity 1.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate, stats

from .exceptions import NumericalFailure

SUBSAMPLE_FORMULAS = ("fixed_order", "order_j")


def _check_order(lam: float) -> None:
    if not lam > 1:
        raise ValueError(f"Renyi order must be > 1, got {lam}")


def _integer_order(lam) -> int:
    _check_order(lam)
    if float(lam) != int(lam):
        raise ValueError(f"this oracle needs an integer order, got {lam}")
    return int(lam)


def eps_laplace(lam: float, b: float) -> float:
    """Renyi divergence between Lap(1, b) and Lap(0, b)."""
    _check_order(lam)
    if b <= 0:
        raise ValueError("b must be positive")
    # log-sum-exp form keeps large lam / small b finite
    a1 = math.log(lam / (2 * lam - 1)) + (lam - 1) / b
    a2 = math.log((lam - 1) / (2 * lam - 1)) - lam / b
    hi = max(a1, a2)
    return (hi + math.log(math.exp(a1 - hi) + math.exp(a2 - hi))) / (lam - 1)


def eps_gaussian(lam: float, b: float) -> float:
    """Renyi divergence between N(1, b^2) and N(0, b^2): ``lam / (2 b^2)``."""
    _check_order(lam)
    if b <= 0:
        raise ValueError("b must be positive")
    return lam / (2 * b**2)


def eps_subsampled(
    lam: int,
    gamma: float,
    eps0_fn: Callable[[float], float],
    formula: str = "order_j",
) -> float:
    """Poisson-subsampled version of an additive-noise mechanism.

    Parameters
    ----------
    lam : int
        Integer Renyi order >= 2.
    gamma : float
        Inclusion probability in (0, 1).
    eps0_fn : callable
        Divergence of the base mechanism as a function of the order.
    formula : {"order_j", "fixed_order"}
        ``"order_j"`` (default) evaluates the base divergence at the term
        index ``j``; this is the exact divergence of the mixture
        ``(1-gamma) q + gamma p`` against ``q`` for the fixed adjacent pair.
        ``"fixed_order"`` evaluates it at ``lam`` in every term, which can only
        be larger. Both agree at ``lam = 2``.
    """
    lam = _integer_order(lam)
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if formula not in SUBSAMPLE_FORMULAS:
        raise ValueError(f"formula must be one of {SUBSAMPLE_FORMULAS}")
    log_terms = [(lam - 1) * math.log1p(-gamma) + math.log(lam * gamma - gamma + 1)]
    for j in range(2, lam + 1):
        eps0 = eps0_fn(lam if formula == "fixed_order" else j)
        log_terms.append(
            math.log(math.comb(lam, j))
            + (lam - j) * math.log1p(-gamma)
            + j * math.log(gamma)
            + (j - 1) * eps0
        )
    return float(np.logaddexp.reduce(log_terms)) / (lam - 1)


def _rr_probs(eps0: float) -> tuple[float, float]:
    if eps0 < 0:
        raise ValueError("eps0 must be nonnegative")
    keep = 1.0 / (1.0 + math.exp(-eps0))
    return keep, 1.0 - keep


def eps_rr(lam: float, eps0: float) -> float:
    """Bitwise randomized response on m bits (only one bit differs)."""
    _check_order(lam)
    p1, p0 = _rr_probs(eps0)
    a1 = lam * math.log(p1) + (1 - lam) * math.log(p0)
    a2 = (1 - lam) * math.log(p1) + lam * math.log(p0)
    return float(np.logaddexp(a1, a2)) / (lam - 1)


def binomial_central_moment(m: int, p: float, j: int, center: float | None = None) -> float:
    """Exact ``E[(Z - center)^j]`` for ``Z ~ Bin(m, p)`` by summing the pmf."""
    if center is None:
        center = m * p
    z = np.arange(m + 1)
    pmf = stats.binom.pmf(z, m, p)
    return float(np.sum(pmf * (z - center) ** j))


def div_shuffled_rr(lam: int, eps0: float, m: int) -> float:
    """Divergence of shuffled randomized response on the fixed adjacent pair."""
    lam = _integer_order(lam)
    if m < 1:
        raise ValueError("m must be >= 1")
    if eps0 < 0:
        raise ValueError("eps0 must be nonnegative")
    e = math.exp(eps0)
    flip = 1.0 / (e + 1.0)
    total = 1.0 + math.comb(lam, 2) * (e - 1.0) ** 2 / (m * e)
    scale = (e * e - 1.0) / (m * e)
    for j in range(3, lam + 1):
        total += (
            math.comb(lam, j)
            * scale**j
            * binomial_central_moment(m, flip, j, center=m * flip)
        )
    return math.log(total) / (lam - 1)


def div_ngd(lam: float, b: float, m: int, eta: float, iters: int, grad_sensitivity: float = 1.0) -> float:
    """Divergence of the final iterate of noisy gradient descent.

    Quadratic loss ``(theta - x_i)^2 / 2``, unconstrained parameter space,
    ``theta_0 = 0``.
    """
    _check_order(lam)
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if b <= 0 or m < 1:
        raise ValueError("b must be positive and m >= 1")
    decay = (1.0 - eta) ** iters
    return (
        lam * grad_sensitivity**2 / (4 * b**2 * m**2)
        * (2 - eta) / (1 + decay)
        * (1 - decay)
    )


def renyi_numeric_reference(
    p: Callable[[float], float],
    q: Callable[[float], float],
    lam: float,
    interval: tuple[float, float],
    breakpoints: tuple[float, ...] = (),
    tol: float = 1e-13,
) -> float:
    """Adaptive-quadrature Renyi divergence of two analytic densities.

    ``interval`` must hold all but a negligible fraction of both masses.
    Only used to cross-check closed forms and grid code.
    """
    _check_order(lam)
    lo, hi = interval

    def integrand(t):
        pt, qt = p(t), q(t)
        if pt <= 0:
            return 0.0
        if qt <= 0:
            return math.inf
        return math.exp(lam * math.log(pt) + (1 - lam) * math.log(qt))

    inner = [c for c in sorted(breakpoints) if lo < c < hi]
    edges = [lo, *inner, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(integrand, a, b, epsabs=tol, epsrel=tol, limit=500)
        if not np.isfinite(val) or err > 1e-8 * max(abs(val), 1.0):
            raise NumericalFailure(f"quadrature on [{a}, {b}] did not converge (err={err:g})")
        total += val
    if total <= 0:
        raise NumericalFailure("non-positive integral")
    return math.log(total) / (lam - 1)


def true_divergence(spec, lam: float, m: int, subsample_formula: str = "order_j") -> float:
    """Closed-form divergence for ``spec`` on the default adjacent pair of size ``m``."""
    from . import mechanisms as mech

    if isinstance(spec, mech.Laplace):
        return eps_laplace(lam, spec.b)
    if isinstance(spec, mech.Gaussian):
        return eps_gaussian(lam, spec.b)
    if isinstance(spec, mech.SubsampledLaplace):
        return eps_subsampled(lam, spec.gamma, lambda j: eps_laplace(j, spec.b), subsample_formula)
    if isinstance(spec, mech.SubsampledGaussian):
        return eps_subsampled(lam, spec.gamma, lambda j: eps_gaussian(j, spec.b), subsample_formula)
    if isinstance(spec, mech.RandomizedResponse):
        return eps_rr(lam, spec.eps0)
    if isinstance(spec, mech.ShuffledRandomizedResponse):
        return div_shuffled_rr(lam, spec.eps0, m)
    if isinstance(spec, mech.NoisyGradientDescent):
        if spec.theta0 != 0:
            raise ValueError("the closed form assumes theta0 = 0")
        return div_ngd(lam, spec.b, m, spec.eta, spec.iters)
    raise TypeError(f"no oracle for {spec!r}")
