"""scikit-learn style wrappers around the density and divergence routines."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import density as dens
from . import divergence as div
from ._validation import check_pair, check_samples


class RelativeFrequencyEstimator(BaseEstimator):
    """Empirical probability mass function over ``0, ..., alphabet_size - 1``."""

    def __init__(self, alphabet_size=None):
        self.alphabet_size = alphabet_size

    def fit(self, X, y=None):
        samples = check_samples(X, True, self.alphabet_size)
        self.table_ = dens.fit_rfe(samples)
        self.n_samples_ = samples.n
        return self

    def score_samples(self, X):
        """Log mass of each atom in ``X`` (``-inf`` for unseen atoms)."""
        check_is_fitted(self, "table_")
        atoms = np.asarray(X, dtype=np.int64).ravel()
        probs = np.zeros(atoms.size)
        ok = (atoms >= 0) & (atoms < self.table_.probs.size)
        probs[ok] = self.table_.probs[atoms[ok]]
        with np.errstate(divide="ignore"):
            return np.log(probs)


class GridKernelDensity(BaseEstimator):
    """Kernel density estimate evaluated on an even grid.

    Parameters
    ----------
    kernel : {"gaussian", "silverman"}
    bandwidth : str
        ``"rot"``, ``"plugin"`` or ``"fixed:<h>"``.
    undersmooth : float
        Exponent applied to data-driven bandwidths.
    grid_size : int
        Number of grid points; the grid spans the data range padded by
        three bandwidths.
    """

    def __init__(self, kernel="gaussian", bandwidth="rot",
                 undersmooth=dens.DEFAULT_UNDERSMOOTH, grid_size=dens.DEFAULT_GRID_SIZE):
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.undersmooth = undersmooth
        self.grid_size = grid_size

    def fit(self, X, y=None):
        samples = check_samples(X, False)
        rule = dens.BandwidthRule.parse(self.bandwidth, self.undersmooth)
        self.bandwidth_ = dens.select_bandwidth(samples, rule)
        start, step = dens.make_joint_grid(samples, samples, self.bandwidth_, self.grid_size)
        self.density_ = dens.fit_kde(samples, self.kernel, self.bandwidth_,
                                     (start, step, self.grid_size))
        return self

    def score_samples(self, X):
        """Log density at ``X`` by linear interpolation (``-inf`` off-grid)."""
        check_is_fitted(self, "density_")
        t = np.asarray(X, dtype=float).ravel()
        d = self.density_
        vals = np.interp(t, d.grid, d.values, left=0.0, right=0.0)
        with np.errstate(divide="ignore"):
            return np.log(vals)


class RenyiDPAuditor(BaseEstimator):
    """Statistical lower bound on the Renyi divergence between two output laws.

    ``fit(X, y)`` takes ``X``, the outputs of a mechanism on one database,
    and ``y``, its outputs on an adjacent database. Integer samples are
    treated as atoms of a finite alphabet unless ``discrete`` says
    otherwise.

    Attributes
    ----------
    result_ : BoundResult
    lower_bound_, plugin_divergence_, sigma_hat_ : float
    p_hat_, q_hat_ : DiscreteDensityTable or GridDensity

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> X = 1 + 5 * rng.standard_normal(200_000)
    >>> y = 5 * rng.standard_normal(200_000)
    >>> auditor = RenyiDPAuditor(lam=2).fit(X, y)
    >>> bool(0.02 < auditor.lower_bound_ < 0.04)
    True
    """

    def __init__(self, lam=2.0, alpha=div.DEFAULT_ALPHA, tau=div.DEFAULT_TAU,
                 beta=div.DEFAULT_BETA, kernel="gaussian", bandwidth="rot",
                 undersmooth=dens.DEFAULT_UNDERSMOOTH, grid_size=dens.DEFAULT_GRID_SIZE,
                 discrete="auto", alphabet_size=None):
        self.lam = lam
        self.alpha = alpha
        self.tau = tau
        self.beta = beta
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.undersmooth = undersmooth
        self.grid_size = grid_size
        self.discrete = discrete
        self.alphabet_size = alphabet_size

    def _config(self) -> div.EstimatorConfig:
        return div.EstimatorConfig(
            lam=self.lam,
            alpha=self.alpha,
            floor=div.FloorParams(self.tau, self.beta),
            bandwidth=dens.BandwidthRule.parse(self.bandwidth, self.undersmooth),
            kernel=self.kernel,
            grid_size=self.grid_size,
        )

    def fit(self, X, y):
        config = self._config()
        samples_p, samples_q = check_pair(X, y, self.discrete, self.alphabet_size)
        self.p_hat_, self.q_hat_, self._info = div.estimate_densities(samples_p, samples_q, config)
        self.n_samples_ = samples_p.n
        self.result_ = self.bound()
        self.lower_bound_ = self.result_.lower_bound
        self.plugin_divergence_ = self.result_.plugin_divergence
        self.sigma_hat_ = self.result_.sigma_hat
        return self

    def bound(self, lam=None, alpha=None) -> div.BoundResult:
        """Bound for another order or level, reusing the fitted densities."""
        check_is_fitted(self, "p_hat_")
        lam = self.lam if lam is None else lam
        alpha = self.alpha if alpha is None else alpha
        if not lam > 1 or not 0 < alpha < 1:
            raise ValueError("need lam > 1 and 0 < alpha < 1")
        return div.bound_from_densities(self.p_hat_, self.q_hat_, self.n_samples_, lam, alpha,
                                        div.FloorParams(self.tau, self.beta), self._info)
