"""Relative-frequency and grid kernel density estimates.

Continuous densities live on an even grid and are evaluated by linear
binning followed by a direct (non-FFT) discrete convolution, so results are
deterministic and the Gaussian-kernel estimate is nonnegative by
construction.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from typing import Callable

import numpy as np
from numpy.polynomial import hermite_e
from scipy import integrate

from .exceptions import DegenerateSampleError
from .mechanisms import SampleSet

DEFAULT_GRID_SIZE = 1000
DEFAULT_UNDERSMOOTH = 1.1
GRID_MARGIN = 3.0

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# Kernels ----------------------------------------------------------------------


def _gaussian_kernel(t):
    t = np.asarray(t, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * t * t)


def _silverman_kernel(t):
    a = np.abs(np.asarray(t, dtype=float)) / _SQRT2
    return 0.5 * np.exp(-a) * np.sin(a + math.pi / 4)


@dataclasses.dataclass(frozen=True)
class Kernel:
    """A univariate smoothing kernel, validated when constructed.

    Construction checks unit integral, symmetry, a vanishing first moment,
    (for order 2) a vanishing second moment, and a bounded difference
    quotient on a test grid.
    """

    name: str
    order: int
    pdf: Callable[[np.ndarray], np.ndarray] = dataclasses.field(repr=False, compare=False)

    def __post_init__(self):
        self.check()

    def moment(self, k: int) -> float:
        val, _ = integrate.quad(lambda t: t**k * float(self.pdf(t)), -20, 20,
                                points=[0.0], limit=400, epsabs=1e-12, epsrel=1e-12)
        return val

    def check(self) -> None:
        if abs(self.moment(0) - 1.0) > 1e-6:
            raise ValueError(f"kernel {self.name!r} does not integrate to 1")
        if abs(self.moment(1)) > 1e-6:
            raise ValueError(f"kernel {self.name!r} has a nonzero first moment")
        if self.order >= 2 and abs(self.moment(2)) > 1e-4:
            raise ValueError(f"kernel {self.name!r} is not of order {self.order}")
        t = np.linspace(-20, 20, 40001)
        k = self.pdf(t)
        if np.max(np.abs(k - self.pdf(-t))) > 1e-14:
            raise ValueError(f"kernel {self.name!r} is not symmetric")
        slope = np.max(np.abs(np.diff(k)) / np.diff(t))
        if not np.isfinite(slope) or slope > 10.0:
            raise ValueError(f"kernel {self.name!r} fails the Lipschitz check")

    def __call__(self, t):
        return self.pdf(t)


GAUSSIAN = Kernel("gaussian", 1, _gaussian_kernel)
SILVERMAN = Kernel("silverman", 2, _silverman_kernel)
KERNELS = {k.name: k for k in (GAUSSIAN, SILVERMAN)}


def get_kernel(kernel: str | Kernel) -> Kernel:
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return KERNELS[kernel]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}") from None


# Density containers -------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class DiscreteDensityTable:
    """Probability masses over the atoms ``0, ..., len(probs) - 1``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-d array")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("masses must lie in [0, 1]")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError("masses must sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def atoms(self) -> np.ndarray:
        return np.arange(self.probs.size)

    def __getitem__(self, atom):
        return self.probs[atom]


@dataclasses.dataclass(frozen=True, eq=False)
class GridDensity:
    """Density values at ``start + i * step``, ``i = 0, ..., G - 1``."""

    start: float
    step: float
    values: np.ndarray
    diagnostics: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a grid density needs at least two values")
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("grid density values must be finite and nonnegative")
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.size)

    def mass(self) -> float:
        """Riemann-sum mass ``step * sum(values)``."""
        return self.step * math.fsum(self.values)

    def same_grid(self, other: GridDensity) -> bool:
        return (self.size == other.size and self.start == other.start
                and self.step == other.step)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "value"])
            for t, v in zip(self.grid, self.values):
                writer.writerow([f"{t:.17g}", f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path) -> GridDensity:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        t = np.array([float(r["t"]) for r in rows])
        values = np.array([float(r["value"]) for r in rows])
        step = (t[-1] - t[0]) / (t.size - 1)
        return cls(float(t[0]), float(step), values)


def tabulate(pdf: Callable, start: float, step: float, size: int) -> GridDensity:
    """Grid density of an analytic pdf (used for exact reference densities)."""
    grid = start + step * np.arange(size)
    return GridDensity(start, step, np.asarray(pdf(grid), dtype=float))


# Relative frequency estimator ---------------------------------------------------


def fit_rfe(samples: SampleSet) -> DiscreteDensityTable:
    """Relative frequency of every atom of the declared alphabet."""
    if samples.kind != "discrete":
        raise ValueError("fit_rfe needs a discrete sample")
    if samples.n == 0:
        raise ValueError("cannot fit an empty sample")
    counts = np.bincount(samples.values, minlength=samples.alphabet_size)
    probs = counts / samples.n
    # renormalise so the masses sum to one to within accumulation roundoff
    probs = probs / math.fsum(probs)
    return DiscreteDensityTable(probs)


# Bandwidths ---------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class BandwidthRule:
    """How to pick the KDE bandwidth.

    ``base`` is ``"rot"`` (normal-reference rule of thumb), ``"plugin"``
    (two-stage direct plug-in) or ``"fixed"``. The data-driven bandwidth is
    raised to the power ``undersmooth``; a fixed ``h`` is used as is.
    """

    base: str = "rot"
    h: float | None = None
    undersmooth: float = DEFAULT_UNDERSMOOTH

    def __post_init__(self):
        if self.base not in ("rot", "plugin", "fixed"):
            raise ValueError(f"unknown bandwidth rule {self.base!r}")
        if self.base == "fixed" and (self.h is None or not self.h > 0):
            raise ValueError("a fixed bandwidth needs h > 0")
        if not self.undersmooth >= 1:
            raise ValueError("undersmooth exponent must be >= 1")

    @classmethod
    def parse(cls, text: str, undersmooth: float = DEFAULT_UNDERSMOOTH) -> BandwidthRule:
        """Parse ``rot``, ``plugin`` or ``fixed:<h>``."""
        if text.startswith("fixed:"):
            return cls("fixed", float(text.split(":", 1)[1]), undersmooth)
        return cls(text, None, undersmooth)


def _scale_estimate(x: np.ndarray, iqr_divisor: float) -> float:
    sd = float(np.std(x, ddof=1))
    if not sd > 0:
        raise DegenerateSampleError("sample has zero variance")
    q75, q25 = np.percentile(x, [75, 25])
    iqr_scale = (q75 - q25) / iqr_divisor
    return min(sd, iqr_scale) if iqr_scale > 0 else sd


def rule_of_thumb(x: np.ndarray) -> float:
    """``1.06 * min(sd, IQR / 1.34) * n^(-1/5)``."""
    return 1.06 * _scale_estimate(x, 1.34) * x.size ** (-0.2)


def _linbin(x: np.ndarray, start: float, step: float, size: int) -> np.ndarray:
    u = (x - start) / step
    inside = (u >= 0) & (u <= size - 1)
    u = u[inside]
    k = np.minimum(np.floor(u).astype(np.int64), size - 2)
    w = u - k
    counts = np.bincount(k, weights=1.0 - w, minlength=size)
    counts += np.bincount(k + 1, weights=w, minlength=size)
    return counts[:size]


def _binned_functional(counts: np.ndarray, delta: float, r: int, g: float) -> float:
    """Binned estimate of ``psi_r = int f^(r) f`` with a Gaussian pilot ``g``."""
    n = counts.sum()
    lags = np.arange(-(counts.size - 1), counts.size) * delta / g
    coef = np.zeros(r + 1)
    coef[r] = 1.0
    deriv = (-1) ** r * hermite_e.hermeval(lags, coef) * _gaussian_kernel(lags)
    smoothed = np.convolve(counts, deriv)[counts.size - 1: 2 * counts.size - 1]
    return float(np.dot(counts, smoothed)) / (n * n * g ** (r + 1))


def direct_plugin(x: np.ndarray, gridsize: int = 401) -> float:
    """Two-stage direct plug-in bandwidth for a Gaussian kernel.

    Standardises the data by ``min(sd, IQR / 1.349)``, estimates ``psi_6``
    with a normal-reference pilot, then ``psi_4`` with the AMSE-optimal
    pilot for that estimate, and returns the AMISE-optimal bandwidth.
    """
    n = x.size
    scale = _scale_estimate(x, 1.349)
    z = (x - x.mean()) / scale
    lo, hi = float(z.min()), float(z.max())
    delta = (hi - lo) / (gridsize - 1)
    counts = _linbin(z, lo, delta, gridsize)
    g6 = (2.0 / (7.0 * n)) ** (1.0 / 9.0) * _SQRT2
    psi6 = _binned_functional(counts, delta, 6, g6)
    if not psi6 < 0:
        raise DegenerateSampleError("pilot estimate of psi_6 is not negative")
    g4 = (-3.0 * math.sqrt(2.0 / math.pi) / (psi6 * n)) ** (1.0 / 7.0)
    psi4 = _binned_functional(counts, delta, 4, g4)
    if not psi4 > 0:
        raise DegenerateSampleError("pilot estimate of psi_4 is not positive")
    return scale * (1.0 / (4.0 * math.pi)) ** 0.1 * (1.0 / (psi4 * n)) ** 0.2


def select_bandwidth(samples: SampleSet, rule: BandwidthRule) -> float:
    if rule.base == "fixed":
        return float(rule.h)
    x = np.asarray(samples.values, dtype=float)
    if x.size < 2:
        raise ValueError("bandwidth selection needs at least two samples")
    base = rule_of_thumb(x) if rule.base == "rot" else direct_plugin(x)
    return base ** rule.undersmooth


# Kernel density estimate ----------------------------------------------------------


def make_joint_grid(samples_a: SampleSet, samples_b: SampleSet, h: float,
                    size: int = DEFAULT_GRID_SIZE,
                    margin: float = GRID_MARGIN) -> tuple[float, float]:
    """Shared even grid covering both samples with ``margin * h`` on each side."""
    if samples_a.n == 0 or samples_b.n == 0:
        raise ValueError("both samples must be nonempty")
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if size < 2:
        raise ValueError("grid needs at least two points")
    lo = min(samples_a.values.min(), samples_b.values.min()) - margin * h
    hi = max(samples_a.values.max(), samples_b.values.max()) + margin * h
    return float(lo), float((hi - lo) / (size - 1))


def fit_kde(samples: SampleSet, kernel: str | Kernel, h: float,
            grid: tuple[float, float, int]) -> GridDensity:
    """Kernel density estimate on ``grid = (start, step, size)``.

    Samples are linearly binned onto the grid and the bin counts convolved
    with kernel weights at every grid lag. Negative values (possible for the
    order-2 Silverman kernel) are clamped to zero and reported in
    ``diagnostics``.
    """
    kernel = get_kernel(kernel)
    start, step, size = grid
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if size < 2:
        raise ValueError("grid needs at least two points")
    x = np.asarray(samples.values, dtype=float)
    if x.size == 0:
        raise ValueError("cannot fit an empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")

    counts = _linbin(x, start, step, size)
    lags = np.arange(-(size - 1), size) * (step / h)
    weights = kernel(lags) / h
    values = np.convolve(counts, weights)[size - 1: 2 * size - 1] / x.size

    negative = values < 0
    diagnostics = {
        "bandwidth": float(h),
        "binned_fraction": float(counts.sum() / x.size),
        "clamped_points": int(negative.sum()),
        "clamped_mass": float(-step * values[negative].sum()),
    }
    values = np.where(negative, 0.0, values)
    return GridDensity(float(start), float(step), values, diagnostics)
