"""Databases, adjacency and samplers for the audited mechanisms.

Every sampler is a pure function of its arguments and an explicit
``numpy.random.Generator``; identical inputs give identical output arrays.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Union

import numpy as np

# rows per chunk when a draw needs an (n, m) matrix of uniforms
_CHUNK = 1 << 18


@dataclasses.dataclass(frozen=True)
class Database:
    """Records of m individuals, each a real number in [0, 1]."""

    entries: tuple[float, ...]

    def __post_init__(self):
        entries = tuple(float(e) for e in self.entries)
        if len(entries) < 1:
            raise ValueError("a database needs at least one entry")
        if not all(0.0 <= e <= 1.0 for e in entries):
            raise ValueError("database entries must lie in [0, 1]")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float)

    @property
    def is_binary(self) -> bool:
        return all(e in (0.0, 1.0) for e in self.entries)


@dataclasses.dataclass(frozen=True)
class AdjacentPair:
    left: Database
    right: Database

    def __post_init__(self):
        if len(self.left) != len(self.right):
            raise ValueError("adjacent databases must have equal length")
        n_diff = sum(a != b for a, b in zip(self.left.entries, self.right.entries))
        if n_diff != 1:
            raise ValueError(f"adjacent databases differ in exactly one entry, got {n_diff}")


def default_adjacent_pair(m: int) -> AdjacentPair:
    """The pair ``(1, 0, ..., 0)`` / ``(0, ..., 0)``, at l1 distance 1."""
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    left = Database((1.0,) + (0.0,) * (m - 1))
    right = Database((0.0,) * m)
    return AdjacentPair(left, right)


# Mechanism specifications ---------------------------------------------------


def _positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


def _open_unit(name, value):
    if not 0 < value < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


@dataclasses.dataclass(frozen=True)
class Laplace:
    b: float

    kind = "continuous"
    name = "laplace"

    def __post_init__(self):
        _positive("b", self.b)


@dataclasses.dataclass(frozen=True)
class Gaussian:
    b: float

    kind = "continuous"
    name = "gaussian"

    def __post_init__(self):
        _positive("b", self.b)


@dataclasses.dataclass(frozen=True)
class SubsampledLaplace:
    b: float
    gamma: float

    kind = "continuous"
    name = "sub-laplace"

    def __post_init__(self):
        _positive("b", self.b)
        _open_unit("gamma", self.gamma)


@dataclasses.dataclass(frozen=True)
class SubsampledGaussian:
    b: float
    gamma: float

    kind = "continuous"
    name = "sub-gaussian"

    def __post_init__(self):
        _positive("b", self.b)
        _open_unit("gamma", self.gamma)


@dataclasses.dataclass(frozen=True)
class RandomizedResponse:
    eps0: float

    kind = "discrete"
    name = "rr"

    def __post_init__(self):
        if not self.eps0 >= 0:
            raise ValueError(f"eps0 must be nonnegative, got {self.eps0}")


@dataclasses.dataclass(frozen=True)
class ShuffledRandomizedResponse:
    eps0: float

    kind = "discrete"
    name = "rr-shuffled"

    def __post_init__(self):
        if not self.eps0 >= 0:
            raise ValueError(f"eps0 must be nonnegative, got {self.eps0}")


@dataclasses.dataclass(frozen=True)
class NoisyGradientDescent:
    eta: float
    b: float
    iters: int
    theta0: float = 0.0

    kind = "continuous"
    name = "ngd"

    def __post_init__(self):
        _open_unit("eta", self.eta)
        _positive("b", self.b)
        if int(self.iters) != self.iters or self.iters < 1:
            raise ValueError(f"iters must be a positive integer, got {self.iters}")


MechanismSpec = Union[
    Laplace,
    Gaussian,
    SubsampledLaplace,
    SubsampledGaussian,
    RandomizedResponse,
    ShuffledRandomizedResponse,
    NoisyGradientDescent,
]


# Samples --------------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class SampleSet:
    """Outputs of one mechanism on one database.

    ``values`` holds integer atoms in ``range(alphabet_size)`` for discrete
    samples and finite floats for continuous ones.
    """

    kind: str
    values: np.ndarray
    alphabet_size: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 1:
            raise ValueError("sample values must be one-dimensional")
        if self.kind == "discrete":
            if self.alphabet_size is None or self.alphabet_size < 1:
                raise ValueError("discrete samples need a positive alphabet_size")
            if not np.issubdtype(values.dtype, np.integer):
                raise ValueError("discrete atoms must be integers")
            if values.size and (values.min() < 0 or values.max() >= self.alphabet_size):
                raise ValueError("discrete atoms lie outside the declared alphabet")
        elif self.kind == "continuous":
            values = values.astype(float, copy=False)
        else:
            raise ValueError(f"unknown sample kind {self.kind!r}")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.n


def _laplace_noise(rng: np.random.Generator, b: float, n: int) -> np.ndarray:
    # inverse CDF on u in (-1/2, 1/2)
    u = rng.random(n) - 0.5
    return -b * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def _subsampled_sum(rng: np.random.Generator, x: np.ndarray, gamma: float, n: int) -> np.ndarray:
    total = np.zeros(n)
    for xi in x:
        mask = rng.random(n) < gamma
        if xi != 0.0:
            total += xi * mask
    return total


def _rr_bits(rng: np.random.Generator, x: np.ndarray, eps0: float, n: int) -> np.ndarray:
    """Encoded RR outputs: bit i of the atom is the released bit of entry i."""
    flip = 1.0 / (1.0 + math.exp(eps0))
    bits_in = x.astype(np.int64)
    weights = np.left_shift(np.int64(1), np.arange(x.size, dtype=np.int64))
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        flips = rng.random((stop - start, x.size)) < flip
        out[start:stop] = (np.bitwise_xor(flips, bits_in) @ weights)
    return out


def sample(spec: MechanismSpec, db: Database, n: int, rng: np.random.Generator) -> SampleSet:
    """Draw ``n`` independent outputs of ``spec`` run on ``db``."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    x = db.as_array()
    m = x.size

    if isinstance(spec, (RandomizedResponse, ShuffledRandomizedResponse)):
        if not db.is_binary:
            raise ValueError("randomized response needs a binary database")
        if isinstance(spec, RandomizedResponse):
            if m > 62:
                raise ValueError("bitwise RR atoms are limited to m <= 62")
            return SampleSet("discrete", _rr_bits(rng, x, spec.eps0, n), alphabet_size=2**m)
        # the shuffled multiset of bits is determined by its count of ones
        keep = 1.0 / (1.0 + math.exp(-spec.eps0))
        ones = int(x.sum())
        counts = rng.binomial(ones, keep, size=n) + rng.binomial(m - ones, 1.0 - keep, size=n)
        return SampleSet("discrete", counts.astype(np.int64), alphabet_size=m + 1)

    if isinstance(spec, Laplace):
        out = x.sum() + _laplace_noise(rng, spec.b, n)
    elif isinstance(spec, Gaussian):
        out = x.sum() + spec.b * rng.standard_normal(n)
    elif isinstance(spec, SubsampledLaplace):
        out = _subsampled_sum(rng, x, spec.gamma, n) + _laplace_noise(rng, spec.b, n)
    elif isinstance(spec, SubsampledGaussian):
        out = _subsampled_sum(rng, x, spec.gamma, n) + spec.b * rng.standard_normal(n)
    elif isinstance(spec, NoisyGradientDescent):
        out = _noisy_gd(rng, spec, x, n)
    else:
        raise TypeError(f"unsupported mechanism {spec!r}")
    return SampleSet("continuous", out)


def _noisy_gd(rng, spec: NoisyGradientDescent, x: np.ndarray, n: int) -> np.ndarray:
    # loss (theta - x_i)^2 / 2, unconstrained: the projection is the identity
    m = x.size
    theta = np.full(n, float(spec.theta0))
    step = math.sqrt(2.0 * spec.eta) * spec.b
    xsum = x.sum()
    grad = np.empty(n)
    noise = np.empty(n)
    # in place, same operation order as theta - (eta/m) * grad + step * z
    for _ in range(int(spec.iters)):
        np.multiply(theta, m, out=grad)
        grad -= xsum
        grad *= spec.eta / m
        theta -= grad
        rng.standard_normal(out=noise)
        noise *= step
        theta += noise
    return theta


MECHANISMS = {
    "laplace": Laplace,
    "gaussian": Gaussian,
    "sub-laplace": SubsampledLaplace,
    "sub-gaussian": SubsampledGaussian,
    "rr": RandomizedResponse,
    "rr-shuffled": ShuffledRandomizedResponse,
    "ngd": NoisyGradientDescent,
}

# experiment defaults per mechanism
DEFAULT_PARAMS = {
    "laplace": {"b": 5.0},
    "gaussian": {"b": 5.0},
    "sub-laplace": {"b": 5.0, "gamma": 0.5},
    "sub-gaussian": {"b": 5.0, "gamma": 0.5},
    "rr": {"eps0": 1.5},
    "rr-shuffled": {"eps0": 1.5},
    "ngd": {"eta": 0.2, "b": 1.0, "iters": 10},
}


def build_mechanism(name: str, **params) -> MechanismSpec:
    """Mechanism by CLI name; unset parameters (``None``) take the defaults."""
    try:
        cls = MECHANISMS[name]
    except KeyError:
        raise ValueError(f"unknown mechanism {name!r}; choose from {sorted(MECHANISMS)}") from None
    fields = {f.name for f in dataclasses.fields(cls)}
    kwargs = dict(DEFAULT_PARAMS[name])
    kwargs.update({k: v for k, v in params.items() if v is not None and k in fields})
    return cls(**kwargs)
