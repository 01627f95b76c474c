"""Replicated coverage experiments and their CSV / JSON output."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence

import numpy as np

from . import divergence as div
from . import oracles
from .divergence import BoundResult, EstimatorConfig, FloorParams
from .mechanisms import AdjacentPair, MechanismSpec, default_adjacent_pair, sample

CSV_FIELDS = (
    "rep", "mechanism", "lambda", "n", "alpha", "tau", "beta", "lower_bound",
    "plugin_divergence", "sigma_hat", "true_value", "ratio", "covered", "seconds",
)
THREADS_ENV = "RDP_AUDIT_THREADS"


@dataclasses.dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to reproduce one coverage experiment.

    ``config.lam`` is ignored; the orders come from ``lams``.
    """

    mechanism: MechanismSpec
    lams: tuple[float, ...] = (2.0,)
    n: int = div.DEFAULT_N
    config: EstimatorConfig = dataclasses.field(default_factory=EstimatorConfig)
    replications: int = 1
    seed: int = 0
    m: int = 10
    pair: AdjacentPair | None = None
    subsample_formula: str = "order_j"

    def __post_init__(self):
        lams = tuple(float(lam) for lam in self.lams)
        if not lams or not all(lam > 1 for lam in lams):
            raise ValueError("all Renyi orders must be > 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "lams", lams)
        if self.pair is None:
            object.__setattr__(self, "pair", default_adjacent_pair(self.m))
        elif len(self.pair.left) != self.m:
            raise ValueError("pair length does not match m")

    def with_floor(self, tau: float, beta: float) -> ExperimentPlan:
        config = dataclasses.replace(self.config, floor=FloorParams(tau, beta))
        return dataclasses.replace(self, config=config)

    def params(self) -> dict:
        cfg = self.config
        return {
            "n": self.n,
            "alpha": cfg.alpha,
            "tau": cfg.floor.tau,
            "beta": cfg.floor.beta,
            "m": self.m,
            "seed": self.seed,
            "replications": self.replications,
            "kernel": cfg.kernel,
            "bandwidth": cfg.bandwidth.base,
            "bandwidth_h": cfg.bandwidth.h,
            "undersmooth": cfg.bandwidth.undersmooth,
            "grid": cfg.grid_size,
            "mechanism_params": dataclasses.asdict(self.mechanism),
        }


@dataclasses.dataclass(frozen=True)
class ReplicationRecord:
    rep: int
    mechanism: str
    result: BoundResult
    true_value: float
    seconds: float

    @property
    def lam(self) -> float:
        return self.result.lam

    @property
    def ratio(self) -> float:
        if self.true_value == 0:
            return math.copysign(math.inf, self.result.lower_bound) if self.result.lower_bound else math.nan
        return self.result.lower_bound / self.true_value

    @property
    def covered(self) -> bool:
        return self.result.lower_bound <= self.true_value

    def row(self) -> dict:
        r = self.result
        return {
            "rep": self.rep,
            "mechanism": self.mechanism,
            "lambda": r.lam,
            "n": r.n,
            "alpha": r.alpha,
            "tau": r.tau,
            "beta": r.beta,
            "lower_bound": r.lower_bound,
            "plugin_divergence": r.plugin_divergence,
            "sigma_hat": r.sigma_hat,
            "true_value": self.true_value,
            "ratio": self.ratio,
            "covered": int(self.covered),
            "seconds": self.seconds,
        }


@dataclasses.dataclass(frozen=True)
class SummaryStats:
    mechanism: str
    lam: float
    replications: int
    alpha_hat: float
    ratio_median: float
    ratio_q25: float
    ratio_q75: float
    ratio_min: float
    ratio_max: float
    mean_seconds: float

    def to_dict(self, params: dict | None = None) -> dict:
        out = {
            "mechanism": self.mechanism,
            "lambda": self.lam,
            "replications": self.replications,
            "alpha_hat": _nan_to_none(self.alpha_hat),
            "ratio_median": _nan_to_none(self.ratio_median),
            "ratio_q25": _nan_to_none(self.ratio_q25),
            "ratio_q75": _nan_to_none(self.ratio_q75),
            "ratio_min": _nan_to_none(self.ratio_min),
            "ratio_max": _nan_to_none(self.ratio_max),
            "mean_seconds": _nan_to_none(self.mean_seconds),
        }
        if self.replications == 0:
            out["empty"] = True
        if params is not None:
            out["params"] = params
        return out


def _nan_to_none(x: float):
    return None if isinstance(x, float) and math.isnan(x) else x


def _rng_pair(seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent streams for both databases of replication ``index``."""
    root = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    left, right = root.spawn(2)
    return np.random.default_rng(left), np.random.default_rng(right)


def run_replication(plan: ExperimentPlan, index: int, timing: bool = True) -> list[ReplicationRecord]:
    """One replication: sample both databases, estimate once, bound every order.

    Returns one record per entry of ``plan.lams``. With ``timing=False`` the
    ``seconds`` field is NaN so that output files are byte-reproducible.
    """
    tic = time.perf_counter()
    rng_left, rng_right = _rng_pair(plan.seed, index)
    samples_p = sample(plan.mechanism, plan.pair.left, plan.n, rng_left)
    samples_q = sample(plan.mechanism, plan.pair.right, plan.n, rng_right)
    p_hat, q_hat, info = div.estimate_densities(samples_p, samples_q, plan.config)
    results = [
        div.bound_from_densities(p_hat, q_hat, plan.n, lam, plan.config.alpha,
                                 plan.config.floor, info)
        for lam in plan.lams
    ]
    seconds = time.perf_counter() - tic if timing else math.nan
    return [
        ReplicationRecord(
            index,
            plan.mechanism.name,
            res,
            oracles.true_divergence(plan.mechanism, res.lam, plan.m, plan.subsample_formula),
            seconds,
        )
        for res in results
    ]


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = requested or (int(cap) if cap else os.cpu_count() or 1)
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def summarize(records: Sequence[ReplicationRecord], lams: Iterable[float],
              mechanism: str) -> dict[float, SummaryStats]:
    """Per-order summary statistics; a deterministic fold over sorted records."""
    out = {}
    for lam in lams:
        recs = sorted((r for r in records if r.lam == lam), key=lambda r: r.rep)
        if not recs:
            nan = math.nan
            out[lam] = SummaryStats(mechanism, lam, 0, nan, nan, nan, nan, nan, nan, nan)
            continue
        ratios = np.array([r.ratio for r in recs])
        covered = np.array([r.covered for r in recs], dtype=float)
        q25, med, q75 = np.percentile(ratios, [25, 50, 75])
        out[lam] = SummaryStats(
            mechanism,
            lam,
            len(recs),
            float(1.0 - covered.mean()),
            float(med),
            float(q25),
            float(q75),
            float(ratios.min()),
            float(ratios.max()),
            float(np.mean([r.seconds for r in recs])),
        )
    return out


def run_experiment(plan: ExperimentPlan, workers: int | None = None, timing: bool = True,
                   ) -> tuple[list[ReplicationRecord], dict[float, SummaryStats]]:
    """Run all replications (possibly on threads) and summarize per order."""
    indices = range(plan.replications)
    nworkers = worker_count(workers)
    if nworkers == 1 or plan.replications <= 1:
        nested = [run_replication(plan, i, timing) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            nested = list(pool.map(lambda i: run_replication(plan, i, timing), indices))
    records = sorted((r for recs in nested for r in recs), key=lambda r: (r.rep, r.lam))
    return records, summarize(records, plan.lams, plan.mechanism.name)


def run_sweep(plan: ExperimentPlan, floors: Sequence[tuple[float, float]],
              workers: int | None = None, timing: bool = True):
    """Repeat :func:`run_experiment` for each ``(tau, beta)``.

    All settings reuse the plan seed, so they are compared on identical
    samples.
    """
    return [
        (tau, beta, *run_experiment(plan.with_floor(tau, beta), workers, timing))
        for tau, beta in floors
    ]


# Output ----------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(records: Sequence[ReplicationRecord], path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_FIELDS)
            for rec in records:
                row = rec.row()
                writer.writerow([_fmt(row[k]) for k in CSV_FIELDS])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> list[dict]:
    """Parse a file written by :func:`write_csv` back into typed rows."""
    ints = {"rep", "n", "covered"}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            row = {}
            for key, val in raw.items():
                if key == "mechanism":
                    row[key] = val
                elif key in ints:
                    row[key] = int(val)
                else:
                    row[key] = float(val)
            rows.append(row)
    return rows


def summary_json(stats: dict[float, SummaryStats], params: dict | None = None) -> list[dict]:
    return [s.to_dict(params) for _, s in sorted(stats.items())]


def emit(records: Sequence[ReplicationRecord], stats: dict[float, SummaryStats],
         csv_path=None, json_path=None, params: dict | None = None) -> None:
    """Write the per-record CSV and the per-order JSON summary."""
    if csv_path is not None:
        write_csv(records, csv_path)
    if json_path is not None:
        try:
            with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(summary_json(stats, params), fh, indent=2)
                fh.write("\n")
        except OSError as exc:
            raise OSError(f"cannot write JSON to {json_path}: {exc}") from exc
