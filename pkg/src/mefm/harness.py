"""Monte Carlo replications, accuracy metrics and their aggregation."""

from __future__ import annotations

import logging
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .dgp import DGPConfig, GroundTruth, child_seed, gen_dataset
from .fmtest import run_fm_vs_mefm_test
from .inference import hac_loading, loading_row_z, rotation_H, standardized_effect_stats
from .linalg import double_center, space_distance
from .model import MEFMFit, fit_mefm
from .rank import select_ranks

log = logging.getLogger(__name__)

__all__ = [
    "RelativeMSE",
    "ReplicationSummary",
    "TASKS",
    "aggregate",
    "default_jobs",
    "power_curve",
    "relative_mse",
    "replicate_once",
    "run_replications",
]

TASKS = ("fit", "ranks", "test", "normality")
POWER_PARAMS = ("u_alpha", "u_beta", "u_local_scale", "u_local")


@dataclass(frozen=True)
class RelativeMSE:
    """Relative squared errors; a component is ``None`` when its truth is identically zero."""

    mu: Optional[float]
    alpha: Optional[float]
    beta: Optional[float]
    C: Optional[float]

    @property
    def undefined(self) -> tuple[str, ...]:
        return tuple(k for k in ("mu", "alpha", "beta", "C") if getattr(self, k) is None)


def _ratio(err: float, ref: float) -> Optional[float]:
    return None if ref == 0.0 else err / ref


def relative_mse(fit: MEFMFit, truth: GroundTruth) -> RelativeMSE:
    """Summed squared estimation error over summed squared truth, per component."""
    if fit.shape != truth.C.shape:
        raise ValueError(f"fit shape {fit.shape} does not match truth {truth.C.shape}")
    est, tru = fit.effects, truth.effects
    return RelativeMSE(
        mu=_ratio(float(np.sum((tru.mu - est.mu) ** 2)), float(np.sum(tru.mu**2))),
        alpha=_ratio(float(np.sum((tru.alpha - est.alpha) ** 2)), float(np.sum(tru.alpha**2))),
        beta=_ratio(float(np.sum((tru.beta - est.beta) ** 2)), float(np.sum(tru.beta**2))),
        C=_ratio(float(np.sum((truth.C - fit.C) ** 2)), float(np.sum(truth.C**2))),
    )


@dataclass
class ReplicationSummary:
    setting: str
    reps: int
    metrics: dict[str, np.ndarray]
    aggregates: dict[str, dict[str, float]]
    rank_frequencies: dict[tuple[int, int], float]
    failures: int = 0
    seeds: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint64))
    config: Optional[DGPConfig] = None


def default_jobs() -> int:
    """Worker count from ``MEFM_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("MEFM_THREADS", "1")))
    except ValueError:
        return 1


def _as_float(v) -> float:
    return math.nan if v is None else float(v)


def replicate_once(
    config: DGPConfig,
    tasks: Sequence[str] = ("fit", "ranks"),
    *,
    theta: float = 0.95,
    fit_ranks: str = "true",
    t_index: int = 9,
    effect_index: int = 2,
) -> dict[str, float]:
    """Run the requested tasks on one dataset drawn from ``config``."""
    Y, truth = gen_dataset(config)
    out: dict[str, float] = {}
    selection = None
    if "ranks" in tasks or fit_ranks == "estimated":
        selection = select_ranks(double_center(Y))
        out["kr_hat"] = float(selection.kr_hat)
        out["kc_hat"] = float(selection.kc_hat)

    if "fit" in tasks or "normality" in tasks:
        if fit_ranks == "estimated":
            kr, kc = selection.ranks
        else:
            kr, kc = config.kr, config.kc
        fit = fit_mefm(Y, kr, kc)

    if "fit" in tasks:
        mse = relative_mse(fit, truth)
        out.update(
            mse_mu=_as_float(mse.mu),
            mse_alpha=_as_float(mse.alpha),
            mse_beta=_as_float(mse.beta),
            mse_C=_as_float(mse.C),
            dist_Qr=space_distance(truth.Qr, fit.Qr),
            dist_Qc=space_distance(truth.Qc, fit.Qc),
        )
        if fit.kr == config.kr and fit.kc == config.kc:
            Hr, Hc = rotation_H(fit, truth.Qr, truth.Qc, truth.FZ)
            _, p, q = Y.shape
            out["loading_err_r"] = float(np.sum((fit.Qr - truth.Qr @ Hr.matrix.T) ** 2) / p)
            out["loading_err_c"] = float(np.sum((fit.Qc - truth.Qc @ Hc.matrix.T) ** 2) / q)

    if "normality" in tasks:
        t = min(t_index, config.T - 1)
        stats = standardized_effect_stats(fit, t, truth.effects)
        out["z_mu"] = stats.mu
        out["z_alpha"] = float(stats.alpha[effect_index])
        out["z_beta"] = float(stats.beta[effect_index])
        _, Hc = rotation_H(fit, truth.Qr, truth.Qc, truth.FZ)
        hac = hac_loading(fit, "column", 0)
        z = loading_row_z(fit, "column", 0, hac, Hc, truth.Qc[0])
        out["z_Qc11"] = float(z[0])

    if "test" in tasks:
        res = run_fm_vs_mefm_test(Y, theta=theta)
        out["reject_alpha"] = res.reject_alpha
        out["reject_beta"] = res.reject_beta
        out["test_kr"] = float(res.kr)
        out["test_kc"] = float(res.kc)
    return out


def _worker(args):
    config, index, master_seed, tasks, kwargs = args
    seed = child_seed(master_seed, index)
    cfg = config.replace(seed=seed)
    try:
        return index, seed, replicate_once(cfg, tasks, **kwargs), None
    except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
        return index, seed, None, f"{type(exc).__name__}: {exc}"


def aggregate(metrics: dict[str, np.ndarray]) -> dict[str, dict[str, float]]:
    """Mean, standard deviation and median of every metric, ignoring NaNs."""
    out = {}
    for name, values in metrics.items():
        v = np.asarray(values, dtype=float)
        v = v[~np.isnan(v)]
        if v.size == 0:
            out[name] = {"mean": math.nan, "sd": math.nan, "median": math.nan}
            continue
        v = np.sort(v)  # fixed summation order
        out[name] = {
            "mean": float(np.mean(v)),
            "sd": float(np.std(v, ddof=1)) if v.size > 1 else 0.0,
            "median": float(np.median(v)),
        }
    return out


def _rank_frequencies(kr: Iterable[float], kc: Iterable[float]) -> dict[tuple[int, int], float]:
    pairs = [(int(a), int(b)) for a, b in zip(kr, kc) if not (math.isnan(a) or math.isnan(b))]
    if not pairs:
        return {}
    counts = Counter(pairs)
    n = len(pairs)
    return {k: counts[k] / n for k in sorted(counts)}


def run_replications(
    setting: DGPConfig,
    reps: int,
    tasks: Sequence[str] = ("fit", "ranks"),
    master_seed: int = 0,
    *,
    name: str = "custom",
    n_jobs: Optional[int] = None,
    **task_kwargs,
) -> ReplicationSummary:
    """Replicate ``setting`` ``reps`` times and aggregate the per-rep metrics.

    Replication ``r`` draws its data with :func:`child_seed` ``(master_seed, r)``,
    so results do not depend on ``n_jobs`` or execution order. Replications
    that raise a numerical error are dropped and counted in ``failures``.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    unknown = set(tasks) - set(TASKS)
    if unknown:
        raise ValueError(f"unknown tasks {sorted(unknown)}")
    n_jobs = default_jobs() if n_jobs is None else max(1, int(n_jobs))
    jobs = [(setting, r, master_seed, tuple(tasks), task_kwargs) for r in range(reps)]
    if n_jobs == 1:
        results = [_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_worker, jobs, chunksize=max(1, reps // (4 * n_jobs))))
    results.sort(key=lambda r: r[0])

    ok = [r for r in results if r[2] is not None]
    failures = len(results) - len(ok)
    for index, _, _, err in results:
        if err is not None:
            log.warning("replication %d failed: %s", index, err)
    names = sorted({k for r in ok for k in r[2]})
    metrics = {k: np.array([r[2].get(k, math.nan) for r in ok]) for k in names}
    freqs = {}
    if "kr_hat" in metrics:
        freqs = _rank_frequencies(metrics["kr_hat"], metrics["kc_hat"])
    return ReplicationSummary(
        setting=name,
        reps=len(ok),
        metrics=metrics,
        aggregates=aggregate(metrics),
        rank_frequencies=freqs,
        failures=failures,
        seeds=np.array([r[1] for r in ok], dtype=np.uint64),
        config=setting,
    )


def power_curve(
    base: DGPConfig,
    param: str,
    grid: Sequence[float],
    reps: int,
    theta: float = 0.95,
    master_seed: int = 0,
    *,
    n_jobs: Optional[int] = None,
) -> list[dict[str, float]]:
    """Mean rejection rates of the factor-model sufficiency test along a parameter grid."""
    if param not in POWER_PARAMS:
        raise ValueError(f"param must be one of {POWER_PARAMS}, got {param!r}")
    rows = []
    for value in grid:
        value = int(value) if param == "u_local" else float(value)
        cfg = base.replace(**{param: value})
        summary = run_replications(
            cfg, reps, ("test",), master_seed, name=f"{param}={value}", n_jobs=n_jobs, theta=theta
        )
        agg = summary.aggregates
        rows.append(
            {
                param: value,
                "reject_alpha": agg["reject_alpha"]["mean"],
                "reject_alpha_sd": agg["reject_alpha"]["sd"],
                "reject_beta": agg["reject_beta"]["mean"],
                "reject_beta_sd": agg["reject_beta"]["sd"],
                "reps": summary.reps,
            }
        )
    return rows
