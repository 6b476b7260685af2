"""Regression metrics, k-fold cross-validation, agreement banding, ensembling.

Cross-validation takes an explicit FoldPlan so every consumer (single model,
repeated runs, ensemble) scores against the same partition. Model access goes
through ModelSpec callables; any scaler refitting happens inside each
ModelSpec's fit, so folds never leak holdout statistics. Agreement (Cohen's kappa) is
defined on a regression task by discretizing both vectors with quantile bins
taken from the true targets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .core import FeatureMatrix
from .errors import (
    FoldFailed,
    InsufficientRows,
    InvalidConfig,
    InvalidData,
    ShapeError,
    UndefinedKappa,
    UndefinedMape,
    UndefinedR2,
    YieldcastError,
)

METRIC_NAMES = ("r2", "mae", "mse", "rmse", "max_err", "mape_percent")

MAPE_FLOOR = 1e-9  # rows with |y| below this are excluded from MAPE

KAPPA_BANDS = (
    # half-open [lo, hi); kappa = 1 is handled separately
    (0.81, "near-perfect agreement"),
    (0.61, "substantial agreement"),
    (0.41, "moderate agreement"),
    (0.21, "fair agreement"),
    (0.10, "slight agreement"),
    (-1.0, "agreement equivalent to chance"),
)


def _check_pair(y: np.ndarray, yhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.ndim != 1 or yhat.ndim != 1:
        raise ShapeError("metric inputs must be 1-d")
    if len(y) != len(yhat):
        raise ShapeError(f"length mismatch: {len(y)} vs {len(yhat)}")
    if len(y) == 0:
        raise ShapeError("metric inputs must be nonempty")
    if not (np.isfinite(y).all() and np.isfinite(yhat).all()):
        raise InvalidData("non-finite values in metric input")
    return y, yhat


def r2(y: np.ndarray, yhat: np.ndarray) -> float:
    y, yhat = _check_pair(y, yhat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedR2("r2 is undefined for a constant target")
    ss_res = float(np.sum((y - yhat) ** 2))
    return 1.0 - ss_res / ss_tot


def mae(y: np.ndarray, yhat: np.ndarray) -> float:
    y, yhat = _check_pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def mse(y: np.ndarray, yhat: np.ndarray) -> float:
    y, yhat = _check_pair(y, yhat)
    return float(np.mean((y - yhat) ** 2))


def rmse(y: np.ndarray, yhat: np.ndarray) -> float:
    return math.sqrt(mse(y, yhat))


def max_error(y: np.ndarray, yhat: np.ndarray) -> float:
    y, yhat = _check_pair(y, yhat)
    return float(np.max(np.abs(y - yhat)))


def _mape_parts(y: np.ndarray, yhat: np.ndarray) -> tuple[Optional[float], int]:
    keep = np.abs(y) >= MAPE_FLOOR
    excluded = int(len(y) - keep.sum())
    if not keep.any():
        return None, excluded
    value = 100.0 * float(np.mean(np.abs((y[keep] - yhat[keep]) / y[keep])))
    return value, excluded


def mape(y: np.ndarray, yhat: np.ndarray) -> float:
    """Mean absolute percentage error over rows with |y| >= 1e-9."""
    y, yhat = _check_pair(y, yhat)
    value, _ = _mape_parts(y, yhat)
    if value is None:
        raise UndefinedMape("every row has |y| below the MAPE floor")
    return value


@dataclass(frozen=True)
class MetricsReport:
    """The six-metric bundle for one (y, yhat) pair.

    r2 and mape_percent are None when undefined (constant target, every row
    under the MAPE floor); the other four always exist.
    """

    r2: Optional[float]
    mae: float
    mse: float
    rmse: float
    max_err: float
    mape_percent: Optional[float]
    mape_excluded_rows: int = 0

    def __post_init__(self):
        if not (self.max_err >= self.mae >= 0.0):
            raise InvalidData("metric ordering violated: need max_err >= mae >= 0")
        if not math.isclose(self.rmse, math.sqrt(self.mse), rel_tol=1e-12, abs_tol=0.0):
            raise InvalidData("rmse must equal sqrt(mse)")
        if self.r2 is not None and self.r2 > 1.0:
            raise InvalidData(f"r2 cannot exceed 1, got {self.r2}")
        if self.mape_excluded_rows < 0:
            raise InvalidData("mape_excluded_rows cannot be negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "r2": self.r2,
            "mae": self.mae,
            "mse": self.mse,
            "rmse": self.rmse,
            "max_err": self.max_err,
            "mape_percent": self.mape_percent,
            "mape_excluded_rows": self.mape_excluded_rows,
        }


def metrics_bundle(y: np.ndarray, yhat: np.ndarray, strict: bool = True) -> MetricsReport:
    """All six metrics at once.

    strict=True raises on undefined r2/mape; strict=False records them as
    None so degenerate folds can still be reported.
    """
    y, yhat = _check_pair(y, yhat)
    mse_v = mse(y, yhat)
    mape_v, excluded = _mape_parts(y, yhat)
    if strict and mape_v is None:
        raise UndefinedMape("every row has |y| below the MAPE floor")
    r2_v: Optional[float]
    try:
        r2_v = r2(y, yhat)
    except UndefinedR2:
        if strict:
            raise
        r2_v = None
    return MetricsReport(
        r2=r2_v,
        mae=mae(y, yhat),
        mse=mse_v,
        rmse=math.sqrt(mse_v),
        max_err=max_error(y, yhat),
        mape_percent=mape_v,
        mape_excluded_rows=excluded,
    )


@dataclass(frozen=True)
class FoldPlan:
    """A fixed partition of n rows into k folds.

    assignments[i] is the fold index of row i; sizes differ by at most one.
    """

    k: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        a = self.assignments
        if a.ndim != 1 or len(a) < self.k:
            raise ShapeError("assignments must be 1-d with at least k rows")
        sizes = np.bincount(a, minlength=self.k)
        if len(sizes) != self.k or sizes.min() < 1:
            raise InvalidData("every fold index in [0, k) must be used")
        if sizes.max() - sizes.min() > 1:
            raise InvalidData(f"fold sizes {sizes.tolist()} differ by more than 1")

    @property
    def n(self) -> int:
        return len(self.assignments)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def make_folds(n: int, k: int = 10, seed: int = 0) -> FoldPlan:
    """Seeded shuffle, then contiguous slices of near-equal size."""
    if not 2 <= k <= n:
        raise InvalidConfig(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=int)
    start = 0
    for fold in range(k):
        size = n // k + (1 if fold < n % k else 0)
        assignments[perm[start : start + size]] = fold
        start += size
    return FoldPlan(k=k, assignments=assignments, seed=seed)


@dataclass(frozen=True)
class ModelSpec:
    """How cross-validation drives one model family.

    fit(x, y) returns an opaque fitted model; predict(model, x) returns a
    prediction vector. Internal standardization belongs inside fit.
    """

    name: str
    fit: Callable[[np.ndarray, np.ndarray], Any]
    predict: Callable[[Any, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MetricSummary:
    mean: Optional[float]
    std: Optional[float]  # sample std (ddof=1); None with < 2 defined folds
    n_defined: int

    def to_dict(self) -> dict[str, Any]:
        return {"mean": self.mean, "std": self.std, "n_defined": self.n_defined}


@dataclass(frozen=True)
class CvResult:
    model_label: str
    per_fold: tuple[MetricsReport, ...]
    summary: dict[str, MetricSummary] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_label": self.model_label,
            "per_fold": [m.to_dict() for m in self.per_fold],
            "summary": {k: v.to_dict() for k, v in self.summary.items()},
        }


def summarize_folds(per_fold: Sequence[MetricsReport]) -> dict[str, MetricSummary]:
    """Mean and sample std per metric over folds where the metric is defined."""
    out: dict[str, MetricSummary] = {}
    for name in METRIC_NAMES:
        values = [getattr(m, name) for m in per_fold]
        defined = [v for v in values if v is not None]
        if not defined:
            out[name] = MetricSummary(mean=None, std=None, n_defined=0)
            continue
        mean = float(np.mean(defined))
        std = float(np.std(defined, ddof=1)) if len(defined) >= 2 else None
        out[name] = MetricSummary(mean=mean, std=std, n_defined=len(defined))
    return out


def cross_validate(spec: ModelSpec, m: FeatureMatrix, plan: FoldPlan) -> CvResult:
    """Fit on each fold's complement, score its holdout, aggregate."""
    if plan.n != len(m.y):
        raise ShapeError(f"plan covers {plan.n} rows but matrix has {len(m.y)}")
    per_fold = []
    for fold in range(plan.k):
        train = plan.train_indices(fold)
        test = plan.test_indices(fold)
        try:
            fitted = spec.fit(m.x[train], m.y[train])
            yhat = np.asarray(spec.predict(fitted, m.x[test]), dtype=float)
        except YieldcastError as exc:
            raise FoldFailed([(fold, f"{spec.name}: {exc}")]) from exc
        per_fold.append(metrics_bundle(m.y[test], yhat, strict=False))
    return CvResult(
        model_label=spec.name,
        per_fold=tuple(per_fold),
        summary=summarize_folds(per_fold),
    )


def repeat_cross_validate(
    spec: ModelSpec, m: FeatureMatrix, k: int, seeds: Sequence[int]
) -> CvResult:
    """Pool folds from one cross-validation per seed (mean +/- std over all)."""
    if not seeds:
        raise InvalidConfig("need at least one seed")
    pooled: list[MetricsReport] = []
    for seed in seeds:
        result = cross_validate(spec, m, make_folds(len(m.y), k, seed))
        pooled.extend(result.per_fold)
    return CvResult(
        model_label=f"{spec.name} ({len(seeds)}x{k}-fold)",
        per_fold=tuple(pooled),
        summary=summarize_folds(pooled),
    )


def ensemble_cv(
    specs: Sequence[ModelSpec],
    m: FeatureMatrix,
    plan: FoldPlan,
    member_log: Optional[list] = None,
) -> CvResult:
    """Cross-validate the unweighted average of the member predictions.

    Every member must fit on every fold; failures are collected across the
    whole run and raised together as FoldFailed. When member_log is a list,
    one entry per fold is appended with the test indices and each member's
    raw predictions, so the averaging is externally checkable.
    """
    if len(specs) < 2:
        raise InvalidConfig("ensemble needs at least 2 member specs")
    if plan.n != len(m.y):
        raise ShapeError(f"plan covers {plan.n} rows but matrix has {len(m.y)}")

    per_fold = []
    failures: list[tuple[int, str]] = []
    for fold in range(plan.k):
        train = plan.train_indices(fold)
        test = plan.test_indices(fold)
        member_preds: dict[str, np.ndarray] = {}
        fold_ok = True
        for pos, spec in enumerate(specs):
            try:
                fitted = spec.fit(m.x[train], m.y[train])
                yhat = np.asarray(spec.predict(fitted, m.x[test]), dtype=float)
            except YieldcastError as exc:
                failures.append((fold, f"{spec.name}: {exc}"))
                fold_ok = False
                continue
            member_preds[f"{pos}:{spec.name}"] = yhat
        if not fold_ok:
            continue
        stack = np.stack(list(member_preds.values()))
        ensemble = np.array(
            [math.fsum(stack[:, i]) for i in range(stack.shape[1])]
        ) / len(specs)
        if member_log is not None:
            member_log.append(
                {
                    "fold": fold,
                    "test_indices": test.copy(),
                    "members": member_preds,
                    "ensemble": ensemble,
                }
            )
        per_fold.append(metrics_bundle(m.y[test], ensemble, strict=False))
    if failures:
        raise FoldFailed(failures)
    return CvResult(
        model_label="ensemble(" + "+".join(s.name for s in specs) + ")",
        per_fold=tuple(per_fold),
        summary=summarize_folds(per_fold),
    )


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    band: str
    bin_edges: tuple[float, ...]

    def __post_init__(self):
        if not -1.0 <= self.kappa <= 1.0:
            raise InvalidData(f"kappa must lie in [-1, 1], got {self.kappa}")

    def to_dict(self) -> dict[str, Any]:
        return {"kappa": self.kappa, "band": self.band, "bin_edges": list(self.bin_edges)}


def kappa_band(kappa: float) -> str:
    if kappa == 1.0:
        return "perfect agreement"
    for lo, label in KAPPA_BANDS:
        if kappa >= lo:
            return label
    return "agreement equivalent to chance"


def cohen_kappa(y: np.ndarray, yhat: np.ndarray, n_bins: int = 5) -> KappaResult:
    """Chance-corrected agreement between quantile-binned y and yhat.

    Bin edges are the inner quantiles of y (i/n_bins); both vectors are
    discretized with side='right', so values at or above the last edge land
    in the top bin. kappa = (p_o - p_e) / (1 - p_e).
    """
    y, yhat = _check_pair(y, yhat)
    if n_bins < 2:
        raise InvalidConfig(f"n_bins must be >= 2, got {n_bins}")
    if len(y) < n_bins:
        raise InsufficientRows(f"need at least {n_bins} rows, got {len(y)}")

    edges = np.quantile(y, [i / n_bins for i in range(1, n_bins)])
    bins_true = np.searchsorted(edges, y, side="right")
    bins_pred = np.searchsorted(edges, yhat, side="right")

    n = len(y)
    table = np.zeros((n_bins, n_bins))
    np.add.at(table, (bins_true, bins_pred), 1.0)
    p_obs = float(np.trace(table)) / n
    p_chance = float(np.sum(table.sum(axis=1) * table.sum(axis=0))) / (n * n)
    if p_chance == 1.0:
        raise UndefinedKappa("all rows fall in a single bin")
    kappa = (p_obs - p_chance) / (1.0 - p_chance)
    kappa = min(1.0, max(-1.0, kappa))  # guard float excursions only
    return KappaResult(
        kappa=kappa, band=kappa_band(kappa), bin_edges=tuple(float(e) for e in edges)
    )


__all__ = [
    "METRIC_NAMES",
    "MAPE_FLOOR",
    "r2",
    "mae",
    "mse",
    "rmse",
    "max_error",
    "mape",
    "MetricsReport",
    "metrics_bundle",
    "FoldPlan",
    "make_folds",
    "ModelSpec",
    "MetricSummary",
    "CvResult",
    "summarize_folds",
    "cross_validate",
    "repeat_cross_validate",
    "ensemble_cv",
    "KappaResult",
    "kappa_band",
    "cohen_kappa",
]
