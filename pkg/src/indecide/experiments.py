"""Seeded Monte Carlo studies of the calibration procedures.

Every study draws from the symmetric two-component Gaussian mixture
(centers at -delta and +delta, unit variance, equal priors, class 1 on the
right), fits a scorer, calibrates an abstention rule on held-out data, and
evaluates on a test split.  Replication r of a run with seed s always uses
seeded_stream(s, r), so results are byte-identical at any worker count.
"""

from __future__ import annotations

import csv
import math
import multiprocessing
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy import special

from . import gmm
from .calibration import (
    CalibrationSample,
    calibrate_accuracy,
    calibrate_np,
)
from .models import fit_lda, fit_logistic, predict_eta
from .numerics import normal_tail, seeded_stream
from .svgchart import line_chart_svg

__all__ = [
    "SimConfig",
    "SimResult",
    "run_accuracy_sweep",
    "run_np_sweep",
    "run_intro_tradeoff",
    "run_consistency_trend",
    "run_phase_experiment",
    "sim_result_to_csv",
    "plugin_population_risk",
]

_SCORERS = ("oracle-eta", "lda", "logistic")


@dataclass(frozen=True)
class SimConfig:
    """Sizes, targets, scorer choice, and seed for one simulation study."""

    n_train: int = 1000
    n_cal: int = 1000
    n_test: int = 1000
    reps: int = 200
    delta_grid: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)
    alpha: float = 0.1
    alpha1: float = 0.1
    alpha2: float = 0.1
    scorer: str = "lda"
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_train", "n_cal", "n_test", "reps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if len(self.delta_grid) == 0 or any(d <= 0 for d in self.delta_grid):
            raise ValueError("delta_grid must be nonempty with positive entries")
        for name in ("alpha", "alpha1", "alpha2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.scorer not in _SCORERS:
            raise ValueError(f"scorer must be one of {_SCORERS}")


@dataclass(frozen=True)
class SimResult:
    """Per-replication rows plus per-(delta, arm) aggregates.

    Both are tuples of plain dicts sharing fixed column sets; bands are the
    5th/95th order statistics across replications.
    """

    rows: tuple
    aggregates: tuple
    row_columns: tuple
    aggregate_columns: tuple


def _sample_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    """Inverse-CDF normal draws: platform-independent for a fixed stream."""
    u = rng.random(size)
    u = np.clip(u, 1e-300, 1.0 - 1e-16)
    return -special.ndtri(u)


def _draw_mixture(rng: np.random.Generator, n: int, delta: float):
    """Labels in {1, 2} (equal priors) and observations x | y."""
    labels = np.where(rng.random(n) < 0.5, 1, 2)
    centers = np.where(labels == 1, delta, -delta)
    x = centers + _sample_normal(rng, n)
    return x, labels


def oracle_eta(x: np.ndarray, delta: float) -> np.ndarray:
    """Exact class-1 posterior of the symmetric mixture: sigmoid(2 delta x)."""
    z = 2.0 * delta * np.asarray(x, dtype=float)
    out = np.empty(len(z))
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _fit_scorer(scorer: str, x: np.ndarray, labels: np.ndarray, delta: float):
    if scorer == "oracle-eta":
        return lambda xs: oracle_eta(xs, delta)
    if scorer == "lda":
        model = fit_lda(x, labels)
        return lambda xs: predict_eta(model, xs)
    model = fit_logistic(x, labels)
    return lambda xs: predict_eta(model, xs)


def _selective_errors(decisions: np.ndarray, labels: np.ndarray) -> dict:
    decided = decisions != 0
    n = len(labels)
    n_dec = int(decided.sum())
    wrong = decided & (decisions != labels)
    out = {
        "gamma": (n - n_dec) / n,
        "conditional_error": float(wrong.sum() / n_dec) if n_dec else 0.0,
    }
    for cls, key in ((1, "type1"), (2, "type2")):
        dc = decided & (labels == cls)
        out[key] = float((wrong & dc).sum() / dc.sum()) if dc.any() else 0.0
    return out


# ---------------------------------------------------------------------------
# accuracy sweep


def _accuracy_rep(cfg: SimConfig, rep: int) -> list[dict]:
    rng = seeded_stream(cfg.seed, rep)
    rows = []
    arms = [cfg.scorer] if cfg.scorer == "oracle-eta" else [cfg.scorer, "oracle-eta"]
    for delta in cfg.delta_grid:
        x_tr, y_tr = _draw_mixture(rng, cfg.n_train, delta)
        x_cal, y_cal = _draw_mixture(rng, cfg.n_cal, delta)
        x_te, y_te = _draw_mixture(rng, cfg.n_test, delta)
        for arm in arms:
            score = _fit_scorer(arm, x_tr, y_tr, delta)
            report = calibrate_accuracy(
                CalibrationSample(scores=score(x_cal), labels=y_cal), cfg.alpha
            )
            decisions = report.rule.apply(score(x_te))
            stats = _selective_errors(decisions, y_te)
            rows.append(
                {
                    "delta": delta,
                    "rep": rep,
                    "arm": arm,
                    "gamma_hat": report.gamma_hat,
                    "test_gamma": stats["gamma"],
                    "conditional_error": stats["conditional_error"],
                    "feasible": int(report.feasible),
                }
            )
    return rows


_ACC_ROW_COLS = (
    "delta",
    "rep",
    "arm",
    "gamma_hat",
    "test_gamma",
    "conditional_error",
    "feasible",
)


def run_accuracy_sweep(cfg: SimConfig, workers: int = 1) -> SimResult:
    """Accuracy-controlled calibration across the delta grid.

    Arms: the configured scorer plus an exact-posterior baseline.  Rows hold
    the selected abstention fraction and the test-set conditional error per
    replication; aggregates add means and 5th/95th bands.
    """
    per_rep = _parallel_map(partial(_accuracy_rep, cfg), range(cfg.reps), workers)
    rows = tuple(r for chunk in per_rep for r in chunk)
    aggregates = _aggregate(
        rows, keys=("delta", "arm"), metrics=("gamma_hat", "test_gamma", "conditional_error")
    )
    return SimResult(
        rows=rows,
        aggregates=tuple(aggregates),
        row_columns=_ACC_ROW_COLS,
        aggregate_columns=_agg_columns(
            ("delta", "arm"), ("gamma_hat", "test_gamma", "conditional_error")
        ),
    )


# ---------------------------------------------------------------------------
# type I / type II sweep


def _np_rep(cfg: SimConfig, rep: int) -> list[dict]:
    rng = seeded_stream(cfg.seed, rep)
    rows = []
    for delta in cfg.delta_grid:
        x_tr, y_tr = _draw_mixture(rng, cfg.n_train, delta)
        x_cal, y_cal = _draw_mixture(rng, cfg.n_cal, delta)
        x_te, y_te = _draw_mixture(rng, cfg.n_test, delta)
        score = _fit_scorer(cfg.scorer, x_tr, y_tr, delta)
        s_cal, s_te = score(x_cal), score(x_te)
        cal = CalibrationSample(scores=s_cal, labels=y_cal)

        report = calibrate_np(cal, cfg.alpha1, cfg.alpha2, want_trace=True)
        type2_curve = [
            row["type2"] for row in report.trace if row["valid"] and not math.isnan(row["type2"])
        ]

        # abstention-free baseline: same type-I budget at gamma = 0
        order = np.lexsort((np.arange(len(s_cal)), s_cal))
        cum1 = np.cumsum((y_cal == 1)[order])
        n1 = int(cum1[-1])
        budget = math.floor(cfg.alpha1 * n1 + 1e-12)
        kt0 = int(np.searchsorted(cum1, budget + 0.5, side="left"))
        tau0 = float(s_cal[order[kt0 - 1]]) if kt0 >= 1 else -np.inf
        baseline = np.where(s_te <= tau0, 2, 1)

        bayes = np.where(s_te >= 0.5, 1, 2)

        for arm, decisions, gamma_sel in (
            ("algorithm2", report.rule.apply(s_te), report.gamma_hat),
            ("np-baseline", baseline, 0.0),
            ("bayes", bayes, 0.0),
        ):
            stats = _selective_errors(decisions, y_te)
            rows.append(
                {
                    "delta": delta,
                    "rep": rep,
                    "arm": arm,
                    "gamma_star": gamma_sel,
                    "test_gamma": stats["gamma"],
                    "type1": stats["type1"],
                    "type2": stats["type2"],
                    "conditional_error": stats["conditional_error"],
                    "feasible": int(report.feasible) if arm == "algorithm2" else 1,
                    "cal_type2_curve_p5": _percentile(type2_curve, 5.0),
                    "cal_type2_curve_p95": _percentile(type2_curve, 95.0),
                }
            )
    return rows


_NP_ROW_COLS = (
    "delta",
    "rep",
    "arm",
    "gamma_star",
    "test_gamma",
    "type1",
    "type2",
    "conditional_error",
    "feasible",
    "cal_type2_curve_p5",
    "cal_type2_curve_p95",
)


def run_np_sweep(cfg: SimConfig, workers: int = 1) -> SimResult:
    """Type I / type II controlled calibration versus abstention-free arms.

    Three arms per cell: the two-threshold procedure, an abstention-free
    baseline holding only the type-I budget, and the plain posterior argmax.
    Each row also carries the 5th/95th band of the achievable type II error
    over the full abstention grid on the calibration data.
    """
    per_rep = _parallel_map(partial(_np_rep, cfg), range(cfg.reps), workers)
    rows = tuple(r for chunk in per_rep for r in chunk)
    aggregates = _aggregate(
        rows, keys=("delta", "arm"), metrics=("gamma_star", "type1", "type2")
    )
    return SimResult(
        rows=rows,
        aggregates=tuple(aggregates),
        row_columns=_NP_ROW_COLS,
        aggregate_columns=_agg_columns(("delta", "arm"), ("gamma_star", "type1", "type2")),
    )


# ---------------------------------------------------------------------------
# accuracy/abstention tradeoff across separations


def _tradeoff_rep(cfg: SimConfig, target: float, rep: int) -> list[dict]:
    rng = seeded_stream(cfg.seed, rep)
    rows = []
    for delta in cfg.delta_grid:
        spec = gmm.GmmSpec(delta)
        bayes_error = normal_tail(delta)
        try:
            point = gmm.gamma_for_target_risk(spec, target)
            gamma_star, t_star = point.gamma, point.t
        except gmm.InfeasibleTargetError:
            gamma_star, t_star = math.nan, math.nan
        x, y = _draw_mixture(rng, cfg.n_test, delta)
        if math.isfinite(t_star):
            decisions = np.where(np.abs(x) < t_star, 0, np.where(x >= 0, 1, 2))
            stats = _selective_errors(decisions, y)
            emp_gamma, emp_err = stats["gamma"], stats["conditional_error"]
        else:
            emp_gamma, emp_err = math.nan, math.nan
        rows.append(
            {
                "delta": delta,
                "separation_2delta": 2.0 * delta,
                "rep": rep,
                "bayes_accuracy": 1.0 - bayes_error,
                "target_error": target,
                "gamma_star": gamma_star,
                "empirical_gamma": emp_gamma,
                "empirical_conditional_error": emp_err,
            }
        )
    return rows


_TRADEOFF_ROW_COLS = (
    "delta",
    "separation_2delta",
    "rep",
    "bayes_accuracy",
    "target_error",
    "gamma_star",
    "empirical_gamma",
    "empirical_conditional_error",
)


def run_intro_tradeoff(cfg: SimConfig, target_error: float = 0.01, workers: int = 1) -> SimResult:
    """Exact accuracy/abstention tradeoff plus a sampled check per separation.

    For each delta: the no-abstention accuracy ceiling, the exact minimal
    abstention gamma* reaching target_error, and the empirical abstention and
    error of the closed-form thresholds on a fresh sample.  Separation is
    reported both as delta (half the center distance) and as 2 * delta.
    """
    per_rep = _parallel_map(
        partial(_tradeoff_rep, cfg, target_error), range(cfg.reps), workers
    )
    rows = tuple(r for chunk in per_rep for r in chunk)
    aggregates = _aggregate(
        rows, keys=("delta",), metrics=("gamma_star", "empirical_gamma", "empirical_conditional_error")
    )
    return SimResult(
        rows=rows,
        aggregates=tuple(aggregates),
        row_columns=_TRADEOFF_ROW_COLS,
        aggregate_columns=_agg_columns(
            ("delta",), ("gamma_star", "empirical_gamma", "empirical_conditional_error")
        ),
    )


# ---------------------------------------------------------------------------
# plug-in consistency trend


def _mixture_cdf(a: float, delta: float) -> float:
    return 0.5 * ((1.0 - normal_tail(a - delta)) + (1.0 - normal_tail(a + delta)))


def plugin_population_risk(center: float, predict1_right: bool, delta: float, gamma: float) -> float:
    """Exact conditional risk of a fitted symmetric-in-confidence 1-d rule.

    The rule abstains on the interval [center - h, center + h] whose mixture
    mass is exactly gamma, and predicts by side of the interval.  This is
    the infinite-calibration-set risk of a monotone plug-in score whose 0.5
    crossing sits at `center`.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    lo, hi = 0.0, 1.0
    while _mixture_cdf(center + hi, delta) - _mixture_cdf(center - hi, delta) < gamma:
        hi *= 2.0
        if hi > 1e6:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        mass = _mixture_cdf(center + mid, delta) - _mixture_cdf(center - mid, delta)
        if mass < gamma:
            lo = mid
        else:
            hi = mid
    h = 0.5 * (lo + hi)
    a, b = center - h, center + h
    # class-conditional tail masses on each decided side
    p1_right = 0.5 * normal_tail(b - delta)
    p2_right = 0.5 * normal_tail(b + delta)
    p1_left = 0.5 * (1.0 - normal_tail(a - delta))
    p2_left = 0.5 * (1.0 - normal_tail(a + delta))
    if predict1_right:
        wrong = p2_right + p1_left
    else:
        wrong = p1_right + p2_left
    return wrong / (1.0 - gamma)


def _consistency_rep(delta: float, gamma: float, n_grid: tuple[int, ...], seed: int, rep: int) -> list[dict]:
    rng = seeded_stream(seed, rep)
    oracle_risk = gmm.threshold_for_gamma(gmm.GmmSpec(delta), gamma).risk
    rows = []
    for n_train in n_grid:
        x, y = _draw_mixture(rng, n_train, delta)
        model = fit_lda(x, y)
        w = float(np.linalg.inv(model.pooled_covariance)[0, 0] * (model.class_means[0, 0] - model.class_means[1, 0]))
        b = float(
            -0.5
            * np.linalg.inv(model.pooled_covariance)[0, 0]
            * (model.class_means[0, 0] ** 2 - model.class_means[1, 0] ** 2)
            + math.log(model.priors[0] / model.priors[1])
        )
        if w == 0.0:
            center, predict1_right = 0.0, True
        else:
            center, predict1_right = -b / w, w > 0
        risk = plugin_population_risk(center, predict1_right, delta, gamma)
        rows.append(
            {
                "delta": delta,
                "gamma": gamma,
                "n_train": n_train,
                "rep": rep,
                "plugin_risk": risk,
                "oracle_risk": oracle_risk,
                "risk_gap": risk - oracle_risk,
            }
        )
    return rows


_CONSISTENCY_ROW_COLS = (
    "delta",
    "gamma",
    "n_train",
    "rep",
    "plugin_risk",
    "oracle_risk",
    "risk_gap",
)


def run_consistency_trend(
    delta: float = 1.0,
    gamma: float = 0.3,
    n_grid: tuple[int, ...] = (100, 1000, 10000),
    reps: int = 100,
    seed: int = 0,
    workers: int = 1,
) -> SimResult:
    """Risk gap of the fitted-score rule versus the exact rule as n grows.

    The fitted rule's risk is computed in closed form (equivalent to an
    infinite calibration set), so the gap isolates estimation error of the
    score itself.  Aggregates report the median gap per training size.
    """
    per_rep = _parallel_map(
        partial(_consistency_rep, delta, gamma, tuple(n_grid), seed), range(reps), workers
    )
    rows = tuple(r for chunk in per_rep for r in chunk)
    aggregates = _aggregate(rows, keys=("n_train",), metrics=("risk_gap",))
    return SimResult(
        rows=rows,
        aggregates=tuple(aggregates),
        row_columns=_CONSISTENCY_ROW_COLS,
        aggregate_columns=_agg_columns(("n_train",), ("risk_gap",)),
    )


# ---------------------------------------------------------------------------
# phase-transition grid


def run_phase_experiment(cfg: gmm.PhaseGridConfig):
    """Capped risk-ratio grid with the two critical-exponent envelopes."""
    return gmm.phase_grid(cfg)


# ---------------------------------------------------------------------------
# aggregation and serialization helpers


def _percentile(values, q: float) -> float:
    """Order-statistic percentile (no interpolation beyond nearest rank)."""
    vals = sorted(v for v in values if not (isinstance(v, float) and math.isnan(v)))
    if not vals:
        return math.nan
    rank = min(len(vals) - 1, max(0, math.ceil(q / 100.0 * len(vals)) - 1))
    return float(vals[rank])


def _median(values) -> float:
    vals = sorted(v for v in values if not (isinstance(v, float) and math.isnan(v)))
    if not vals:
        return math.nan
    mid = len(vals) // 2
    if len(vals) % 2 == 1:
        return float(vals[mid])
    return 0.5 * (vals[mid - 1] + vals[mid])


def _agg_columns(keys: tuple, metrics: tuple) -> tuple:
    cols = list(keys) + ["reps"]
    for m in metrics:
        cols += [f"{m}_mean", f"{m}_median", f"{m}_p5", f"{m}_p95"]
    return tuple(cols)


def _aggregate(rows, keys: tuple, metrics: tuple) -> list[dict]:
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        group = groups[key]
        agg = dict(zip(keys, key))
        agg["reps"] = len(group)
        for m in metrics:
            vals = [row[m] for row in group]
            clean = [v for v in vals if not (isinstance(v, float) and math.isnan(v))]
            agg[f"{m}_mean"] = float(np.mean(clean)) if clean else math.nan
            agg[f"{m}_median"] = _median(vals)
            agg[f"{m}_p5"] = _percentile(vals, 5.0)
            agg[f"{m}_p95"] = _percentile(vals, 95.0)
        out.append(agg)
    return out


def _parallel_map(fn, items, workers: int) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("spawn")
    with ctx.Pool(processes=workers) as pool:
        return pool.map(fn, items)


def _format_cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def sim_result_to_csv(result: SimResult, rows_path, aggregates_path) -> None:
    """Tidy CSVs: one row per replication cell plus one aggregate file."""
    with open(rows_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(result.row_columns)
        for row in result.rows:
            writer.writerow([_format_cell(row[c]) for c in result.row_columns])
    with open(aggregates_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(result.aggregate_columns)
        for row in result.aggregates:
            writer.writerow([_format_cell(row[c]) for c in result.aggregate_columns])


def sim_result_to_svg(result: SimResult, metric: str, path, *, title: str = "") -> None:
    """Mean curve per arm over delta, with the 5th/95th band of the first arm."""
    key = "delta" if any("delta" in a for a in result.aggregates) else "n_train"
    arms = sorted({a.get("arm", "all") for a in result.aggregates})
    series = []
    bands = []
    for arm in arms:
        pts = [
            (float(a[key]), float(a[f"{metric}_mean"]))
            for a in result.aggregates
            if a.get("arm", "all") == arm and not math.isnan(a[f"{metric}_mean"])
        ]
        if pts:
            series.append((str(arm), sorted(pts)))
    if arms:
        first = arms[0]
        lower = sorted(
            (float(a[key]), float(a[f"{metric}_p5"]))
            for a in result.aggregates
            if a.get("arm", "all") == first and not math.isnan(a[f"{metric}_p5"])
        )
        upper = sorted(
            (float(a[key]), float(a[f"{metric}_p95"]))
            for a in result.aggregates
            if a.get("arm", "all") == first and not math.isnan(a[f"{metric}_p95"])
        )
        if lower and upper:
            bands.append((lower, upper))
    svg = line_chart_svg(series, title=title or metric, xlabel=key, ylabel=metric, bands=bands)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
