"""Closed-form oracle for the symmetric two-component Gaussian mixture.

The mixture has centers at -delta and +delta, unit variance, and equal
priors; class 1 sits at +delta.  A symmetric abstention band |x| < t maps to
an operating point (t, gamma, risk):

    gamma = P(xi >= delta - t) - P(xi >= delta + t)
    risk  = P(xi >= delta + t) / (1 - gamma)

All maps between t, gamma, and risk are monotone, so inversion is done by
bisection.  The phase-transition machinery parameterizes separation as
delta = c * sqrt(2 log(1/delta_target)) and abstention mass as a power of
delta_target, and computes where risk / delta_target crosses 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .numerics import BracketError, normal_tail, normal_tail_vec
from .svgchart import heatmap_svg

__all__ = [
    "GmmSpec",
    "OracleOperatingPoint",
    "PhaseGridConfig",
    "PhaseCell",
    "InfeasibleTargetError",
    "operating_point_at_t",
    "threshold_for_gamma",
    "gamma_for_target_risk",
    "empirical_exponent",
    "phase_envelope",
    "m_star",
    "m_lower",
    "phase_grid",
    "phase_grid_to_csv",
    "phase_grid_to_svg",
]


class InfeasibleTargetError(ValueError):
    """The requested error target cannot be met by any operating point."""


@dataclass(frozen=True)
class GmmSpec:
    """Half-separation between the two centers, in standard deviations."""

    delta: float

    def __post_init__(self) -> None:
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be positive and finite, got {self.delta!r}")


@dataclass(frozen=True)
class OracleOperatingPoint:
    """A (threshold, abstention mass, conditional risk) triple.

    gamma_complement stores 1 - gamma without cancellation, which matters
    when gamma is within double rounding of 1 (deep phase-grid cells).
    """

    t: float
    gamma: float
    risk: float
    gamma_complement: float


@dataclass(frozen=True)
class PhaseGridConfig:
    """Grid description for the risk-ratio phase diagram.

    delta_target is the misclassification level whose attainability is being
    probed; c scales the separation, m the abstention-mass exponent.  Cells
    with |c - 1/2| <= dead_band are left unresolved since neither
    parameterization of the abstention mass applies there.
    """

    delta_target: float
    c_grid: tuple[float, ...]
    m_grid: tuple[float, ...]
    cap: tuple[float, float] = (0.5, 2.0)
    dead_band: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 < self.delta_target < 1.0:
            raise ValueError("delta_target must lie in (0, 1)")
        for name, grid in (("c_grid", self.c_grid), ("m_grid", self.m_grid)):
            if len(grid) == 0:
                raise ValueError(f"{name} must be nonempty")
            if any(not 0.0 < g < 1.0 for g in grid):
                raise ValueError(f"{name} values must lie in (0, 1)")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        if not self.cap[0] < self.cap[1]:
            raise ValueError("cap interval must be ordered")


@dataclass(frozen=True)
class PhaseCell:
    """One (c, m) cell of the phase diagram."""

    c: float
    m: float
    gamma: float
    gamma_complement: float
    t: float
    risk: float
    risk_ratio_raw: float
    risk_ratio_capped: float
    resolved: bool


def operating_point_at_t(spec: GmmSpec, t: float) -> OracleOperatingPoint:
    """Operating point of the symmetric abstention band |x| < t."""
    if t < 0:
        raise ValueError("threshold t must be nonnegative")
    d = spec.delta
    upper = normal_tail(d + t)
    # 1 - gamma = P(xi >= t - d) + P(xi >= d + t), exact for any t >= 0
    complement = normal_tail(t - d) + upper
    gamma = normal_tail(d - t) - upper
    gamma = min(max(gamma, 0.0), 1.0)
    risk = upper / complement if complement > 0 else 0.0
    return OracleOperatingPoint(t=float(t), gamma=gamma, risk=risk, gamma_complement=complement)


def _bisect_t(eval_fn, target: float, increasing: bool, hi_start: float) -> float:
    """Bisection in t on [0, hi] with automatic upper-bracket growth."""
    lo, hi = 0.0, hi_start
    f_lo = eval_fn(lo)
    if (f_lo > target) == increasing and not math.isclose(f_lo, target, rel_tol=0, abs_tol=1e-14):
        raise BracketError(f"target {target!r} below the t=0 value {f_lo!r}")
    grow = 0
    while (eval_fn(hi) < target) == increasing:
        hi *= 2.0
        grow += 1
        if grow > 60:
            raise BracketError(f"target {target!r} not reachable for any threshold")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (eval_fn(mid) < target) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def threshold_for_gamma(spec: GmmSpec, gamma: float) -> OracleOperatingPoint:
    """Unique t >= 0 whose abstention mass equals gamma (tolerance 1e-10)."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if gamma == 0.0:
        return operating_point_at_t(spec, 0.0)
    d = spec.delta

    def gamma_at(t: float) -> float:
        return normal_tail(d - t) - normal_tail(d + t)

    t = _bisect_t(gamma_at, gamma, increasing=True, hi_start=d + 2.0)
    return operating_point_at_t(spec, t)


def _threshold_for_gamma_complement(spec: GmmSpec, complement: float) -> OracleOperatingPoint:
    """Invert 1 - gamma, stable when gamma is numerically 1."""
    if not 0.0 < complement <= 1.0:
        raise ValueError("gamma complement must lie in (0, 1]")
    d = spec.delta

    def complement_at(t: float) -> float:
        return normal_tail(t - d) + normal_tail(d + t)

    t = _bisect_t(complement_at, complement, increasing=False, hi_start=d + 2.0)
    return operating_point_at_t(spec, t)


def gamma_for_target_risk(spec: GmmSpec, target_risk: float) -> OracleOperatingPoint:
    """Minimal-abstention operating point with conditional risk target_risk.

    Returns the gamma = 0 point when the Bayes risk already meets the
    target.  Raises InfeasibleTargetError for nonpositive targets.
    """
    if target_risk <= 0.0:
        raise InfeasibleTargetError("conditional risk 0 needs full abstention")
    if target_risk >= 1.0:
        raise ValueError("target_risk must lie in (0, 1)")
    d = spec.delta
    if target_risk >= normal_tail(d):
        return operating_point_at_t(spec, 0.0)

    def risk_at(t: float) -> float:
        upper = normal_tail(d + t)
        return upper / (normal_tail(t - d) + upper)

    t = _bisect_t(risk_at, target_risk, increasing=False, hi_start=d + 2.0)
    return operating_point_at_t(spec, t)


def empirical_exponent(c: float, delta_target: float) -> float:
    """Observed abstention exponent m-hat at relative separation c.

    Finds the minimal abstention reaching conditional risk delta_target at
    separation c * sqrt(2 log(1/delta_target)) and reads off the exponent:
    log(1/gamma) / log(1/delta_target) above c = 1/2, with gamma replaced by
    its complement below.  The complement is solved directly so the result
    stays finite even when gamma rounds to 1 in doubles.
    """
    if not 0.0 < c < 1.0 or c == 0.5:
        raise ValueError(f"c must lie in (0, 1) excluding 1/2, got {c!r}")
    if not 0.0 < delta_target < 1.0:
        raise ValueError("delta_target must lie in (0, 1)")
    log_inv = math.log(1.0 / delta_target)
    spec = GmmSpec(c * math.sqrt(2.0 * log_inv))
    point = gamma_for_target_risk(spec, delta_target)
    if c > 0.5:
        if point.gamma <= 0.0:
            return 0.0
        return math.log(1.0 / point.gamma) / log_inv
    if point.gamma_complement <= 0.0:
        return math.inf
    return math.log(1.0 / point.gamma_complement) / log_inv


def phase_envelope(c: float, delta_target: float) -> tuple[float, float]:
    """Two-sided finite-delta envelope for the optimal abstention exponent.

    Both ends apply the relative correction epsilon =
    log(4 pi log(1/g)) / (2 log(1/g)) to the critical curve, with g the
    small abstention quantity of the asymptotic curve at this cell,
    g = delta_target ** m_star(c): (2c - 1 -/+ epsilon)^2 above one half,
    (c - (1 -/+ epsilon)/(4c))^2 below.  The minus branch is the impossibility
    side; the plus branch absorbs the polynomial tail prefactors that push
    the realized exponent above the asymptotic curve at finite delta.
    """
    log_inv = m_star(c) * math.log(1.0 / delta_target)
    if log_inv <= 0.0 or 4.0 * math.pi * log_inv <= 1.0:
        return 0.0, math.inf
    eps = 0.5 * math.log(4.0 * math.pi * log_inv) / log_inv
    if c > 0.5:
        low = (max(2.0 * c - 1.0 - eps, 0.0)) ** 2
        high = (2.0 * c - 1.0 + eps) ** 2
    else:
        low = (max(1.0 / (4.0 * c) * (1.0 - eps) - c, 0.0)) ** 2
        high = ((1.0 + eps) / (4.0 * c) - c) ** 2
    return min(low, m_star(c)), high


def m_star(c: float) -> float:
    """Critical abstention-mass exponent at relative separation c."""
    if not 0.0 < c < 1.0 or c == 0.5:
        raise ValueError(f"c must lie in (0, 1) excluding 1/2, got {c!r}")
    if c < 0.5:
        return (c - 1.0 / (4.0 * c)) ** 2
    return (2.0 * c - 1.0) ** 2


def m_lower(c: float, gamma_delta: float) -> float:
    """Finite-delta lower envelope of the critical exponent.

    gamma_delta is the small abstention quantity (the mass itself for
    c > 1/2, its complement for c < 1/2).
    """
    if not 0.0 < c < 1.0 or c == 0.5:
        raise ValueError(f"c must lie in (0, 1) excluding 1/2, got {c!r}")
    if not 0.0 < gamma_delta < 1.0:
        raise ValueError("gamma_delta must lie in (0, 1)")
    log_inv = math.log(1.0 / gamma_delta)
    if log_inv <= 1.0:
        raise ValueError("gamma_delta too large: log(1/gamma_delta) must exceed 1")
    eps = 0.5 * math.log(4.0 * math.pi * log_inv) / log_inv
    if c < 0.5:
        return (c - (1.0 - eps) / (4.0 * c)) ** 2
    return (2.0 * c - 1.0 + eps) ** 2


def _solve_t_grid(delta: np.ndarray, target: np.ndarray, increasing: bool) -> np.ndarray:
    """Lockstep vectorized bisection in t for every (delta, target) pair."""

    def value_at(t: np.ndarray) -> np.ndarray:
        if increasing:
            return normal_tail_vec(delta - t) - normal_tail_vec(delta + t)
        return normal_tail_vec(t - delta) + normal_tail_vec(delta + t)

    lo = np.zeros_like(delta)
    hi = delta + 2.0
    for _ in range(70):
        short = (value_at(hi) < target) == increasing
        if not short.any():
            break
        hi = np.where(short, hi * 2.0, hi)
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        below = (value_at(mid) < target) == increasing
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def phase_grid(cfg: PhaseGridConfig) -> list[PhaseCell]:
    """Capped risk ratios risk / delta_target over the (c, m) grid.

    Cells inside the dead band around c = 1/2, or whose abstention mass is
    numerically 1, are emitted with resolved=False rather than dropped.
    Cell order is row-major: c outer, m inner.
    """
    dt = cfg.delta_target
    log_inv = math.log(1.0 / dt)
    lo_cap, hi_cap = cfg.cap

    cells: list[PhaseCell] = []
    cs = np.asarray(cfg.c_grid)
    ms = np.asarray(cfg.m_grid)
    c_mat, m_mat = np.meshgrid(cs, ms, indexing="ij")
    c_flat, m_flat = c_mat.ravel(), m_mat.ravel()
    delta_sep = c_flat * math.sqrt(2.0 * log_inv)
    upper_side = c_flat > 0.5
    dead = np.abs(c_flat - 0.5) <= cfg.dead_band
    # gamma = dt**m above c=1/2, 1 - dt**m below; solve each side in its
    # well-conditioned parameterization
    small = dt**m_flat
    t_sol = np.where(
        upper_side,
        _solve_t_grid(delta_sep, small, increasing=True),
        _solve_t_grid(delta_sep, small, increasing=False),
    )
    upper_tail = normal_tail_vec(delta_sep + t_sol)
    complement = np.where(upper_side, 1.0 - small, small)
    gamma = np.where(upper_side, small, 1.0 - small)
    risk = upper_tail / complement
    unresolved = dead | (complement <= 0.0)
    for i in range(c_flat.size):
        if unresolved[i]:
            cells.append(
                PhaseCell(
                    c=float(c_flat[i]),
                    m=float(m_flat[i]),
                    gamma=math.nan,
                    gamma_complement=math.nan,
                    t=math.nan,
                    risk=math.nan,
                    risk_ratio_raw=math.nan,
                    risk_ratio_capped=math.nan,
                    resolved=False,
                )
            )
            continue
        raw = float(risk[i]) / dt
        cells.append(
            PhaseCell(
                c=float(c_flat[i]),
                m=float(m_flat[i]),
                gamma=float(gamma[i]),
                gamma_complement=float(complement[i]),
                t=float(t_sol[i]),
                risk=float(risk[i]),
                risk_ratio_raw=raw,
                risk_ratio_capped=min(max(raw, lo_cap), hi_cap),
                resolved=True,
            )
        )
    return cells


def phase_grid_to_csv(cells: list[PhaseCell], path) -> None:
    """Write cells as CSV: c, m, gamma, t, risk_ratio_raw, risk_ratio_capped."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["c", "m", "gamma", "t", "risk_ratio_raw", "risk_ratio_capped"])
        for cell in cells:
            writer.writerow(
                [
                    format(cell.c, ".17g"),
                    format(cell.m, ".17g"),
                    format(cell.gamma, ".17g"),
                    format(cell.t, ".17g"),
                    format(cell.risk_ratio_raw, ".17g"),
                    format(cell.risk_ratio_capped, ".17g"),
                ]
            )


def phase_grid_to_svg(cells: list[PhaseCell], cfg: PhaseGridConfig, path) -> None:
    """Render the capped risk-ratio grid as a heatmap with envelope curves."""
    cs = sorted({cell.c for cell in cells})
    ms = sorted({cell.m for cell in cells})
    index = {(cell.c, cell.m): cell for cell in cells}
    values = [
        [
            index[(c, m)].risk_ratio_capped if index[(c, m)].resolved else math.nan
            for c in cs
        ]
        for m in ms
    ]
    overlays = []
    for label, fn in (
        ("m*", lambda c: m_star(c)),
        ("m_lower", lambda c: m_lower(c, cfg.delta_target ** max(m_star(c), 1e-3))),
    ):
        pts = []
        for c in cs:
            if abs(c - 0.5) <= cfg.dead_band:
                continue
            try:
                y = fn(c)
            except ValueError:
                continue
            if min(ms) <= y <= max(ms):
                pts.append((c, y))
        if pts:
            overlays.append((label, pts))
    svg = heatmap_svg(
        cs,
        ms,
        values,
        vmin=cfg.cap[0],
        vmax=cfg.cap[1],
        title=f"risk ratio at delta_target={cfg.delta_target:g}",
        xlabel="c (relative separation)",
        ylabel="m (abstention exponent)",
        overlays=overlays,
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
