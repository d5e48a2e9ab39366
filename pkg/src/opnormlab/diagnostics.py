"""Estimators for the equivalent characterizations of sub-Gaussian laws.

From a sample buffer this module estimates:

* tail constants (B_hat, b_hat) by regressing log survival on t^2 over an
  empirical-quantile grid (:func:`fit_tail_params`), with an accept/reject
  decision rule (:func:`subgaussian_verdict`);
* the moment growth profile (E|x|^p)^(1/p) / sqrt(p), whose sup K_hat is
  bounded for sub-Gaussian laws (:func:`moment_ratio_profile`);
* the exponential-square moment E[exp(b x^2)] (:func:`psi2_estimate`);
* the union-bound statistic E[max of n draws] / sqrt(log n)
  (:func:`union_bound_profile`);
* row L2 norms of generated matrices, for testing whether an ensemble's
  rows are sub-Gaussian in norm (:func:`row_norm_samples`).

Decision geometry of the verdict: in the (t^2, log survival) plane a
Gaussian-type tail is a straight line.  Heavy tails bend *upward* (survival
decays slower than any Gaussian); bounded laws bend *downward* (survival
crashes to zero at the support edge).  The verdict therefore rejects upward
curvature, accepts a good linear fit, and accepts strong downward curvature
— only "none of the above" is rejected as an unclassifiable poor fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ensembles
from .errors import (
    DataError,
    DegenerateEnsembleError,
    InsufficientTailError,
    ParameterError,
)

#: Verdict defaults, calibrated on 1e6-sample controls: Gaussian curvature
#: score ~ +0.2, StudentT(3) ~ +2.3, bounded laws <= -1.5.
R2_THRESHOLD = 0.95
CURVATURE_THRESHOLD = 1.0

#: Number of quantile grid points used by fit_tail_params.
TAIL_GRID_POINTS = 25

#: psi2_estimate returns +inf when one sample carries more than this share
#: of the empirical sum — the plug-in mean is then dominated by a single
#: draw and certifies nothing.
PSI2_SHARE_LIMIT = 0.02

#: exp argument above which psi2_estimate reports +inf outright.
PSI2_OVERFLOW_ARG = 700.0


@dataclass
class TailFit:
    """Least-squares fit of log survival = log(B_hat) - b_hat * t^2.

    ``non_decay`` flags a fitted b_hat <= 0 (survival not shrinking over the
    grid); such a fit is returned rather than raised so the verdict can name
    the failure.
    """

    B_hat: float
    b_hat: float
    r_squared: float
    t_grid: np.ndarray
    survival: np.ndarray
    non_decay: bool = False


@dataclass(frozen=True)
class Verdict:
    accept: bool
    reason: str


@dataclass
class MomentProfile:
    p_values: np.ndarray
    ratios: np.ndarray
    K_hat: float


# ---------------------------------------------------------------------------
# survival and the tail fit
# ---------------------------------------------------------------------------

def empirical_survival(samples, t_grid) -> np.ndarray:
    """Fraction of samples with |x| > t, for each t in the grid."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise DataError("empty sample buffer")
    t = np.asarray(t_grid, dtype=np.float64).ravel()
    if t.size == 0:
        raise DataError("empty t_grid")
    if (t < 0).any() or (t.size > 1 and (np.diff(t) <= 0).any()):
        raise ParameterError("t_grid must be strictly increasing and >= 0")
    ax = np.sort(np.abs(x))
    return 1.0 - np.searchsorted(ax, t, side="right") / x.size


def fit_tail_curve(t_grid, survival):
    """Regression core: fit log(survival) = log(B) - b t^2 by least squares.

    Split out from :func:`fit_tail_params` so the regression can be checked
    on noise-free synthetic survival values, independent of sampling.
    Returns (B_hat, b_hat, r_squared).  All survival values must be > 0.
    """
    t = np.asarray(t_grid, dtype=np.float64).ravel()
    s = np.asarray(survival, dtype=np.float64).ravel()
    if t.size != s.size or t.size < 3:
        raise InsufficientTailError(
            f"need >= 3 grid points with nonzero survival, got {t.size}"
        )
    if (s <= 0).any():
        raise DataError("survival values must be positive for the log fit")
    u = t * t
    y = np.log(s)
    design = np.column_stack([np.ones_like(u), u])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    y_hat = design @ coef
    ss_res = float(np.sum((y - y_hat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(math.exp(coef[0])), float(-coef[1]), r2


def fit_tail_params(samples, q_low: float = 0.5, q_high: float = 0.999) -> TailFit:
    """Fit (B_hat, b_hat) on a quantile grid of |x|.

    The grid has TAIL_GRID_POINTS thresholds spaced geometrically in
    *survival* between 1-q_low and 1-q_high, so the deep tail is resolved as
    finely (in log-survival) as the shoulder.  Quantile spacing adapts to
    the sample scale automatically — no user-supplied t range.

    Raises InsufficientTailError when fewer than 3 grid points have nonzero
    survival (e.g. two-point laws, whose |x| is a single atom).
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 10_000:
        raise DataError(f"need at least 1e4 samples for a tail fit, got {x.size}")
    if not (0.5 <= q_low < q_high < 1.0):
        raise ParameterError(
            f"need 0.5 <= q_low < q_high < 1, got q_low={q_low}, q_high={q_high}"
        )
    s_hi = 1.0 - q_low
    s_lo = 1.0 - q_high
    k = np.arange(TAIL_GRID_POINTS) / (TAIL_GRID_POINTS - 1)
    qs = 1.0 - s_hi * (s_lo / s_hi) ** k
    t = np.unique(np.quantile(np.abs(x), qs))
    surv = empirical_survival(x, t)
    keep = surv > 0
    t, surv = t[keep], surv[keep]
    if t.size < 3:
        raise InsufficientTailError(
            f"only {t.size} grid points with nonzero survival — the law is "
            f"bounded or degenerate on this grid"
        )
    B_hat, b_hat, r2 = fit_tail_curve(t, surv)
    return TailFit(
        B_hat=B_hat,
        b_hat=b_hat,
        r_squared=r2,
        t_grid=t,
        survival=surv,
        non_decay=b_hat <= 0,
    )


def tail_curvature(fit: TailFit) -> float:
    """Systematic bowing of the fit residuals, in log-survival units.

    Fits a quadratic to the residuals of log survival vs t^2 and scales its
    leading coefficient to the half-range of the grid, giving the bow height
    at the grid edges.  Positive = survival decays slower than the fitted
    Gaussian (heavy-tail signature); negative = faster (bounded-type).
    """
    u = fit.t_grid**2
    y = np.log(fit.survival)
    resid = y - (math.log(fit.B_hat) - fit.b_hat * u)
    c2 = np.polyfit(u, resid, 2)[0]
    half_range = 0.5 * (u.max() - u.min())
    return float(c2 * half_range**2)


def subgaussian_verdict(
    fit: TailFit,
    r2_threshold: float = R2_THRESHOLD,
    curvature_threshold: float = CURVATURE_THRESHOLD,
) -> Verdict:
    """Accept/reject decision with a stated reason.

    Order of checks: non-decaying fits are rejected first; upward curvature
    beyond the threshold rejects (heavy tails); then either a good linear
    fit (r^2) or decisive downward curvature accepts.
    """
    if fit.non_decay:
        return Verdict(False, f"non-decaying tail (b_hat = {fit.b_hat:.4g} <= 0)")
    curv = tail_curvature(fit)
    if curv > curvature_threshold:
        return Verdict(
            False,
            f"upward curvature {curv:+.2f} exceeds {curvature_threshold:g} "
            f"(survival decays slower than any Gaussian)",
        )
    if fit.r_squared >= r2_threshold:
        return Verdict(
            True,
            f"Gaussian-type tail: r^2 = {fit.r_squared:.4f} >= {r2_threshold:g} "
            f"with b_hat = {fit.b_hat:.4g}",
        )
    if curv < -curvature_threshold:
        return Verdict(
            True,
            f"tail decays faster than the fitted Gaussian (curvature {curv:+.2f}; "
            f"bounded-type law)",
        )
    return Verdict(
        False,
        f"poor linear fit (r^2 = {fit.r_squared:.4f} < {r2_threshold:g}) without "
        f"decisive curvature ({curv:+.2f})",
    )


# ---------------------------------------------------------------------------
# moments, psi2, union bound
# ---------------------------------------------------------------------------

def moment_ratio_profile(samples, p_max: int) -> MomentProfile:
    """Ratios (E|x|^p)^(1/p) / sqrt(p) for p = 1..p_max; K_hat is their max.

    For a sub-Gaussian law the ratios are bounded in p; for a law with an
    infinite p-th moment the plug-in estimate at that p grows without bound
    as the sample size increases (compare K_hat across sample sizes to see
    it).
    """
    if not 1 <= p_max <= 20:
        raise ParameterError(f"p_max must be in [1, 20], got {p_max}")
    x = np.abs(np.asarray(samples, dtype=np.float64).ravel())
    if x.size < 10_000:
        raise DataError(f"need at least 1e4 samples, got {x.size}")
    ps = np.arange(1, p_max + 1)
    ratios = np.empty(p_max)
    for i, p in enumerate(ps):
        m = float(np.mean(x**p))
        if not math.isfinite(m):
            raise DataError(f"empirical moment of order {p} is not finite")
        ratios[i] = m ** (1.0 / p) / math.sqrt(p)
    return MomentProfile(p_values=ps, ratios=ratios, K_hat=float(ratios.max()))


def psi2_estimate(samples, b: float) -> float:
    """Empirical E[exp(b x^2)], with +inf sentinels where the mean is useless.

    Two sentinel conditions: an exp argument above PSI2_OVERFLOW_ARG (the
    mean overflows outright), and a single sample carrying more than
    PSI2_SHARE_LIMIT of the empirical sum.  The second catches b at or past
    the integrability boundary, where the integral diverges but every finite
    sample still averages to a finite — and meaningless — number.  The
    largest-term share is monotone in b for a fixed buffer, so the sentinel
    preserves monotonicity of the estimate in b.
    """
    if not b > 0:
        raise ParameterError(f"b must be > 0, got {b}")
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise DataError("empty sample buffer")
    args = b * x * x
    top = float(args.max())
    if top > PSI2_OVERFLOW_ARG:
        return math.inf
    shifted = np.exp(args - top)
    total = float(shifted.sum())
    if 1.0 / total > PSI2_SHARE_LIMIT:
        return math.inf
    return float(math.exp(top) * total / x.size)


def union_bound_profile(dist, n_grid, trials: int, seed: int) -> list[float]:
    """Monte Carlo E[max_{i<=n} |x_i|] / sqrt(log n) for each n in the grid.

    Bounded for sub-Gaussian laws (the Gaussian profile sits near sqrt(2));
    grows along the grid for polynomial tails, whose maxima outrun sqrt(log n).
    """
    n_grid = [int(n) for n in n_grid]
    if any(n < 2 for n in n_grid) or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ParameterError("n_grid must be increasing with every n >= 2")
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    out = []
    for idx, n in enumerate(n_grid):
        block_seed = ensembles.derive_trial_seed(seed, idx)
        draws = ensembles.sample_values(dist, trials * n, block_seed)
        maxima = np.abs(draws.reshape(trials, n)).max(axis=1)
        out.append(float(maxima.mean() / math.sqrt(math.log(n))))
    return out


def row_norm_samples(spec, n: int, trials: int, seed: int) -> np.ndarray:
    """L2 norms of row 0 of ``trials`` generated n-by-n matrices.

    Feed the result to :func:`fit_tail_params` to test whether an ensemble's
    rows are sub-Gaussian in norm.  Each trial generates the full matrix so
    the row law is exactly that of :func:`ensembles.sample_matrix` rows.
    """
    if isinstance(spec, ensembles.AllOnes):
        raise DegenerateEnsembleError(
            "all-ones rows have deterministic norm sqrt(n); nothing to sample"
        )
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    out = np.empty(trials)
    for k in range(trials):
        m = ensembles.sample_matrix(spec, n, n, ensembles.derive_trial_seed(seed, k))
        out[k] = np.linalg.norm(m[0])
    return out


# ---------------------------------------------------------------------------
# the battery: one dict with the fixed report field names
# ---------------------------------------------------------------------------

def run_battery(
    samples,
    p_max: int = 12,
    q_low: float = 0.5,
    q_high: float = 0.999,
    psi2_b: float = 0.25,
    sigma_ref: float | None = None,
) -> dict:
    """Full sub-Gaussian test battery on one sample buffer.

    Returns a plain dict with the fixed report fields ``B_hat``, ``b_hat``,
    ``r_squared``, ``K_hat``, ``verdict``, ``reason`` (plus the psi2 numbers
    and sample count).  A bounded law whose tail grid collapses (e.g. a
    two-point law) is accepted with the bounded-support constants
    (B = e, b = 1/max^2) and ``r_squared`` = None — a survival that steps to
    zero beats any Gaussian tail.

    ``sigma_ref``, when given, adds the commonly quoted Gaussian-scale
    reference constants sigma*e^(1/e) and sigma*sqrt(2 pi) next to the
    measured K_hat.  They are reported for comparison only, never asserted.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    try:
        fit = fit_tail_params(x, q_low=q_low, q_high=q_high)
        verdict = subgaussian_verdict(fit)
        B_hat, b_hat, r2 = fit.B_hat, fit.b_hat, fit.r_squared
    except InsufficientTailError:
        cap = float(np.abs(x).max())
        B_hat, b_hat, r2 = math.e, 1.0 / cap**2, None
        verdict = Verdict(
            True,
            f"bounded support: survival is 0 beyond t = {cap:.6g}, which "
            f"dominates B exp(-b t^2) with B = e, b = {1.0 / cap**2:.4g}",
        )
    profile = moment_ratio_profile(x, p_max=p_max)
    psi2 = psi2_estimate(x, psi2_b)
    report = {
        "B_hat": B_hat,
        "b_hat": b_hat,
        "r_squared": r2,
        "K_hat": profile.K_hat,
        "verdict": "accept" if verdict.accept else "reject",
        "reason": verdict.reason,
        "psi2": psi2,
        "psi2_b": psi2_b,
        "n_samples": int(x.size),
        "p_max": p_max,
    }
    if sigma_ref is not None:
        report["K_ref_moment"] = sigma_ref * math.exp(1.0 / math.e)
        report["K_ref_union"] = sigma_ref * math.sqrt(2.0 * math.pi)
    return report
