"""Monte Carlo experiments over matrix ensembles, with machine-readable reports.

Everything here is a pure function of (parameters, master_seed): per-trial
seeds come from :func:`opnormlab.ensembles.derive_trial_seed` with a global
trial counter, trials may run on any number of threads, and results are
collected in trial order before any reduction — so output is bit-identical
for any scheduling.

Norm backend: the exact Jacobi oracle up to n = EXACT_DIM_LIMIT, power
iteration (rtol 1e-6) above it.

Reports serialize to JSON-compatible structured text with 17-significant-
digit floats and no timestamps, so identical runs produce identical bytes.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, is_dataclass, asdict

import numpy as np

from . import __version__
from . import ensembles
from . import specnorm
from .errors import ConvergenceError, DataError, ParameterError

#: Largest n sent to the exact oracle; beyond it trials use power iteration.
EXACT_DIM_LIMIT = 128
POWER_RTOL = 1e-6
POWER_MAX_ITER = 10_000

#: Threshold grid bracketing the ~2 sqrt(n) spectral edge.
DEFAULT_A_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0)

#: 95% normal quantile for the Wilson interval.
WILSON_Z = 1.959963984540054

#: A grid point enters the 2-parameter decay fit only with this many hits.
MIN_FIT_HITS = 5

SCHEMA_VERSION = "1"

U_MODES = ("first_basis", "uniform_diagonal", "seeded_random")


# ---------------------------------------------------------------------------
# result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo exceedance estimate for one threshold A."""

    A: float
    n: int
    trials: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class GrowthFit:
    """Log-log fit of mean norm against n: slope 0.5 = sqrt growth."""

    n_grid: tuple
    mean_norms: tuple
    slope: float
    intercept: float
    residual_max: float


@dataclass(frozen=True)
class DecayCertificate:
    """Fit of -log p_hat = c_hat * n - log(C_hat) across the n grid.

    ``degenerate`` marks certificates that certify nothing: no usable grid
    points, or a fitted c_hat <= 0.  ``note`` records which fit path was
    taken and what the fit does not adjudicate.
    """

    A: float
    n_grid: tuple
    neg_log_p: tuple
    c_hat: float
    C_hat: float
    monotone: bool
    degenerate: bool
    note: str


@dataclass(frozen=True)
class ExperimentReport:
    schema_version: str
    version: str
    config: dict
    master_seed: int
    payload: dict


# ---------------------------------------------------------------------------
# Wilson interval
# ---------------------------------------------------------------------------

def wilson_interval(hits: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval, with the rule-of-three fallback at 0 hits.

    At zero hits the Wilson upper limit (~3.84/n) is replaced by the sharper
    classical 3/n upper bound.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if not 0 <= hits <= trials:
        raise ParameterError(f"hits must be in [0, trials], got {hits}/{trials}")
    if hits == 0:
        return 0.0, 3.0 / trials
    z2 = WILSON_Z * WILSON_Z
    p = hits / trials
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = (
        WILSON_Z
        * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials))
        / denom
    )
    return max(0.0, center - half), min(1.0, center + half)


def _estimate(A: float, n: int, hits: int, trials: int) -> TailEstimate:
    lo, hi = wilson_interval(hits, trials)
    return TailEstimate(
        A=float(A), n=int(n), trials=int(trials), hits=int(hits),
        p_hat=hits / trials, ci_low=lo, ci_high=hi,
    )


# ---------------------------------------------------------------------------
# per-trial norms
# ---------------------------------------------------------------------------

def trial_norm(spec, n: int, trial_seed: int) -> float:
    """Operator norm of one generated n-by-n matrix (backend by size)."""
    m = ensembles.sample_matrix(spec, n, n, trial_seed)
    if n <= EXACT_DIM_LIMIT:
        return specnorm.opnorm_exact(m)
    try:
        return specnorm.opnorm_power(m, rtol=POWER_RTOL, max_iter=POWER_MAX_ITER).value
    except ConvergenceError as exc:
        raise ConvergenceError(
            f"power iteration failed at n={n}, trial_seed={trial_seed}: {exc}",
            last_estimate=exc.last_estimate,
        ) from exc


def _map_trials(fn, count: int, threads: int) -> list:
    """Run fn(k) for k in range(count), in trial order, on ``threads`` workers."""
    if threads <= 1:
        return [fn(k) for k in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def sample_norms(
    spec, n: int, trials: int, master_seed: int,
    threads: int = 1, counter_start: int = 0,
) -> np.ndarray:
    """Operator norms of ``trials`` independent matrices, in trial order.

    ``counter_start`` offsets the derived-seed counter so several grid
    points can share one master seed without overlapping trial seeds.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")

    def one(k: int) -> float:
        seed = ensembles.derive_trial_seed(master_seed, counter_start + k)
        return trial_norm(spec, n, seed)

    return np.asarray(_map_trials(one, trials, threads))


def grid_norms(
    spec, n_grid, trials: int, master_seed: int, threads: int = 1
) -> list[np.ndarray]:
    """Norm samples for every n in the grid, with a global trial counter."""
    n_grid = list(n_grid)
    out = []
    counter = 0
    for n in n_grid:
        out.append(
            sample_norms(spec, n, trials, master_seed,
                         threads=threads, counter_start=counter)
        )
        counter += trials
    return out


# ---------------------------------------------------------------------------
# tail probabilities (operator norm and fixed vector)
# ---------------------------------------------------------------------------

def tail_curve(
    spec, n: int, A_grid, trials: int, master_seed: int, threads: int = 1
) -> list[TailEstimate]:
    """Exceedance estimates P(||M|| > A sqrt(n)) over a grid of A, from one
    shared set of trials (hence monotone non-increasing in A by construction)."""
    norms = sample_norms(spec, n, trials, master_seed, threads=threads)
    root = math.sqrt(n)
    return [
        _estimate(A, n, int((norms > A * root).sum()), trials) for A in A_grid
    ]


def tail_probability(
    spec, n: int, A: float, trials: int, master_seed: int, threads: int = 1
) -> TailEstimate:
    """P(||M||_op > A sqrt(n)) by Monte Carlo."""
    return tail_curve(spec, n, [A], trials, master_seed, threads=threads)[0]


def fixed_vector(n: int, u_mode: str, master_seed: int) -> np.ndarray:
    """The unit vector whose image norm is tested: a basis vector, the
    uniform diagonal direction, or a seeded random direction."""
    if u_mode == "first_basis":
        u = np.zeros(n)
        u[0] = 1.0
        return u
    if u_mode == "uniform_diagonal":
        return np.full(n, 1.0 / math.sqrt(n))
    if u_mode == "seeded_random":
        rng = np.random.default_rng(
            np.random.SeedSequence([master_seed & ((1 << 64) - 1), 0xF1CED])
        )
        u = rng.standard_normal(n)
        return u / np.linalg.norm(u)
    raise ParameterError(f"u_mode must be one of {U_MODES}, got {u_mode!r}")


def fixed_vector_curve(
    spec, n: int, u_mode: str, A_grid, trials: int, master_seed: int,
    threads: int = 1,
) -> list[TailEstimate]:
    """Exceedance of ||M u|| for the fixed vector u, over a grid of A.

    Uses the same derived trial seeds as :func:`tail_curve`, so the trials
    see identical matrices and the event {||M u|| > A sqrt(n)} is contained
    in {||M|| > A sqrt(n)} trial by trial, not just in expectation.
    """
    u = fixed_vector(n, u_mode, master_seed)

    def one(k: int) -> float:
        seed = ensembles.derive_trial_seed(master_seed, k)
        m = ensembles.sample_matrix(spec, n, n, seed)
        return float(np.linalg.norm(m @ u))

    image_norms = np.asarray(_map_trials(one, trials, threads))
    root = math.sqrt(n)
    return [
        _estimate(A, n, int((image_norms > A * root).sum()), trials)
        for A in A_grid
    ]


def fixed_vector_tail(
    spec, n: int, u_mode: str, A: float, trials: int, master_seed: int,
    threads: int = 1,
) -> TailEstimate:
    """P(||M u|| > A sqrt(n)) for the u named by u_mode."""
    return fixed_vector_curve(
        spec, n, u_mode, [A], trials, master_seed, threads=threads
    )[0]


# ---------------------------------------------------------------------------
# growth sweep and decay certificate
# ---------------------------------------------------------------------------

def _check_grid(n_grid, min_len: int) -> list[int]:
    grid = [int(n) for n in n_grid]
    if len(grid) < min_len:
        raise ParameterError(f"n_grid needs >= {min_len} points, got {len(grid)}")
    if any(b <= a for a, b in zip(grid, grid[1:])) or any(n < 1 for n in grid):
        raise ParameterError(f"n_grid must be strictly increasing, got {grid}")
    return grid


def growth_fit(n_grid, norms_per_n) -> GrowthFit:
    """Least-squares slope of log(mean norm) against log(n)."""
    n_grid = list(n_grid)
    means = np.array([float(np.mean(v)) for v in norms_per_n])
    if (means <= 0).any():
        raise DataError("mean norms must be positive for the log-log fit")
    lx = np.log(np.asarray(n_grid, dtype=np.float64))
    ly = np.log(means)
    design = np.column_stack([np.ones_like(lx), lx])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ coef
    return GrowthFit(
        n_grid=tuple(n_grid),
        mean_norms=tuple(float(v) for v in means),
        slope=float(coef[1]),
        intercept=float(coef[0]),
        residual_max=float(np.abs(resid).max()),
    )


def growth_sweep(
    spec, n_grid, trials: int, master_seed: int, threads: int = 1
) -> GrowthFit:
    """Mean operator norm per n and the log-log growth exponent.

    Sub-Gaussian iid or independent-row ensembles give slope ~ 0.5; the
    all-ones control attains the K*n ceiling and gives slope 1.
    """
    grid = _check_grid(n_grid, min_len=3)
    return growth_fit(grid, grid_norms(spec, grid, trials, master_seed, threads))


def decay_certificate(A: float, n_grid, estimates) -> DecayCertificate:
    """Fit the per-n exceedance decay; see note field for the fit path.

    Grid points enter the 2-parameter fit with hits >= MIN_FIT_HITS (the log
    of a near-zero frequency is noise).  If that leaves fewer than two
    points the filter widens to hits > 0; a single surviving point pins
    C_hat = 1 and reads the rate directly as -log(p_hat)/n, which
    under-estimates the rate whenever the true prefactor exceeds 1, so it
    stays a conservative certificate.  No surviving points => degenerate
    (only the rule-of-three upper bounds in the estimates say anything).
    """
    n_grid = list(n_grid)
    p = np.array([e.p_hat for e in estimates])
    hits = np.array([e.hits for e in estimates])
    neg_log = tuple(float(-math.log(pi)) if pi > 0 else math.inf for pi in p)
    monotone = bool(np.all(np.diff(p) <= 0) and p[0] > p[-1])

    usable = np.nonzero(hits >= MIN_FIT_HITS)[0]
    path = f"fit over points with hits >= {MIN_FIT_HITS}"
    if usable.size < 2:
        usable = np.nonzero(hits > 0)[0]
        path = "fit widened to points with hits > 0"
    tail_note = (
        " The fit measures decay in n at one fixed A; the dependence of the "
        "rate on A itself is not adjudicated here."
    )
    if usable.size == 0:
        return DecayCertificate(
            A=float(A), n_grid=tuple(n_grid), neg_log_p=neg_log,
            c_hat=0.0, C_hat=1.0, monotone=monotone, degenerate=True,
            note="no grid point had a single hit; only rule-of-three upper "
                 "bounds are informative." + tail_note,
        )
    if usable.size == 1:
        i = int(usable[0])
        c_hat = -math.log(p[i]) / n_grid[i]
        return DecayCertificate(
            A=float(A), n_grid=tuple(n_grid), neg_log_p=neg_log,
            c_hat=float(c_hat), C_hat=1.0, monotone=monotone,
            degenerate=c_hat <= 0,
            note=f"single usable point (n = {n_grid[i]}); prefactor pinned to "
                 f"C_hat = 1 and rate read as -log(p_hat)/n." + tail_note,
        )
    xs = np.asarray([n_grid[i] for i in usable], dtype=np.float64)
    ys = np.asarray([-math.log(p[i]) for i in usable])
    design = np.column_stack([np.ones_like(xs), xs])
    coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
    c_hat = float(coef[1])
    C_hat = float(math.exp(-coef[0]))
    return DecayCertificate(
        A=float(A), n_grid=tuple(n_grid), neg_log_p=neg_log,
        c_hat=c_hat, C_hat=C_hat, monotone=monotone, degenerate=c_hat <= 0.0,
        note=path + "." + tail_note,
    )


def overwhelming_decay_check(
    spec, A: float, n_grid, trials: int, master_seed: int, threads: int = 1
) -> DecayCertificate:
    """Does P(||M|| > A sqrt(n)) decay like C exp(-c n) along the grid?

    A should sit above the ensemble's norm/sqrt(n) concentration point
    (2.5 for Gaussian-scale ensembles) so the exceedance actually decays.
    """
    grid = _check_grid(n_grid, min_len=2)
    root_estimates = []
    for n, norms in zip(grid, grid_norms(spec, grid, trials, master_seed, threads)):
        hits = int((norms > A * math.sqrt(n)).sum())
        root_estimates.append(_estimate(A, n, hits, trials))
    return decay_certificate(A, grid, root_estimates)


def sweep_rows(n_grid, norms_per_n, A: float) -> list[dict]:
    """Per-n records for the delimited export: mean norm plus the exceedance
    estimate at threshold A, from the same trials."""
    rows = []
    for n, norms in zip(n_grid, norms_per_n):
        hits = int((norms > A * math.sqrt(n)).sum())
        est = _estimate(A, n, hits, len(norms))
        rows.append({"n": int(n), "mean_norm": float(np.mean(norms)), "tail": est})
    return rows


# ---------------------------------------------------------------------------
# Tracy-Widom style edge window
# ---------------------------------------------------------------------------

def tw_window_fraction(
    n: int, trials: int, width_c: float, master_seed: int, threads: int = 1
) -> float:
    """Fraction of iid Gaussian(1) trials with sigma_max inside
    [2 sqrt(n) - width_c n^(-1/6), 2 sqrt(n) + width_c n^(-1/6)].

    Monotone non-decreasing in width_c on identical seeds (nested windows).
    """
    if not width_c >= 0:
        raise ParameterError(f"width_c must be >= 0, got {width_c}")
    spec = ensembles.IidEntries(ensembles.Gaussian(1.0))
    norms = sample_norms(spec, n, trials, master_seed, threads=threads)
    center = 2.0 * math.sqrt(n)
    half = width_c * n ** (-1.0 / 6.0)
    inside = (norms >= center - half) & (norms <= center + half)
    return float(inside.mean())


# ---------------------------------------------------------------------------
# reports: structured text with stable bytes
# ---------------------------------------------------------------------------

def _plain(value):
    """Convert dataclasses/numpy containers to plain python for serialization."""
    if is_dataclass(value) and not isinstance(value, type):
        return {k: _plain(v) for k, v in asdict(value).items()}
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def _emit(value, out: list[str], indent: int) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        items = list(value.items())
        for i, (k, v) in enumerate(items):
            out.append(f'{pad}  {json.dumps(str(k))}: ')
            _emit(v, out, indent + 1)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(value):
            _emit(v, out, indent)
            if i < len(value) - 1:
                out.append(", ")
        out.append("]")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif value is None:
        out.append("null")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        if math.isinf(value):
            out.append("Infinity" if value > 0 else "-Infinity")
        elif math.isnan(value):
            out.append("NaN")
        else:
            out.append(f"{value:.17g}")
    elif isinstance(value, str):
        out.append(json.dumps(value))
    else:
        raise DataError(f"cannot serialize {type(value).__name__} into a report")


def report_to_text(report: ExperimentReport) -> str:
    """Deterministic structured-text form: JSON with %.17g floats, Infinity
    tokens for sentinels, and no timestamps — identical runs give identical
    bytes."""
    doc = {
        "schema_version": report.schema_version,
        "version": report.version,
        "config": _plain(report.config),
        "master_seed": int(report.master_seed),
        "payload": _plain(report.payload),
    }
    out: list[str] = []
    _emit(doc, out, 0)
    return "".join(out) + "\n"


def make_report(config: dict, master_seed: int, payload: dict) -> ExperimentReport:
    return ExperimentReport(
        schema_version=SCHEMA_VERSION,
        version=__version__,
        config=_plain(config),
        master_seed=int(master_seed),
        payload=_plain(payload),
    )


def write_report(report: ExperimentReport, path) -> None:
    """Serialize to ``path``; the parent directory must already exist."""
    parent = os.path.dirname(os.path.abspath(os.fspath(path)))
    if not os.path.isdir(parent):
        raise OSError(f"cannot write report {path!r}: directory {parent!r} does not exist")
    try:
        with open(path, "w") as fh:
            fh.write(report_to_text(report))
    except OSError as exc:
        raise OSError(f"cannot write report {path!r}: {exc}") from exc


def read_report(path) -> ExperimentReport:
    """Read back a report; round-trips bit-exactly through report_to_text."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read report {path!r}: {exc}") from exc
    for key in ("schema_version", "version", "config", "master_seed", "payload"):
        if key not in doc:
            raise DataError(f"report {path!r} is missing field {key!r}")
    return ExperimentReport(
        schema_version=doc["schema_version"],
        version=doc["version"],
        config=doc["config"],
        master_seed=doc["master_seed"],
        payload=doc["payload"],
    )


# ---------------------------------------------------------------------------
# delimited exports
# ---------------------------------------------------------------------------

SWEEP_CSV_HEADER = "n,mean_norm,p_hat,ci_low,ci_high,trials"
TAILS_CSV_HEADER = "A,p_hat,ci_low,ci_high,hits,trials"


def _g(x: float) -> str:
    return f"{float(x):.17g}"


def sweep_csv_text(rows: list[dict]) -> str:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        t: TailEstimate = r["tail"]
        lines.append(
            f'{r["n"]},{_g(r["mean_norm"])},{_g(t.p_hat)},{_g(t.ci_low)},'
            f"{_g(t.ci_high)},{t.trials}"
        )
    return "\n".join(lines) + "\n"


def tails_csv_text(estimates: list[TailEstimate]) -> str:
    lines = [TAILS_CSV_HEADER]
    for e in estimates:
        lines.append(
            f"{_g(e.A)},{_g(e.p_hat)},{_g(e.ci_low)},{_g(e.ci_high)},"
            f"{e.hits},{e.trials}"
        )
    return "\n".join(lines) + "\n"


def write_text(text: str, path) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc}") from exc
