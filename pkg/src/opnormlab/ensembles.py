"""Random matrix ensembles with reproducible, counter-based seeding.

Three families are provided:

* ``IidEntries(dist)`` — every entry an independent draw from a scalar law;
* ``IndependentRows(base, mixer)`` — rows drawn independently, with entries
  *within* a row made dependent by a mixing step (orthogonal rotation or a
  shared common factor);
* ``AllOnes`` — the deterministic all-ones control matrix, whose operator
  norm is exactly n.

Scalar laws are all centered and symmetric.  Every law except ``StudentT``
admits explicit tail constants (B, b) with P(|x| > t) <= B exp(-b t^2),
available through :func:`tail_params_of`.  ``StudentT`` is the deliberate
heavy-tailed control for the diagnostics battery.

Seeding: :func:`derive_trial_seed` maps (master_seed, trial_index) to a
64-bit seed through the SplitMix64 finalizer, which is a bijection on
64-bit integers.  Trials can therefore run in any order, on any number of
threads, and still regenerate identical matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import NotSubGaussianError, ParameterError

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# scalar distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class Rademacher:
    """Uniform on {-1, +1}."""


@dataclass(frozen=True)
class UniformSym:
    half_width: float = 1.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ParameterError(f"half_width must be > 0, got {self.half_width}")


@dataclass(frozen=True)
class TruncGaussian:
    """Gaussian(sigma) conditioned on |x| <= cap.

    Sampled by rejection (redraw until inside the cap), never by clipping,
    so the law has no atoms at +-cap.
    """

    sigma: float = 1.0
    cap: float = 2.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")
        if not self.cap > 0:
            raise ParameterError(f"cap must be > 0, got {self.cap}")


@dataclass(frozen=True)
class StudentT:
    """Student's t; heavy-tailed negative control (not sub-Gaussian)."""

    dof: float = 3.0

    def __post_init__(self):
        if not self.dof > 0:
            raise ParameterError(f"dof must be > 0, got {self.dof}")


ScalarDist = Union[Gaussian, Rademacher, UniformSym, TruncGaussian, StudentT]


@dataclass(frozen=True)
class SubGaussianParams:
    """Tail constants: P(|x| > t) <= B exp(-b t^2); sigma is the variance
    proxy of the 2 exp(-t^2 / 2 sigma^2) form when one is available."""

    B: float
    b: float
    sigma: float | None = None


def tail_params_of(dist: ScalarDist) -> SubGaussianParams:
    """Explicit (B, b) for the sub-Gaussian laws.

    Gaussian(sigma) uses the standard bound (B=2, b=1/(2 sigma^2)).  The
    bounded laws use the support rule (B=e, b=1/c^2) for support [-c, c]:
    the survival is 0 for t >= c, and e*exp(-t^2/c^2) >= 1 for t < c.
    """
    if isinstance(dist, Gaussian):
        return SubGaussianParams(B=2.0, b=1.0 / (2.0 * dist.sigma**2), sigma=dist.sigma)
    if isinstance(dist, Rademacher):
        return SubGaussianParams(B=math.e, b=1.0, sigma=1.0)
    if isinstance(dist, UniformSym):
        h = dist.half_width
        return SubGaussianParams(B=math.e, b=1.0 / h**2, sigma=h)
    if isinstance(dist, TruncGaussian):
        # Conditioning on |x| <= cap inflates the Gaussian prefactor past 2,
        # so no honest variance proxy is reported for this law.
        return SubGaussianParams(B=math.e, b=1.0 / dist.cap**2, sigma=None)
    if isinstance(dist, StudentT):
        raise NotSubGaussianError(
            f"{type(dist).__name__} has polynomial tails; no (B, b) with "
            f"P(|x|>t) <= B exp(-b t^2) exists"
        )
    raise ParameterError(f"unknown distribution {dist!r}")


# ---------------------------------------------------------------------------
# row mixers and ensemble specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Identity:
    """No mixing: rows keep iid entries."""


@dataclass(frozen=True)
class FixedRotation:
    """Apply one fixed orthogonal matrix to every iid row draw.

    Rotation preserves the row L2 norm exactly, so the row-norm law is
    unchanged while entries within a row become dependent.
    """

    seed: int = 0


@dataclass(frozen=True)
class CommonFactor:
    """entry_j = sqrt(1-load) * z_j + sqrt(load) * w with one shared w per row.

    Every pair of entries in a row has correlation ``load``; rows stay
    independent.  Note the shared factor is a rank-one O(n) component of the
    matrix: at fixed load > 0 the operator norm grows like sqrt(load) * n,
    not like sqrt(n).
    """

    load: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.load < 1.0:
            raise ParameterError(f"load must be in [0, 1), got {self.load}")


RowMixer = Union[Identity, FixedRotation, CommonFactor]


@dataclass(frozen=True)
class IidEntries:
    dist: ScalarDist


@dataclass(frozen=True)
class IndependentRows:
    base: ScalarDist
    mixer: RowMixer


@dataclass(frozen=True)
class AllOnes:
    """Deterministic control: every entry exactly 1.0."""


EnsembleSpec = Union[IidEntries, IndependentRows, AllOnes]


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_trial_seed(master_seed: int, trial_index: int) -> int:
    """Counter-based per-trial seed; injective in trial_index on [0, 2^64).

    The SplitMix64 finalizer is bijective on 64-bit integers, so distinct
    trial indices can never collide under one master seed.  The result
    depends only on the two arguments — never on call order or threading.
    """
    if trial_index < 0:
        raise ParameterError(f"trial_index must be >= 0, got {trial_index}")
    return _splitmix64(_splitmix64(master_seed & _MASK64) ^ (trial_index & _MASK64))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _draw(dist: ScalarDist, rng: np.random.Generator, shape) -> np.ndarray:
    if isinstance(dist, Gaussian):
        return dist.sigma * rng.standard_normal(shape)
    if isinstance(dist, Rademacher):
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    if isinstance(dist, UniformSym):
        return rng.uniform(-dist.half_width, dist.half_width, size=shape)
    if isinstance(dist, TruncGaussian):
        x = dist.sigma * rng.standard_normal(shape)
        bad = np.abs(x) > dist.cap
        while bad.any():
            x[bad] = dist.sigma * rng.standard_normal(int(bad.sum()))
            bad = np.abs(x) > dist.cap
        return x
    if isinstance(dist, StudentT):
        return rng.standard_t(dist.dof, size=shape)
    raise ParameterError(f"unknown distribution {dist!r}")


def sample_values(dist: ScalarDist, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` iid scalars, deterministic in (dist, count, seed)."""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    return _draw(dist, np.random.default_rng(seed), (count,))


@lru_cache(maxsize=64)
def _rotation_matrix(seed: int, n: int) -> np.ndarray:
    """Deterministic orthogonal matrix: QR of a seeded Gaussian with the
    sign of R's diagonal fixed (makes the factorization unique)."""
    g = np.random.default_rng(seed).standard_normal((n, n))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    q.setflags(write=False)
    return q


def sample_matrix(spec: EnsembleSpec, n_rows: int, n_cols: int, seed: int) -> np.ndarray:
    """Generate one matrix; a pure function of its arguments.

    Row i of the result is the row vector R_i: for ``IndependentRows`` the
    rows are independent across i while entries within each row may be
    dependent through the mixer.
    """
    if n_rows < 1 or n_cols < 1:
        raise ParameterError(f"matrix dims must be >= 1, got {n_rows}x{n_cols}")
    if isinstance(spec, AllOnes):
        return np.ones((n_rows, n_cols))
    rng = np.random.default_rng(seed)
    if isinstance(spec, IidEntries):
        return _draw(spec.dist, rng, (n_rows, n_cols))
    if isinstance(spec, IndependentRows):
        z = _draw(spec.base, rng, (n_rows, n_cols))
        mixer = spec.mixer
        if isinstance(mixer, Identity):
            return z
        if isinstance(mixer, FixedRotation):
            return z @ _rotation_matrix(mixer.seed, n_cols).T
        if isinstance(mixer, CommonFactor):
            w = _draw(spec.base, rng, (n_rows, 1))
            return math.sqrt(1.0 - mixer.load) * z + math.sqrt(mixer.load) * w
        raise ParameterError(f"unknown mixer {mixer!r}")
    raise ParameterError(f"unknown ensemble {spec!r}")


# ---------------------------------------------------------------------------
# config (de)serialization — key names are the external contract used by the CLI
# ---------------------------------------------------------------------------

_DIST_TAGS = {
    Gaussian: "gaussian",
    Rademacher: "rademacher",
    UniformSym: "uniform",
    TruncGaussian: "trunc_gaussian",
    StudentT: "student_t",
}


def _dist_to_config(dist: ScalarDist) -> dict:
    cfg: dict = {"dist": _DIST_TAGS[type(dist)]}
    if isinstance(dist, Gaussian):
        cfg["sigma"] = dist.sigma
    elif isinstance(dist, UniformSym):
        cfg["half_width"] = dist.half_width
    elif isinstance(dist, TruncGaussian):
        cfg["sigma"] = dist.sigma
        cfg["cap"] = dist.cap
    elif isinstance(dist, StudentT):
        cfg["dof"] = dist.dof
    return cfg


def spec_to_config(spec: EnsembleSpec) -> dict:
    """Flatten an ensemble spec to the key-value config fields."""
    if isinstance(spec, AllOnes):
        return {"ensemble": "ones"}
    if isinstance(spec, IidEntries):
        return {"ensemble": "iid", **_dist_to_config(spec.dist)}
    if isinstance(spec, IndependentRows):
        cfg = {"ensemble": "rows", **_dist_to_config(spec.base)}
        m = spec.mixer
        if isinstance(m, Identity):
            cfg["mixer"] = "identity"
        elif isinstance(m, FixedRotation):
            cfg["mixer"] = "rotation"
            cfg["mixer_seed"] = m.seed
        elif isinstance(m, CommonFactor):
            cfg["mixer"] = "common"
            cfg["load"] = m.load
        return cfg
    raise ParameterError(f"unknown ensemble {spec!r}")


def _num(cfg: dict, key: str, default: float) -> float:
    v = cfg.get(key, default)
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ParameterError(f"config field {key!r} must be a number, got {v!r}")


def dist_from_config(cfg: dict) -> ScalarDist:
    tag = str(cfg.get("dist", "gaussian"))
    if tag == "gaussian":
        return Gaussian(sigma=_num(cfg, "sigma", 1.0))
    if tag == "rademacher":
        return Rademacher()
    if tag == "uniform":
        return UniformSym(half_width=_num(cfg, "half_width", 1.0))
    if tag == "trunc_gaussian":
        return TruncGaussian(sigma=_num(cfg, "sigma", 1.0), cap=_num(cfg, "cap", 2.0))
    if tag == "student_t":
        return StudentT(dof=_num(cfg, "dof", 3.0))
    raise ParameterError(
        f"config field 'dist' must be one of "
        f"{sorted(_DIST_TAGS.values())}, got {tag!r}"
    )


def spec_from_config(cfg: dict) -> EnsembleSpec:
    """Inverse of :func:`spec_to_config`; validates ranges with field names."""
    kind = str(cfg.get("ensemble", "iid"))
    if kind == "ones":
        return AllOnes()
    if kind == "iid":
        return IidEntries(dist_from_config(cfg))
    if kind == "rows":
        base = dist_from_config(cfg)
        mtag = str(cfg.get("mixer", "identity"))
        if mtag == "identity":
            return IndependentRows(base, Identity())
        if mtag == "rotation":
            return IndependentRows(base, FixedRotation(seed=int(_num(cfg, "mixer_seed", 0))))
        if mtag == "common":
            return IndependentRows(base, CommonFactor(load=_num(cfg, "load", 0.5)))
        raise ParameterError(
            f"config field 'mixer' must be one of ['identity', 'rotation', 'common'], got {mtag!r}"
        )
    raise ParameterError(
        f"config field 'ensemble' must be one of ['iid', 'rows', 'ones'], got {kind!r}"
    )
