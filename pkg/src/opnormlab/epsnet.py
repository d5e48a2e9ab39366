"""Maximal epsilon-separated nets on the unit sphere, with packing bounds.

A net here is a set of unit vectors with pairwise Euclidean distance >= eps,
grown greedily by random sequential insertion until ``saturation_T``
consecutive proposals land within eps of the existing net.  True maximality
is not decidable by finite sampling, so instead of assuming it the net
carries a measured coverage: :func:`audit_coverage_check` reports the
fraction of random sphere points within eps of the net.

For unit vectors the distance test is a dot-product test:

    ||u - v||^2 = 2 - 2 <u, v>   =>   ||u - v|| >= eps  <=>  <u, v> <= 1 - eps^2/2

and the same threshold, reversed, decides coverage.

:func:`cardinality_bounds` evaluates the volume-packing ratio

    ((1 + eps/2)^dim - (1 - eps/2)^dim) / (eps/2)^dim

in log-space.  Built nets must come in at or below this ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError, ShapeError

_CHUNK = 2048


@dataclass
class EpsNet:
    """A built net: ``points`` has shape (count, dim), rows are unit vectors
    in insertion order.  ``audit_coverage`` is filled by the coverage audit."""

    dim: int
    eps: float
    points: np.ndarray
    seed: int
    saturation_T: int
    audit_coverage: float | None = field(default=None)

    @property
    def count(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class CardinalityBounds:
    """The proof-exact packing ratio, exposed as both the lower and upper
    envelope value.

    The coarse statements around this bound are often quoted with exponent
    dim - 1 (a constant over eps^(dim-1)) while the exact volume ratio has
    exponent dim; we report the exact ratio and leave the exponent
    bookkeeping to the reader rather than silently choosing one form.
    """

    lower: float
    upper: float
    packing_ratio: float


def _check_dim_eps(dim: int, eps: float) -> None:
    if dim < 2:
        raise ParameterError(f"dim must be >= 2, got {dim}")
    if not 0.0 < eps < 2.0:
        raise ParameterError(f"eps must be in (0, 2) on the sphere, got {eps}")


def cardinality_bounds(dim: int, eps: float) -> CardinalityBounds:
    """Volume-packing bound on the cardinality of an eps-separated sphere set.

    Computed in log-space so large ``dim`` cannot overflow intermediate
    powers; the final ratio may still be inf as a float, which is reported
    as such.
    """
    if dim < 2:
        raise ParameterError(f"dim must be >= 2, got {dim}")
    if not 0.0 < eps < 1.0:
        raise ParameterError(f"eps must be in (0, 1), got {eps}")
    log_hi = dim * math.log1p(eps / 2.0)
    log_lo = dim * math.log1p(-eps / 2.0)
    # log((1+e/2)^n - (1-e/2)^n) without forming either power
    log_diff = log_hi + math.log1p(-math.exp(log_lo - log_hi))
    log_ratio = log_diff - dim * math.log(eps / 2.0)
    try:
        ratio = math.exp(log_ratio)
    except OverflowError:
        ratio = math.inf
    return CardinalityBounds(lower=ratio, upper=ratio, packing_ratio=ratio)


def build_net(dim: int, eps: float, seed: int, saturation_T: int) -> EpsNet:
    """Greedy random sequential insertion of unit vectors.

    Proposals are normalized Gaussian draws.  A proposal is accepted iff its
    distance to every accepted point is >= eps; construction stops after
    ``saturation_T`` consecutive rejections.  The separation invariant holds
    exactly by construction; maximality is approximate and quantified by
    :func:`audit_coverage_check`.

    Internally proposals are drawn in fixed-size chunks with a vectorized
    dot-product prefilter, but acceptance, the consecutive-rejection counter
    and the stopping point are exactly what a one-at-a-time loop would
    produce, so the net is deterministic in (dim, eps, seed, saturation_T).
    """
    _check_dim_eps(dim, eps)
    if saturation_T < 1:
        raise ParameterError(f"saturation_T must be >= 1, got {saturation_T}")

    rng = np.random.default_rng(seed)
    dot_limit = 1.0 - eps * eps / 2.0
    blocks: list[np.ndarray] = []
    count = 0
    rejections = 0
    saturated = False

    while not saturated:
        cand = rng.standard_normal((_CHUNK, dim))
        norms = np.linalg.norm(cand, axis=1)
        ok = norms > 0.0  # zero-norm draw has probability 0; treat as rejection
        cand[ok] = cand[ok] / norms[ok, None]
        if count:
            all_pts = np.concatenate(blocks, axis=0)
            ok &= (cand @ all_pts.T).max(axis=1) <= dot_limit
        passing = np.nonzero(ok)[0]

        accepted_here: list[np.ndarray] = []
        cursor = 0
        for i in passing:
            gap = int(i) - cursor  # candidates in between were rejected
            if rejections + gap >= saturation_T:
                saturated = True
                break
            rejections += gap
            cursor = int(i) + 1
            v = cand[i]
            if accepted_here and max(v @ np.asarray(accepted_here).T) > dot_limit:
                rejections += 1
                if rejections >= saturation_T:
                    saturated = True
                    break
                continue
            accepted_here.append(v)
            rejections = 0
        else:
            # no mid-chunk stop: the trailing candidates were all rejections
            rejections += _CHUNK - cursor
            if rejections >= saturation_T:
                saturated = True

        if accepted_here:
            blocks.append(np.asarray(accepted_here))
            count += len(accepted_here)

    points = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, dim))
    return EpsNet(dim=dim, eps=eps, points=points, seed=seed,
                  saturation_T=saturation_T)


def audit_coverage_check(net: EpsNet, probes: int, seed: int) -> float:
    """Fraction of random sphere points within eps of the net.

    A truly maximal net scores 1.0; the greedy construction typically lands
    within O(1/saturation_T) of it.  The result is also stored on
    ``net.audit_coverage``.
    """
    if probes < 1:
        raise ParameterError(f"probes must be >= 1, got {probes}")
    rng = np.random.default_rng(seed)
    dot_limit = 1.0 - net.eps * net.eps / 2.0
    if net.count == 0:
        net.audit_coverage = 0.0
        return 0.0
    covered = 0
    remaining = probes
    while remaining > 0:
        k = min(remaining, 4096)
        q = rng.standard_normal((k, net.dim))
        q /= np.linalg.norm(q, axis=1)[:, None]
        covered += int(((q @ net.points.T).max(axis=1) >= dot_limit).sum())
        remaining -= k
    net.audit_coverage = covered / probes
    return net.audit_coverage


# ---------------------------------------------------------------------------
# norm certification through a net
# ---------------------------------------------------------------------------

def _image_norms(m, net: EpsNet) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if m.shape[1] != net.dim:
        raise ShapeError(
            f"matrix has {m.shape[1]} columns but net lives on the sphere in "
            f"dimension {net.dim}"
        )
    if net.count == 0:
        raise DataError("net has no points")
    return np.linalg.norm(net.points @ m.T, axis=1)


def net_lower_bound(m, net: EpsNet) -> float:
    """max over net points v of ||M v||.

    Unconditionally <= ||M||_op: the net is a subset of the sphere, so this
    is a restricted supremum.
    """
    return float(_image_norms(m, net).max())


def net_upper_bound(m, net: EpsNet) -> float:
    """max_v ||M v|| / (1 - eps); an upper bound on ||M||_op for a maximal net.

    For an approximately maximal net the guarantee weakens by the coverage
    defect: a unit vector in an uncovered region can exceed the certified
    value.  Check ``net.audit_coverage`` before leaning on this bound.
    """
    if not net.eps < 1.0:
        raise ParameterError(
            f"upper bound needs eps < 1 (got eps={net.eps}): the 1/(1-eps) "
            f"amplification is void past 1"
        )
    return float(_image_norms(m, net).max() / (1.0 - net.eps))


# ---------------------------------------------------------------------------
# flat text serialization
# ---------------------------------------------------------------------------

def save_net(net: EpsNet, path) -> None:
    """Write the net: header ``dim eps seed saturation_T count`` then one
    point per line, space-separated, 17 significant digits."""
    lines = [
        f"{net.dim} {net.eps:.17g} {net.seed} {net.saturation_T} {net.count}"
    ]
    for row in net.points:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write net file {path!r}: {exc}") from exc


def load_net(path) -> EpsNet:
    """Read a net written by :func:`save_net` (17g floats round-trip exactly)."""
    try:
        with open(path) as fh:
            lines = [ln for ln in (l.strip() for l in fh) if ln]
    except OSError as exc:
        raise OSError(f"cannot read net file {path!r}: {exc}") from exc
    if not lines:
        raise DataError(f"net file {path!r} is empty")
    head = lines[0].split()
    if len(head) != 5:
        raise DataError(
            f"net file {path!r}: header must be 'dim eps seed saturation_T count'"
        )
    dim, seed, sat, count = int(head[0]), int(head[2]), int(head[3]), int(head[4])
    eps = float(head[1])
    body = lines[1:]
    if len(body) != count:
        raise DataError(
            f"net file {path!r}: header promises {count} points, found {len(body)}"
        )
    if count:
        points = np.array([[float(x) for x in ln.split()] for ln in body])
        if points.shape != (count, dim):
            raise DataError(
                f"net file {path!r}: expected points of dimension {dim}"
            )
    else:
        points = np.zeros((0, dim))
    return EpsNet(dim=dim, eps=eps, points=points, seed=seed, saturation_T=sat)
