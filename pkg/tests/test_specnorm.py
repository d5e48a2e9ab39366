import itertools
import math

import numpy as np
import pytest

from opnormlab import specnorm
from opnormlab.errors import ConvergenceError, DataError, ParameterError, ScaleError, ShapeError
from opnormlab.specnorm import (
    NormKind,
    mat_vec_image_norm,
    opnorm_closed,
    opnorm_exact,
    opnorm_power,
)


def test_all_ones_is_n_everywhere():
    for n in (1, 2, 5, 10):
        m = np.ones((n, n))
        assert opnorm_exact(m) == pytest.approx(n, abs=1e-12)
        assert opnorm_power(m).value == pytest.approx(n, abs=1e-12)
        assert opnorm_closed(m, NormKind.ONE) == n
        assert opnorm_closed(m, NormKind.INF) == n


def test_all_ones_power_converges_in_one_step():
    # the all-ones start vector is already the top singular direction
    res = opnorm_power(np.ones((10, 10)))
    assert res.value == pytest.approx(10.0, abs=1e-12)
    assert res.iterations == 1
    assert res.residual == 0.0


def test_fixed_small_matrices():
    z = np.zeros((3, 4))
    assert opnorm_exact(z) == 0.0
    assert opnorm_power(z).value == 0.0
    assert opnorm_closed(z, NormKind.ONE) == 0.0
    assert opnorm_closed(z, NormKind.INF) == 0.0
    assert opnorm_exact(np.eye(5)) == pytest.approx(1.0, abs=1e-12)
    assert opnorm_exact(np.array([[1.0, 1.0], [1.0, 1.0]])) == pytest.approx(2.0, abs=1e-12)
    assert opnorm_exact(np.array([[0.0, 1.0], [0.0, 0.0]])) == pytest.approx(1.0, abs=1e-12)
    m = np.array([[1.0, -2.0], [3.0, 4.0]])
    assert opnorm_closed(m, NormKind.ONE) == 6.0
    assert opnorm_closed(m, NormKind.INF) == 7.0


def test_spectral_matches_svd_oracle():
    rng = np.random.default_rng(77)
    for shape in [(3, 7), (7, 3), (20, 5), (16, 16)]:
        m = rng.standard_normal(shape)
        ref = float(np.linalg.svd(m, compute_uv=False)[0])
        assert opnorm_exact(m) == pytest.approx(ref, rel=1e-10)


def test_inf_norm_matches_sign_vector_enumeration():
    """max over u in {-1,1}^n of |Mu|_inf is the induced inf->inf norm."""
    rng = np.random.default_rng(5)
    m = rng.standard_normal((8, 8))
    best = max(
        np.abs(m @ np.array(signs)).max()
        for signs in itertools.product((-1.0, 1.0), repeat=8)
    )
    assert opnorm_closed(m, NormKind.INF) == pytest.approx(best, rel=1e-12)


def test_scale_equivariance():
    rng = np.random.default_rng(8)
    m = rng.standard_normal((9, 9))
    base = {kind: opnorm_closed(m, kind) for kind in (NormKind.ONE, NormKind.INF)}
    base_s = opnorm_exact(m)
    for c in (-3.0, 0.5, 7.0):
        assert opnorm_exact(c * m) == pytest.approx(abs(c) * base_s, rel=1e-12)
        for kind, v in base.items():
            assert opnorm_closed(c * m, kind) == pytest.approx(abs(c) * v, rel=1e-12)


def test_transpose_duality():
    rng = np.random.default_rng(9)
    m = rng.standard_normal((6, 11))
    # spectral norm is transpose-invariant; one- and inf-norms swap
    assert opnorm_exact(m) == opnorm_exact(m.T)
    assert opnorm_closed(m, NormKind.ONE) == opnorm_closed(m.T, NormKind.INF)
    assert opnorm_closed(m, NormKind.INF) == opnorm_closed(m.T, NormKind.ONE)


def test_submultiplicative_on_random_pairs():
    rng = np.random.default_rng(10)
    for _ in range(1000):
        a = rng.standard_normal((5, 5))
        b = rng.standard_normal((5, 5))
        assert opnorm_exact(a @ b) <= opnorm_exact(a) * opnorm_exact(b) * (1 + 1e-12)
        for kind in (NormKind.ONE, NormKind.INF):
            na, nb = opnorm_closed(a, kind), opnorm_closed(b, kind)
            assert opnorm_closed(a @ b, kind) <= na * nb * (1 + 1e-12)


def test_bounded_entries_uniform_ceiling():
    """|entries| <= K forces operator norm <= K n, attained by all-ones."""
    rng = np.random.default_rng(12)
    for _ in range(50):
        n = int(rng.integers(2, 20))
        k = float(rng.uniform(0.5, 3.0))
        m = rng.uniform(-k, k, size=(n, n))
        assert opnorm_exact(m) <= k * n * (1 + 1e-12)
    assert opnorm_exact(2.0 * np.ones((12, 12))) == pytest.approx(24.0, abs=1e-9)


def test_power_matches_exact_on_random_matrices():
    rng = np.random.default_rng(14)
    for _ in range(20):
        m = rng.standard_normal((20, 20))
        exact = opnorm_exact(m)
        power = opnorm_power(m, rtol=1e-12, max_iter=100_000).value
        assert power == pytest.approx(exact, rel=1e-8)


def test_power_on_known_spectrum():
    assert opnorm_power(np.diag([3.0, 1.0]), rtol=1e-12).value == pytest.approx(3.0, abs=3e-8)
    # a repeated top value is fine for power iteration (no gap needed at the top)
    assert opnorm_power(np.diag([3.0, 3.0, 1.0]), rtol=1e-12).value == pytest.approx(3.0, abs=3e-8)


def test_power_convergence_error_carries_estimate():
    m = np.diag([1.0, 0.99999])
    with pytest.raises(ConvergenceError) as err:
        opnorm_power(m, rtol=1e-14, max_iter=2)
    assert err.value.last_estimate is not None
    assert 0.9 < err.value.last_estimate < 1.1


def test_exact_refuses_oversized_input():
    # the guard is on the larger side, so a 513x512 matrix is over it too
    with pytest.raises(ScaleError):
        opnorm_exact(np.zeros((513, 513)))
    with pytest.raises(ScaleError):
        opnorm_exact(np.zeros((513, 512)))
    # the boundary itself is allowed
    assert opnorm_exact(np.zeros((512, 512))) == 0.0


def test_input_validation():
    with pytest.raises(DataError):
        opnorm_exact(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(DataError):
        opnorm_power(np.array([[np.inf, 0.0], [0.0, 1.0]]))
    with pytest.raises(DataError):
        opnorm_exact(np.zeros((0, 3)))
    with pytest.raises(DataError):
        opnorm_exact(np.ones(4))
    with pytest.raises(ParameterError):
        opnorm_closed(np.eye(2), NormKind.SPECTRAL)


def test_power_parameter_validation():
    with pytest.raises(ParameterError):
        opnorm_power(np.eye(2), rtol=0.0)
    with pytest.raises(ParameterError):
        opnorm_power(np.eye(2), max_iter=0)


def test_mat_vec_image_norm():
    m = np.ones((10, 10))
    e1 = np.zeros(10)
    e1[0] = 1.0
    assert mat_vec_image_norm(m, e1) == pytest.approx(math.sqrt(10), rel=1e-12)
    u = np.full(10, 1.0 / math.sqrt(10))
    assert mat_vec_image_norm(m, u) == pytest.approx(10.0, rel=1e-12)
    with pytest.raises(ParameterError):
        mat_vec_image_norm(m, 2 * e1)  # not a unit vector
    with pytest.raises(ShapeError):
        mat_vec_image_norm(m, np.ones(3) / math.sqrt(3))


def test_image_norm_never_exceeds_operator_norm():
    rng = np.random.default_rng(15)
    m = rng.standard_normal((12, 12))
    top = opnorm_exact(m)
    for _ in range(100):
        u = rng.standard_normal(12)
        u /= np.linalg.norm(u)
        assert mat_vec_image_norm(m, u) <= top * (1 + 1e-10)
