import math

import numpy as np
import pytest

from opnormlab import epsnet
from opnormlab.epsnet import (
    EpsNet,
    audit_coverage_check,
    build_net,
    cardinality_bounds,
    load_net,
    net_lower_bound,
    net_upper_bound,
    save_net,
)
from opnormlab.errors import DataError, ParameterError, ShapeError
from opnormlab.specnorm import opnorm_exact


def test_packing_formula_values():
    # ((1 + e/2)^n - (1 - e/2)^n) / (e/2)^n at hand-checkable points
    assert cardinality_bounds(2, 0.5).packing_ratio == pytest.approx(16.0, rel=1e-12)
    b = cardinality_bounds(2, 0.999999)
    assert b.packing_ratio == pytest.approx(8.0, rel=1e-4)
    assert cardinality_bounds(3, 0.5).packing_ratio == pytest.approx(98.0, rel=1e-12)


def test_bounds_collapse_to_one_number():
    b = cardinality_bounds(4, 0.3)
    assert b.lower == b.upper == b.packing_ratio


def test_packing_formula_survives_huge_dimension():
    assert math.isinf(cardinality_bounds(2000, 0.3).packing_ratio)


def test_bounds_domain():
    with pytest.raises(ParameterError):
        cardinality_bounds(1, 0.5)
    with pytest.raises(ParameterError):
        cardinality_bounds(3, 0.0)
    with pytest.raises(ParameterError):
        cardinality_bounds(3, 1.0)


def test_build_domain():
    with pytest.raises(ParameterError):
        build_net(1, 0.5, 0, 100)
    with pytest.raises(ParameterError):
        build_net(2, 0.0, 0, 100)
    with pytest.raises(ParameterError):
        build_net(2, 2.0, 0, 100)
    with pytest.raises(ParameterError):
        build_net(2, 0.5, 0, 0)


def test_nearly_antipodal_eps_gives_one_or_two_points():
    # eps just under the diameter: at most an antipodal pair fits
    for seed in range(5):
        net = build_net(2, 1.99, seed, 2000)
        assert net.count in (1, 2)


def test_circle_count_window():
    for seed in range(10):
        net = build_net(2, 0.5, seed, 10_000)
        assert 7 <= net.count <= 12, (seed, net.count)


def test_separation_and_unit_norm_invariants():
    net = build_net(3, 0.5, 4, 5_000)
    norms = np.linalg.norm(net.points, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    gram = net.points @ net.points.T
    np.fill_diagonal(gram, -1.0)
    assert gram.max() <= 1.0 - 0.5**2 / 2.0 + 1e-12


def test_build_is_deterministic():
    a = build_net(3, 0.4, 12, 3_000)
    b = build_net(3, 0.4, 12, 3_000)
    assert np.array_equal(a.points, b.points)
    assert a.count == b.count


def test_chunked_build_equals_sequential_reference():
    """The production builder vectorizes proposals in chunks; replay the same
    RNG stream one proposal at a time and demand the identical net."""
    dim, eps, seed, sat = 3, 0.6, 9, 500
    net = build_net(dim, eps, seed, sat)

    rng = np.random.default_rng(seed)
    dot_limit = 1.0 - eps * eps / 2.0
    pts = []
    rejections = 0
    while rejections < sat:
        v = rng.standard_normal(dim)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            rejections += 1
            continue
        v = v / norm
        if pts and float((np.asarray(pts) @ v).max()) > dot_limit:
            rejections += 1
            continue
        pts.append(v)
        rejections = 0

    ref = np.asarray(pts)
    assert net.count == len(ref)
    assert np.array_equal(net.points, ref)


def test_save_load_round_trip(tmp_path):
    net = build_net(4, 0.3, 3, 2_000)
    path = tmp_path / "net.txt"
    save_net(net, path)
    back = load_net(path)
    assert back.dim == net.dim
    assert back.eps == net.eps
    assert back.seed == net.seed
    assert back.saturation_T == net.saturation_T
    assert np.array_equal(back.points, net.points)


def test_load_rejects_malformed(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("3 0.5 1\n")
    with pytest.raises(DataError):
        load_net(p)
    p.write_text("2 0.5 1 100 3\n1 0\n0 1\n")  # promises 3 points, has 2
    with pytest.raises(DataError):
        load_net(p)
    with pytest.raises(OSError):
        load_net(tmp_path / "missing.txt")


def test_coverage_of_saturated_net():
    net = build_net(3, 0.5, 6, 10_000)
    cov = audit_coverage_check(net, 10_000, 999)
    assert cov >= 0.999
    assert net.audit_coverage == cov


def test_single_point_net_covers_little():
    e1 = np.zeros((1, 3))
    e1[0, 0] = 1.0
    net = EpsNet(dim=3, eps=0.5, points=e1, seed=0, saturation_T=1)
    assert audit_coverage_check(net, 20_000, 5) < 0.1


def test_coverage_monotone_in_saturation():
    # same seed: the longer run extends the shorter one's net
    small = build_net(3, 0.5, 8, 50)
    big = build_net(3, 0.5, 8, 5_000)
    assert big.count >= small.count
    assert np.array_equal(big.points[: small.count], small.points)
    cov_small = audit_coverage_check(small, 20_000, 77)
    cov_big = audit_coverage_check(big, 20_000, 77)
    assert cov_big >= cov_small


def test_identity_sandwich_is_exact():
    net = build_net(3, 0.5, 2, 5_000)
    lower = net_lower_bound(np.eye(3), net)
    upper = net_upper_bound(np.eye(3), net)
    assert lower == pytest.approx(1.0, rel=1e-12)
    assert upper == pytest.approx(2.0, rel=1e-12)  # 1 / (1 - eps)


def test_random_matrix_sandwich():
    rng = np.random.default_rng(31)
    net = build_net(4, 0.35, 14, 8_000)
    for _ in range(10):
        m = rng.standard_normal((4, 4))
        exact = opnorm_exact(m)
        lower = net_lower_bound(m, net)
        upper = net_upper_bound(m, net)
        assert lower <= exact * (1 + 1e-12)
        assert exact <= 1.05 * upper


def test_all_ones_lower_bound_tightens_with_eps():
    m = np.ones((3, 3))
    lowers = [net_lower_bound(m, build_net(3, e, 1, 10_000)) for e in (1.0, 0.5, 0.25)]
    assert lowers[0] <= lowers[1] + 1e-12
    assert lowers[1] <= lowers[2] + 1e-12
    assert lowers[2] >= 2.9  # sup over the sphere is 3, attained at the diagonal
    assert all(lo <= 3.0 + 1e-12 for lo in lowers)


def test_upper_bound_needs_eps_below_one():
    net = build_net(2, 1.5, 0, 1_000)
    with pytest.raises(ParameterError):
        net_upper_bound(np.eye(2), net)


def test_dimension_mismatch():
    net = build_net(3, 0.5, 0, 1_000)
    with pytest.raises(ShapeError):
        net_lower_bound(np.ones((4, 4)), net)


def test_audit_probe_validation():
    net = build_net(2, 0.5, 0, 1_000)
    with pytest.raises(ParameterError):
        audit_coverage_check(net, 0, 1)
