import math

import numpy as np
import pytest

from coordmed.core import NormOrder, Point, Profile, distance, social_cost
from coordmed.optimal import (
    SolverConfig,
    cost_gradient,
    geometric_median,
    grid_oracle,
    min_enclosing_circle,
    optimal_location,
)

WORST3 = [(2, 0), (-2, 0), (0, 1)]
FAST_ORACLE = SolverConfig(grid_resolution=201)


def gm_certificate(y, pts):
    """Residual of the subgradient condition with unit-vector slack at coincident points."""
    pts = np.asarray(pts, dtype=float)
    d = pts - np.asarray(y)
    r = np.hypot(d[:, 0], d[:, 1])
    eps = 1e-12 * max(1.0, np.abs(pts).max())
    far = r > eps
    resultant = (d[far] / r[far, None]).sum(axis=0)
    return max(0.0, float(np.hypot(*resultant)) - int((~far).sum()))


def test_geometric_median_examples():
    res = geometric_median(WORST3)
    assert res.location == Point(0, 1)
    assert res.certificate == 0
    assert res.cost == pytest.approx(2 * math.sqrt(5) + 1e-16)
    res = geometric_median([(4, -3)] * 3)
    assert res.location == Point(4, -3) and res.certificate == 0
    res = geometric_median([(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)])
    assert res.location.a == pytest.approx(0.5, abs=1e-9)
    assert res.location.b == pytest.approx(math.sqrt(3) / 6, abs=1e-9)
    oracle = grid_oracle([(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)], 1, FAST_ORACLE)
    assert distance(oracle.location, res.location) < 1e-3


def test_optimal_location_examples():
    assert optimal_location(WORST3, 2).location == Point(0, 1 / 3)
    res = optimal_location([(0, 0), (2, 0), (1, 1)], "inf")
    assert res.location == Point(1, 0) and res.cost == 1
    # p = 4, symmetric under quarter turns about (3, 3)
    pts = [(3 + 1, 3 + 0.5), (3 - 0.5, 3 + 1), (3 - 1, 3 - 0.5), (3 + 0.5, 3 - 1)]
    res = optimal_location(pts, 4)
    assert res.converged
    assert res.location.a == pytest.approx(3, abs=1e-8) and res.location.b == pytest.approx(3, abs=1e-8)


def test_mec_oracle_example():
    # oracle value frozen from grid_oracle([(0,0),(2,0),(1,1)], inf): centre (1, 0), radius 1
    res = grid_oracle([(0, 0), (2, 0), (1, 1)], "inf", FAST_ORACLE)
    assert distance(res.location, (1, 0)) < 1e-3
    assert res.cost == pytest.approx(1, abs=1e-3)


def test_grid_oracle_examples(rng):
    assert distance(grid_oracle(WORST3, 1).location, (0, 1)) < 1e-3
    assert grid_oracle([(0, 0), (0, 0), (9, 9)], 1).location == Point(0, 0)
    for _ in range(5):
        pts = rng.uniform(-1, 1, size=(5, 2))
        assert distance(grid_oracle(pts, 2, FAST_ORACLE).location, pts.mean(axis=0)) < 1e-3


def test_grid_oracle_tie_break():
    # two agents: every point of the segment is optimal; the lexicographically smallest wins
    res = grid_oracle([(0, 0), (1, 0)], 1, FAST_ORACLE)
    assert res.location.a == pytest.approx(0, abs=1e-12)


def test_oracle_agreement(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 10))
        pts = rng.uniform(-1, 1, size=(n, 2))
        p = [1, 2, 3, "inf"][int(rng.integers(0, 4))]
        exact = optimal_location(pts, p)
        oracle = grid_oracle(pts, p, SolverConfig(grid_resolution=61))
        assert abs(exact.cost - oracle.cost) <= 1e-3 * (1 + exact.cost)
        assert exact.cost <= oracle.cost + 1e-12 * (1 + exact.cost)


def test_certificates(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 10))
        pts = rng.uniform(-1, 1, size=(n, 2))
        if rng.random() < 0.3:
            pts[: n // 2 + 1] = pts[0]
        res = geometric_median(pts)
        assert res.converged
        assert res.certificate <= 1e-9
        assert gm_certificate(res.location, pts) <= 1e-9


def test_radial_invariance(rng):
    for _ in range(200):
        n = int(rng.choice([3, 5, 7]))
        pts = rng.uniform(-1, 1, size=(n, 2))
        g = np.asarray(geometric_median(pts).location)
        i = int(rng.integers(0, n))
        if np.hypot(*(pts[i] - g)) < 1e-9:
            continue
        for t in (0.3, 1.7):
            moved = pts.copy()
            moved[i] = g + t * (pts[i] - g)
            assert np.hypot(*(np.asarray(geometric_median(moved).location) - g)) <= 1e-6


def test_gradient_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(1000):
        n = int(rng.integers(1, 8))
        pts = rng.uniform(-1, 1, size=(n, 2))
        p = float(rng.choice([1.5, 2.0, 3.0, 4.0, 8.0]))
        y = rng.uniform(-1, 1, size=2)
        f = lambda z: float(sum(np.hypot(*(z - x)) ** p for x in pts))
        fd = np.array([(f(y + h * e) - f(y - h * e)) / (2 * h) for e in np.eye(2)])
        g = cost_gradient(y, pts, p)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))


def test_mec_contains_all(rng):
    for _ in range(500):
        n = int(rng.integers(1, 12))
        pts = rng.uniform(-1, 1, size=(n, 2))
        c, r, support = min_enclosing_circle(pts)
        d = np.hypot(pts[:, 0] - c.a, pts[:, 1] - c.b)
        assert np.all(d <= r + 1e-12)
        if n > 1 and r > 0:
            assert len(support) in (2, 3)
            np.testing.assert_allclose(d[support], r, atol=1e-12)


def test_mec_coincident():
    c, r, _ = min_enclosing_circle([(2, 3)] * 4)
    assert c == Point(2, 3) and r == 0


@pytest.mark.parametrize("p", [1, 1.5, 2, 3, 8, "inf"])
def test_cost_consistency(rng, p):
    pts = rng.uniform(-3, 3, size=(6, 2))
    res = optimal_location(pts, p)
    assert res.cost == pytest.approx(social_cost(res.location, pts, p), rel=1e-12)
    assert set(res.to_dict()) == {"location", "cost", "certificate", "iterations"}


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)


def test_nonconvergence_is_flagged():
    pts = np.array([(0.0, 0.0), (1.0, 0.0), (0.3, 0.9), (0.8, 0.7)])
    res = geometric_median(pts, SolverConfig(max_iterations=1, tolerance=1e-15))
    assert not res.converged
    assert res.cost == pytest.approx(social_cost(res.location, pts, 1))
