"""Optimal facility locations for every norm order, plus a brute-force grid oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import NormLike, NormOrder, Point, ProfileLike, as_profile, social_cost


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-10
    max_iterations: int = 100_000
    grid_resolution: int = 2001

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.grid_resolution < 3:
            raise ValueError("grid_resolution must be at least 3")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class OptimalResult:
    location: Point
    cost: float
    certificate: float
    iterations: int
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "location": [self.location.a, self.location.b],
            "cost": self.cost,
            "certificate": self.certificate,
            "iterations": self.iterations,
        }


def _result(prof, a, b, p, cert, iters, ok) -> OptimalResult:
    loc = Point(float(a), float(b))
    return OptimalResult(loc, social_cost(loc, prof, p), float(cert), int(iters), bool(ok))


def geometric_median(profile: ProfileLike, cfg: SolverConfig = DEFAULT_CONFIG) -> OptimalResult:
    """Minimiser of the summed distance.

    A data point is returned when the resultant of unit vectors from it is no
    longer than its multiplicity; otherwise Weiszfeld steps with an
    extrapolating line search run from the centroid.  Among several optimal
    data points the cheapest (then lexicographically smallest) is chosen.
    """
    prof = as_profile(profile)
    a, b, cert, iters, ok = kernels.geometric_median(prof.points, cfg.tolerance, cfg.max_iterations)
    return _result(prof, a, b, 1, cert, iters, ok)


def min_enclosing_circle(profile: ProfileLike):
    """Centre, radius and support indices (2 or 3 boundary points, 1 if degenerate)."""
    prof = as_profile(profile)
    a, b, r, support = kernels.min_enclosing_circle(prof.points)
    return Point(a, b), r, support


def optimal_location(profile: ProfileLike, p: NormLike = 1, cfg: SolverConfig = DEFAULT_CONFIG) -> OptimalResult:
    prof = as_profile(profile)
    p = NormOrder.parse(p)
    if p.is_infinite:
        centre, _, _ = min_enclosing_circle(prof)
        return _result(prof, centre.a, centre.b, p, 0.0, 0, True)
    if p.value == 1.0:
        return geometric_median(prof, cfg)
    if p.value == 2.0:
        c = prof.points.mean(axis=0)
        return _result(prof, c[0], c[1], p, 0.0, 0, True)
    a, b, cert, iters, ok = kernels.pnorm_descent(prof.points, p.value, cfg.tolerance, cfg.max_iterations)
    return _result(prof, a, b, p, cert, iters, ok)


def optimal_locations(profiles: np.ndarray, p: NormLike = 1, cfg: SolverConfig = DEFAULT_CONFIG):
    """Batched optimum: ``(S, n, 2)`` profiles to ``(locations, costs)``."""
    p = NormOrder.parse(p)
    return kernels.optimal_batch(profiles, 1.0 if p.is_infinite else p.value, p.is_infinite,
                                 cfg.tolerance, cfg.max_iterations)


def cost_gradient(y, profile: ProfileLike, p: float) -> np.ndarray:
    """Gradient of ``sum_i d(y, x_i)**p`` for finite ``p > 1``.

    Terms with ``y == x_i`` contribute zero, which is the true derivative for
    ``p > 1``.
    """
    if not p > 1:
        raise ValueError("the power-sum objective is differentiable only for p > 1")
    pts = as_profile(profile).points
    diff = np.asarray(y, dtype=np.float64) - pts
    dist = np.hypot(diff[:, 0], diff[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(dist > 0, dist ** (p - 2.0), 0.0)
    return p * (w[:, None] * diff).sum(axis=0)


def _best_on(cands, pts, p_val, p_inf):
    costs = kernels.social_cost_many(cands, pts, p_val, p_inf)
    best = costs.min()
    tied = np.flatnonzero(costs == best)
    if tied.size > 1:
        order = np.lexsort((cands[tied, 1], cands[tied, 0]))
        i = tied[order[0]]
    else:
        i = tied[0]
    return cands[i], float(best)


def _grid(ga, gb):
    aa, bb = np.meshgrid(ga, gb, indexing="ij")
    return np.column_stack([aa.ravel(), bb.ravel()])


def grid_oracle(profile: ProfileLike, p: NormLike = 1, cfg: SolverConfig = DEFAULT_CONFIG) -> OptimalResult:
    """Exhaustive grid minimisation with two 10x local refinements.

    The coarse grid spans the bounding box inflated by 25%.  Each refinement
    covers +-5 cells of the previous grid around the incumbent with spacing a
    tenth of the previous one.  Ties go to the lowest cost, then to the
    lexicographically smallest location.  The certificate is the final grid
    spacing.
    """
    prof = as_profile(profile)
    p = NormOrder.parse(p)
    p_val, p_inf = (1.0 if p.is_infinite else p.value), p.is_infinite
    pts = prof.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    pad = 0.125 * span
    pad = np.where(span > 0, pad, 0.5 * max(float(span.max()), 1e-6))
    lo_box, hi_box = lo - pad, hi + pad

    res = cfg.grid_resolution
    ga, gb = np.linspace(lo_box[0], hi_box[0], res), np.linspace(lo_box[1], hi_box[1], res)
    cands = _grid(ga, gb)
    da, db = ga[1] - ga[0], gb[1] - gb[0]
    best, cost = _best_on(cands, pts, p_val, p_inf)
    evaluated = cands.shape[0]
    for _ in range(2):
        wa, wb = 5 * da, 5 * db
        a0, a1 = max(best[0] - wa, lo_box[0]), min(best[0] + wa, hi_box[0])
        b0, b1 = max(best[1] - wb, lo_box[1]), min(best[1] + wb, hi_box[1])
        na = max(int(round((a1 - a0) / (da / 10))) + 1, 2)
        nb = max(int(round((b1 - b0) / (db / 10))) + 1, 2)
        cands = _grid(np.linspace(a0, a1, na), np.linspace(b0, b1, nb))
        cand, c = _best_on(np.vstack([cands, best[None, :]]), pts, p_val, p_inf)
        best, cost = cand, c
        da, db = da / 10, db / 10
        evaluated += cands.shape[0]
    loc = Point(float(best[0]), float(best[1]))
    return OptimalResult(loc, social_cost(loc, prof, p), float(max(da, db)), evaluated, True)
