"""Approximation ratios, the worst-case family, scans, deviation searches and probes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .core import NormLike, NormOrder, Point, Profile, ProfileLike, as_profile, distance, social_cost
from .mechanisms import (
    MechanismSpec,
    apply_mechanism,
    deviation_grid,
    mechanism_points,
    outcomes_under_deviation,
)
from .optimal import DEFAULT_CONFIG, SolverConfig, grid_oracle, optimal_location, optimal_locations

# Both costs below this are treated as a coincident profile with ratio 1.
DEGENERATE_COST = 1e-12

SQRT2 = math.sqrt(2.0)


class MinisumAudit:
    """Running maximum of every minisum ratio computed for an unconstrained CM.

    Any coordinate-wise median without constant points (any angle, any tie
    rule) is within a factor sqrt(2) of optimal for p = 1, so this gives the
    test-suite a single place to check that bound.
    """

    def __init__(self):
        self.reset()

    def reset(self):
        self.count = 0
        self.max_ratio = -math.inf
        self.worst: Optional[np.ndarray] = None

    def record(self, ratios, profiles):
        ratios = np.asarray(ratios, dtype=np.float64).ravel()
        if ratios.size == 0:
            return
        self.count += ratios.size
        i = int(np.argmax(ratios))
        if ratios[i] > self.max_ratio:
            self.max_ratio = float(ratios[i])
            self.worst = np.array(profiles[i], dtype=np.float64)


AUDIT = MinisumAudit()


def _audited(spec: MechanismSpec, p: NormOrder) -> bool:
    return spec.is_scheme and spec.k == 0 and not p.is_infinite and p.value == 1.0


def _pv(p: NormOrder):
    return (1.0 if p.is_infinite else p.value), p.is_infinite


def ratio_from_costs(mech_cost, opt_cost):
    mech_cost = np.asarray(mech_cost, dtype=np.float64)
    opt_cost = np.asarray(opt_cost, dtype=np.float64)
    degenerate = (mech_cost < DEGENERATE_COST) & (opt_cost < DEGENERATE_COST)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(degenerate, 1.0, mech_cost / np.where(degenerate, 1.0, opt_cost))
    return ratio


# ---------------------------------------------------------------------------
# approximation ratio
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ARReport:
    mech_cost: float
    opt_cost: float
    ratio: float
    mech_point: Point
    opt_point: Point

    def to_dict(self) -> dict:
        return {
            "mech_cost": self.mech_cost,
            "opt_cost": self.opt_cost,
            "ratio": self.ratio,
            "mech_point": list(self.mech_point),
            "opt_point": list(self.opt_point),
        }


def approximation_ratio(spec: MechanismSpec, profile: ProfileLike, p: NormLike = 1,
                        cfg: SolverConfig = DEFAULT_CONFIG) -> ARReport:
    prof = as_profile(profile)
    p = NormOrder.parse(p)
    mech = apply_mechanism(spec, prof)
    opt = optimal_location(prof, p, cfg)
    mech_cost = social_cost(mech, prof, p)
    ratio = float(ratio_from_costs(mech_cost, opt.cost))
    if _audited(spec, p):
        AUDIT.record([ratio], prof.points[None])
    return ARReport(mech_cost, opt.cost, ratio, mech, opt.location)


def ratios_batch(spec: MechanismSpec, profiles: np.ndarray, p: NormLike = 1,
                 cfg: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Approximation ratios of ``spec`` on an ``(S, n, 2)`` stack."""
    profiles = np.ascontiguousarray(profiles, dtype=np.float64)
    p = NormOrder.parse(p)
    pv, pinf = _pv(p)
    mech = mechanism_points(spec, profiles)
    mech_cost = kernels.social_cost_batch(mech, profiles, pv, pinf)
    _, opt_cost = optimal_locations(profiles, p, cfg)
    ratios = ratio_from_costs(mech_cost, opt_cost)
    if _audited(spec, p):
        AUDIT.record(ratios, profiles)
    return ratios


# ---------------------------------------------------------------------------
# the worst-case family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FamilyPoint:
    m: int
    t: float
    alpha: float
    profile: Profile
    ar: Optional[float] = None


def eta_points(m: int, t: float) -> np.ndarray:
    if m < 1:
        raise ValueError("m must be at least 1")
    if not t >= 0:
        raise ValueError("t must be nonnegative")
    pts = np.zeros((2 * m + 1, 2))
    pts[:m, 0] = t
    pts[m, 0] = -t
    pts[m + 1:, 1] = 1.0
    return pts


def eta_profile(m: int, t: float) -> FamilyPoint:
    """m agents at (t, 0), one at (-t, 0) and m at (0, 1)."""
    return FamilyPoint(int(m), float(t), alpha(m, t), Profile(eta_points(m, t)))


def alpha(m: int, t: float) -> float:
    """Closed-form CM ratio on the family; valid once t reaches :func:`icp_threshold`."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return ((m + 1) * t + m) / ((m + 1) * math.sqrt(t * t + 1.0))


def icp_threshold(m: int) -> float:
    """Smallest t at which the (0, 1) cluster is the geometric median of the family."""
    return math.sqrt((2 * m + 1) / (2 * m - 1))


def _m_of(n: int) -> int:
    if isinstance(n, bool) or int(n) != n or n < 3 or n % 2 == 0:
        raise ValueError(f"n must be an odd integer >= 3, got {n!r}")
    return (int(n) - 1) // 2


def theorem1_value(n: int) -> float:
    """Worst-case minisum ratio of CM with n (odd) agents."""
    _m_of(n)
    return SQRT2 * math.sqrt(n * n + 1.0) / (n + 1.0)


def t_star(n: int) -> float:
    m = _m_of(n)
    return (m + 1) / m


@dataclass
class FamilyScan:
    m: int
    points: list
    argmax_t: float
    max_ar: float

    @property
    def expected_max(self) -> float:
        return theorem1_value(2 * self.m + 1)

    @property
    def expected_argmax(self) -> float:
        return (self.m + 1) / self.m


def t_grid(t_min: float, t_max: float, step: float) -> np.ndarray:
    if t_min > t_max:
        raise ValueError("t_min must not exceed t_max")
    if not step > 0:
        raise ValueError("step must be positive")
    count = int(math.floor((t_max - t_min) / step + 1e-9)) + 1
    return t_min + step * np.arange(count)


def family_scan(m: int, t_min: float, t_max: float, step: float,
                cfg: SolverConfig = DEFAULT_CONFIG) -> FamilyScan:
    ts = t_grid(t_min, t_max, step)
    stack = np.stack([eta_points(m, t) for t in ts])
    ars = ratios_batch(MechanismSpec.cm(), stack, 1, cfg)
    pts = [FamilyPoint(m, float(t), alpha(m, float(t)), Profile(stack[i]), float(ars[i]))
           for i, t in enumerate(ts)]
    best = int(np.argmax(ars))
    return FamilyScan(m, pts, float(ts[best]), float(ars[best]))


# ---------------------------------------------------------------------------
# worst-case scan
# ---------------------------------------------------------------------------


@dataclass
class ScanResult:
    best_ratio: float
    best_profile: Profile
    samples: int
    seed: int
    sample_max: float
    records: Optional[np.ndarray] = None
    refined: bool = False

    def summary(self) -> dict:
        return {
            "best_ratio": self.best_ratio,
            "best_profile": self.best_profile.points.tolist(),
            "seed": self.seed,
        }


SHARD_SIZE = 4096


def shard_rng(seed: int, shard: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(shard),))
    return np.random.Generator(np.random.Philox(ss))


def random_profiles(n: int, count: int, seed: int, shard_size: int = SHARD_SIZE) -> np.ndarray:
    """``count`` profiles uniform in [-1, 1]^2; shard ``s`` covers samples ``s*shard_size...``."""
    out = np.empty((count, n, 2))
    for shard, start in enumerate(range(0, count, shard_size)):
        stop = min(start + shard_size, count)
        out[start:stop] = shard_rng(seed, shard).uniform(-1.0, 1.0, size=(stop - start, n, 2))
    return out


def builtin_corpus(n: int) -> np.ndarray:
    """Known extremal profiles for ``n`` agents."""
    corpus = []
    lo = (n + 1) // 2
    pts = np.zeros((n, 2))
    pts[lo:, 0] = 1.0
    corpus.append(pts)
    if n % 2 == 1 and n >= 3:
        corpus.append(eta_points((n - 1) // 2, t_star(n)))
    return np.stack(corpus)


def _better(r1, p1, r2, p2) -> bool:
    """Total order on incumbents: higher ratio, then lexicographically smaller profile."""
    if r1 != r2:
        return r1 > r2
    return tuple(np.ravel(p1)) < tuple(np.ravel(p2))


def _top_indices(ratios, stack, k):
    order = sorted(range(len(ratios)), key=lambda i: (-ratios[i], tuple(stack[i].ravel())))
    return order[:k]


def refine_profile(spec: MechanismSpec, profile: np.ndarray, p: NormLike = 1, rounds: int = 5,
                   shrink: float = 4.0, step: float = 0.25, max_sweeps: int = 200,
                   cfg: SolverConfig = DEFAULT_CONFIG):
    """Coordinate ascent on AR: try +-step on every coordinate, keep the best improvement."""
    cur = np.array(profile, dtype=np.float64)
    cur_ratio = float(ratios_batch(spec, cur[None], p, cfg)[0])
    n = cur.shape[0]
    for _ in range(rounds):
        for _ in range(max_sweeps):
            cands = np.repeat(cur[None], 4 * n, axis=0)
            for i in range(n):
                for j in range(2):
                    base = 4 * i + 2 * j
                    cands[base, i, j] += step
                    cands[base + 1, i, j] -= step
            r = ratios_batch(spec, cands, p, cfg)
            k = int(np.argmax(r))
            if not r[k] > cur_ratio:
                break
            cur, cur_ratio = cands[k], float(r[k])
        step /= shrink
    return cur, cur_ratio


def worst_case_scan(spec: MechanismSpec, n: int, p: NormLike = 1, samples: int = 10_000, seed: int = 0,
                    corpus: Optional[np.ndarray] = None, refine_top: int = 4, keep_records: bool = False,
                    shard_size: int = SHARD_SIZE, cfg: SolverConfig = DEFAULT_CONFIG) -> ScanResult:
    """Random search for the profile with the largest ratio, then local refinement.

    ``sample_max`` is the largest ratio among the random draws and the corpus,
    before refinement.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    if n < 1:
        raise ValueError("n must be at least 1")
    p = NormOrder.parse(p)
    records = np.empty(samples) if keep_records else None
    best_r, best_p = -math.inf, None
    pool_r, pool_p = [], []
    for shard, start in enumerate(range(0, samples, shard_size)):
        stop = min(start + shard_size, samples)
        stack = shard_rng(seed, shard).uniform(-1.0, 1.0, size=(stop - start, n, 2))
        r = ratios_batch(spec, stack, p, cfg)
        if records is not None:
            records[start:stop] = r
        for i in _top_indices(r, stack, max(refine_top, 1)):
            pool_r.append(float(r[i]))
            pool_p.append(stack[i].copy())
    if corpus is not None and len(corpus):
        corpus = np.asarray(corpus, dtype=np.float64)
        r = ratios_batch(spec, corpus, p, cfg)
        for i in range(len(corpus)):
            pool_r.append(float(r[i]))
            pool_p.append(corpus[i].copy())
    for r, prof in zip(pool_r, pool_p):
        if best_p is None or _better(r, prof, best_r, best_p):
            best_r, best_p = r, prof
    sample_max = best_r

    refined = False
    if refine_top > 0:
        for i in _top_indices(pool_r, np.stack(pool_p), refine_top):
            prof, r = refine_profile(spec, pool_p[i], p, cfg=cfg)
            if _better(r, prof, best_r, best_p):
                best_r, best_p, refined = r, prof, True
    # recompute from the stored profile so the reported value is reproducible
    best_prof = Profile(best_p)
    best_r = approximation_ratio(spec, best_prof, p, cfg).ratio
    return ScanResult(best_r, best_prof, samples, seed, sample_max, records, refined)


# ---------------------------------------------------------------------------
# p-norm bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PNormBounds:
    p: NormOrder
    lower: float
    upper: float
    exact: Optional[float] = None

    def to_dict(self) -> dict:
        out = {"p": str(self.p), "lower": self.lower, "upper": self.upper}
        if self.exact is not None:
            out["exact"] = self.exact
        return out


def pnorm_bounds(p: NormLike) -> PNormBounds:
    """Lower and upper bounds on the worst-case CM ratio; defined for p >= 2 only."""
    p = NormOrder.parse(p)
    if p.is_infinite:
        return PNormBounds(p, 2.0, 2.0 * SQRT2, 2.0)
    if p.value < 2.0:
        raise ValueError(f"the p-norm bounds hold only for p >= 2, got p = {p.value:g}")
    lower = 2.0 ** (1.0 - 1.0 / p.value)
    upper = 2.0 ** (1.5 - 2.0 / p.value)
    return PNormBounds(p, lower, upper, SQRT2 if p.value == 2.0 else None)


# ---------------------------------------------------------------------------
# strategyproofness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeviationReport:
    agent: int
    true_point: Point
    deviation: Point
    gain: float

    def to_dict(self) -> dict:
        return {"agent": self.agent, "true_point": list(self.true_point),
                "deviation": list(self.deviation), "gain": self.gain}


@dataclass(frozen=True)
class DeviationGrid:
    resolution: int = 41
    inflate: float = 0.5
    refinements: int = 0
    # stop once a gain at least this large is found (None: search everything)
    stop_at: Optional[float] = None


def _gains(spec, prof, agent, devs, truthful):
    x = prof.points[agent]
    outs = outcomes_under_deviation(spec, prof, agent, devs)
    honest = math.hypot(truthful[0] - x[0], truthful[1] - x[1])
    with np.errstate(invalid="ignore"):
        gains = honest - np.hypot(outs[:, 0] - x[0], outs[:, 1] - x[1])
    # inf - inf: the outcome is pinned at infinity either way
    return np.nan_to_num(gains, nan=0.0)


def sp_deviation_search(spec: MechanismSpec, profile: ProfileLike,
                        grid: DeviationGrid = DeviationGrid()) -> DeviationReport:
    """Largest improvement any single agent can get by misreporting, over a grid."""
    prof = as_profile(profile)
    truthful = apply_mechanism(spec, prof)
    base = deviation_grid(prof, grid.resolution, grid.inflate)
    cell = (base[-1] - base[0]) / (grid.resolution - 1)
    best = None
    for agent in range(prof.n):
        x = prof.points[agent]
        devs = np.vstack([x[None], np.array(truthful)[None], base])
        gains = _gains(spec, prof, agent, devs, truthful)
        k = int(np.argmax(gains))
        dev, gain = devs[k], float(gains[k])
        span = cell.copy()
        for _ in range(grid.refinements):
            ga = np.linspace(dev[0] - 2 * span[0], dev[0] + 2 * span[0], grid.resolution)
            gb = np.linspace(dev[1] - 2 * span[1], dev[1] + 2 * span[1], grid.resolution)
            aa, bb = np.meshgrid(ga, gb, indexing="ij")
            local = np.column_stack([aa.ravel(), bb.ravel()])
            g = _gains(spec, prof, agent, local, truthful)
            k = int(np.argmax(g))
            if g[k] > gain:
                dev, gain = local[k], float(g[k])
            span = span * 4.0 / (grid.resolution - 1)
        report = DeviationReport(agent, Point(float(x[0]), float(x[1])), Point(float(dev[0]), float(dev[1])), gain)
        if best is None or report.gain > best.gain:
            best = report
        if grid.stop_at is not None and best.gain >= grid.stop_at:
            break
    return best


# ---------------------------------------------------------------------------
# dominance experiment
# ---------------------------------------------------------------------------

REFLECTIONS = {
    "identity": (1.0, 1.0),
    "about_a_axis": (1.0, -1.0),
    "about_b_axis": (-1.0, 1.0),
    "both": (-1.0, -1.0),
}


@dataclass(frozen=True)
class DominanceResult:
    max_ratio: float
    translation: Point
    reflection: str
    bound: float

    def to_dict(self) -> dict:
        return {"max_ratio": self.max_ratio, "translation": list(self.translation),
                "reflection": self.reflection, "bound": self.bound}


def dominance_experiment(scheme: MechanismSpec, m: int, resolution: int = 81,
                         cfg: SolverConfig = DEFAULT_CONFIG) -> DominanceResult:
    """Worst ratio of ``scheme`` over translated and reflected copies of the extremal profile.

    The translation grid spans [-2L, 2L]^2 where L is the largest finite
    constant coordinate magnitude plus the profile diameter.
    """
    if not scheme.is_scheme:
        raise ValueError("the dominance experiment needs a coordinate-wise median scheme")
    n = 2 * m + 1
    base = eta_points(m, t_star(n))
    consts = scheme.constants_array()
    finite = np.abs(consts[np.isfinite(consts)])
    L = (float(finite.max()) if finite.size else 0.0) + Profile(base).diameter()
    shifts = np.linspace(-2.0 * L, 2.0 * L, resolution)
    ta, tb = np.meshgrid(shifts, shifts, indexing="ij")
    trans = np.column_stack([ta.ravel(), tb.ravel()])

    # the optimal cost is invariant under both operations
    opt_cost = optimal_location(Profile(base), 1, cfg).cost
    best = (-math.inf, None, None)
    for name, (sa, sb) in REFLECTIONS.items():
        ref = base * np.array([sa, sb])
        stack = ref[None, :, :] + trans[:, None, :]
        mech = mechanism_points(scheme, stack)
        costs = kernels.social_cost_batch(mech, stack, 1.0, False)
        ratios = ratio_from_costs(costs, np.full_like(costs, opt_cost))
        k = int(np.argmax(ratios))
        if ratios[k] > best[0]:
            best = (float(ratios[k]), trans[k], name)
    return DominanceResult(best[0], Point(float(best[1][0]), float(best[1][1])), best[2], theorem1_value(n))


def random_scheme(rng: np.random.Generator, k: int, scale: float = 2.0, inf_rate: float = 0.25) -> MechanismSpec:
    """Axis-aligned scheme with ``k`` constants; each coordinate is +-inf with probability ``inf_rate``."""
    consts = rng.uniform(-scale, scale, size=(k, 2))
    mask = rng.random((k, 2)) < inf_rate
    signs = np.where(rng.random((k, 2)) < 0.5, -np.inf, np.inf)
    consts = np.where(mask, signs, consts)
    return MechanismSpec.scheme([tuple(c) for c in consts.tolist()])


# ---------------------------------------------------------------------------
# conjecture probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeRow:
    n: int
    family_ratio: float
    scan_ratio: float
    best: float
    lower: float
    upper: float
    oracle_gap: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def two_cluster_points(n: int) -> np.ndarray:
    """ceil(n/2) agents at the origin and floor(n/2) at (1, 0)."""
    pts = np.zeros((n, 2))
    pts[(n + 1) // 2:, 0] = 1.0
    return pts


def segment_minimum(profile: ProfileLike, p: NormLike, lo: float = 0.0, hi: float = 1.0,
                    iterations: int = 200):
    """Ternary search for the cheapest point (a, 0) with ``lo <= a <= hi``."""
    prof = as_profile(profile)
    p = NormOrder.parse(p)

    def f(a):
        return social_cost((a, 0.0), prof, p)

    for _ in range(iterations):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    a = 0.5 * (lo + hi)
    return Point(a, 0.0), f(a)


def conjecture_probe(p: NormLike, n_list: Iterable[int], samples: int = 1000, seed: int = 0,
                     oracle_resolution: int = 401, cfg: SolverConfig = DEFAULT_CONFIG) -> list:
    p = NormOrder.parse(p)
    bounds = pnorm_bounds(p)
    rows = []
    cm = MechanismSpec.cm()
    for n in n_list:
        prof = Profile(two_cluster_points(n))
        mech_cost = social_cost(apply_mechanism(cm, prof), prof, p)
        _, seg_cost = segment_minimum(prof, p)
        family = float(ratio_from_costs(mech_cost, seg_cost))
        oracle = grid_oracle(prof, p, SolverConfig(grid_resolution=oracle_resolution))
        gap = abs(family - float(ratio_from_costs(mech_cost, oracle.cost)))
        scan = worst_case_scan(cm, n, p, samples, seed, refine_top=0, cfg=cfg)
        rows.append(ProbeRow(n, family, scan.best_ratio, max(family, scan.best_ratio),
                             bounds.lower, bounds.upper, gap))
    return rows
