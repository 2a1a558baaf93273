"""Profile transformations that push a minisum profile towards the extremal family.

Every step keeps the coordinate-wise median at the origin and does not lower
the approximation ratio.  :func:`reduce_to_icp` chains them; each step is
checked numerically and the chain stops, flagged ``UNREDUCED``, the first time
a step would lower the ratio or leaves the expected layout.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .analysis import alpha, approximation_ratio, eta_points, icp_threshold, theorem1_value
from .core import Profile, ProfileLike, as_profile, dumps
from .mechanisms import MechanismSpec, apply_mechanism
from .optimal import geometric_median

AR_SLACK = 1e-9
CM = MechanismSpec.cm()


class StepName(enum.Enum):
    CENTER = "CENTER"
    TOWARD_GM = "TOWARD_GM"
    ORIENT = "ORIENT"
    REDUCE_AXES = "REDUCE_AXES"
    CONVEXITY = "CONVEXITY"
    DOUBLE_ROTATION = "DOUBLE_ROTATION"
    GEOMETRIC_TO_AXIS = "GEOMETRIC_TO_AXIS"
    ISOSCELES = "ISOSCELES"
    NORMALIZE = "NORMALIZE"
    DEGENERATE = "DEGENERATE"


REDUCED = "REDUCED"
UNREDUCED = "UNREDUCED"


@dataclass(frozen=True)
class ReductionStep:
    name: StepName
    before: Profile
    after: Profile
    ar_before: float
    ar_after: float
    detail: str = ""

    def to_dict(self) -> dict:
        out = {"name": self.name.value, "ar_before": self.ar_before, "ar_after": self.ar_after}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class ReductionTrace:
    steps: List[ReductionStep]
    final: Profile
    final_t: Optional[float]
    status: str = REDUCED
    reason: str = ""

    @property
    def reduced(self) -> bool:
        return self.status == REDUCED

    @property
    def final_ar(self) -> float:
        return ar(self.final)

    def to_dict(self) -> dict:
        out = {"steps": [s.to_dict() for s in self.steps], "final_t": self.final_t,
               "status": self.status, "final": self.final.points.tolist()}
        if self.reason:
            out["reason"] = self.reason
        return out

    def to_json(self, indent=None) -> str:
        return dumps(self.to_dict(), indent)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


# the pipeline re-evaluates the same immutable profiles many times
@functools.lru_cache(maxsize=4096)
def _ar_cached(prof: Profile) -> float:
    return approximation_ratio(CM, prof, 1).ratio


@functools.lru_cache(maxsize=4096)
def _gm_cached(prof: Profile):
    return tuple(geometric_median(prof).location)


def ar(profile: ProfileLike) -> float:
    return _ar_cached(as_profile(profile))


def _require_odd(prof: Profile):
    if prof.n % 2 == 0:
        raise ValueError("the reduction needs an odd number of agents")


def axis_tol(prof: ProfileLike) -> float:
    return 1e-9 * (1.0 + as_profile(prof).diameter())


def _snap(pts: np.ndarray) -> np.ndarray:
    diam = Profile(pts).diameter()
    out = pts.copy()
    out[np.abs(out) <= 1e-12 * (1.0 + diam)] = 0.0
    return out


def _cm(pts) -> np.ndarray:
    return np.array(apply_mechanism(CM, pts))


def _gm(pts) -> np.ndarray:
    return np.array(_gm_cached(as_profile(pts)))


def _centered(pts, tol) -> bool:
    return bool(np.all(np.abs(_cm(pts)) <= tol))


def classify(profile: ProfileLike, g=None) -> list:
    """Label each agent ``G`` (at g), ``L`` (a <= 0 on the a-axis, origin included),
    ``R``, ``U``, ``D`` (the other half-axes) or ``X`` (off both axes)."""
    prof = as_profile(profile)
    tol = axis_tol(prof)
    g = _gm(prof.points) if g is None else np.asarray(g)
    labels = []
    for a, b in prof.points:
        if math.hypot(a - g[0], b - g[1]) <= tol:
            labels.append("G")
        elif abs(b) <= tol:
            labels.append("L" if a <= tol else "R")
        elif abs(a) <= tol:
            labels.append("U" if b > 0 else "D")
        else:
            labels.append("X")
    return labels


def _median_window(pts, i, j):
    """Neighbouring order statistics of coordinate ``j`` once agent ``i`` is removed."""
    others = np.sort(np.delete(pts[:, j], i))
    m = others.size // 2
    return others[m - 1], others[m]


def max_step_toward(pts: np.ndarray, i: int, g) -> float:
    """Largest ``s`` in [0, 1] with ``x_i + s (g - x_i)`` leaving the median at the origin.

    With the other agents' middle order statistics ``lo <= hi`` the median of
    a coordinate is ``clip(v, lo, hi)``, so the admissible values of ``v`` are
    ``{0}``, ``v <= 0``, ``v >= 0`` or everything.
    """
    s_max = 1.0
    x = pts[i]
    for j in range(2):
        lo, hi = _median_window(pts, i, j)
        v, w = x[j], g[j]
        if lo < 0.0 < hi:
            if w != v:
                return 0.0
        elif lo == 0.0 < hi:
            if w > 0.0:
                s_max = min(s_max, -v / (w - v))
        elif lo < 0.0 == hi:
            if w < 0.0:
                s_max = min(s_max, v / (v - w))
    return max(s_max, 0.0)


# ---------------------------------------------------------------------------
# individual steps
# ---------------------------------------------------------------------------


def center_profile(profile: ProfileLike) -> Profile:
    prof = as_profile(profile)
    _require_odd(prof)
    pts = prof.points - _cm(prof.points)
    return Profile(_snap(pts))


def toward_gm_sweep(profile: ProfileLike, max_passes: Optional[int] = None) -> Profile:
    """Move each agent, in index order, as far towards g as the median allows.

    Moving along the segment to g leaves g optimal, so g is computed once.
    Passes repeat until nothing moves, since one agent reaching an axis can
    free another.
    """
    prof = as_profile(profile)
    _require_odd(prof)
    pts = prof.as_array()
    g = _gm(pts)
    tol = axis_tol(prof)
    passes = max_passes if max_passes is not None else 2 * prof.n
    for _ in range(passes):
        moved = False
        for i in range(prof.n):
            x = pts[i]
            if math.hypot(x[0] - g[0], x[1] - g[1]) <= tol:
                continue
            s = max_step_toward(pts, i, g)
            if s <= 0.0:
                continue
            if s >= 1.0:
                new = g.copy()
            else:
                new = x + s * (g - x)
                # the binding coordinate lands exactly on its axis
                for j in range(2):
                    if abs(new[j]) <= 1e-12 * (1.0 + abs(x[j]) + abs(g[j])):
                        new[j] = 0.0
            if not np.array_equal(new, x):
                pts[i] = new
                moved = True
        if not moved:
            break
    return Profile(pts)


ORIENTATIONS = ("identity", "reflect_a", "reflect_b", "reflect_ab",
                "swap", "swap+reflect_a", "swap+reflect_b", "swap+reflect_ab")


def orient(profile: ProfileLike):
    """Apply the axis reflections and swap that bring g to ``b_g >= a_g >= 0``.

    When g lies on the b-axis the a-reflection is instead chosen so that at
    least as many agents sit right of the b-axis as left of it.  Returns the
    new profile and the name of the symmetry used.
    """
    prof = as_profile(profile)
    g = _gm(prof.points)
    tol = axis_tol(prof)
    pts = prof.points
    swap = abs(g[0]) > abs(g[1]) + tol
    if swap:
        pts, g = pts[:, ::-1], g[::-1]
    if abs(g[0]) <= tol:
        flip_a = int((pts[:, 0] < -tol).sum()) > int((pts[:, 0] > tol).sum())
    else:
        flip_a = g[0] < 0
    sa = -1.0 if flip_a else 1.0
    sb = -1.0 if g[1] < -tol else 1.0
    pts = pts * np.array([sa, sb])
    name = {(1, 1): "identity", (-1, 1): "reflect_a", (1, -1): "reflect_b", (-1, -1): "reflect_ab"}[(int(sa), int(sb))]
    if swap:
        name = "swap" if name == "identity" else "swap+" + name
    return Profile(np.ascontiguousarray(pts)), name


def reduce_axes(profile: ProfileLike) -> Profile:
    """Move every agent on the negative b half-axis to the negative a half-axis at equal norm.

    An agent is left in place when the move would shift the median.
    """
    prof = as_profile(profile)
    labels = classify(prof)
    pts = prof.as_array()
    tol = axis_tol(prof)
    for i, lab in enumerate(labels):
        if lab != "D":
            continue
        trial = pts.copy()
        trial[i] = (pts[i, 1], 0.0)
        if _centered(trial, tol):
            pts = trial
    return Profile(pts)


HALF_AXES = {"+a": (0, 1.0), "-a": (0, -1.0), "+b": (1, 1.0), "-b": (1, -1.0)}


def convexity_merge(profile: ProfileLike, half_axis: Optional[str] = None) -> Profile:
    """Replace the agents strictly on a half-axis by their mean (all four when ``half_axis`` is None)."""
    prof = as_profile(profile)
    tol = axis_tol(prof)
    pts = prof.as_array()
    g = _gm(pts)
    names = HALF_AXES if half_axis is None else [half_axis]
    for name in names:
        if name not in HALF_AXES:
            raise ValueError(f"unknown half-axis {name!r}")
        j, sign = HALF_AXES[name]
        other = 1 - j
        on = [i for i in range(prof.n)
              if abs(pts[i, other]) <= tol and sign * pts[i, j] > tol
              and math.hypot(*(pts[i] - g)) > tol]
        if len(on) < 2:
            continue
        mean = np.zeros(2)
        mean[j] = pts[on, j].mean()
        pts[on] = mean
    return Profile(pts)


def double_rotation(profile: ProfileLike) -> Profile:
    """Pair agents at g with agents on the non-positive a-axis.

    Each paired agent at g goes to ``(0, |g|)`` and its partner ``(-a, 0)``
    to ``(a + 2 a_g, 0)``; one agent is always left on the non-positive
    a-axis.  Skipped unless ``a_g > 0``.
    """
    prof = as_profile(profile)
    pts = prof.as_array()
    g = _gm(pts)
    tol = axis_tol(prof)
    if not g[0] > tol:
        return prof
    labels = classify(prof, g)
    at_g = [i for i, lab in enumerate(labels) if lab == "G"]
    left = [i for i, lab in enumerate(labels) if lab == "L"]
    # partners furthest from the origin first
    left.sort(key=lambda i: (pts[i, 0], i))
    pairs = min(len(at_g), max(len(left) - 1, 0))
    norm_g = math.hypot(g[0], g[1])
    for gi, li in zip(at_g[:pairs], left[:pairs]):
        pts[gi] = (0.0, norm_g)
        pts[li] = (-pts[li, 0] + 2.0 * g[0], 0.0)
    return Profile(pts)


def geometric_to_axis(profile: ProfileLike) -> Profile:
    """Move the positive b-axis agents onto g, then recentre the median at the origin."""
    prof = as_profile(profile)
    pts = prof.as_array()
    g = _gm(pts)
    tol = axis_tol(prof)
    if abs(g[0]) <= tol:
        return prof
    labels = classify(prof, g)
    for i, lab in enumerate(labels):
        if lab == "U":
            pts[i] = g
    return center_profile(pts)


def isosceles_balance(profile: ProfileLike) -> Profile:
    """Spread the a-axis agents to ``+-(m a + b)/(m + 1)``.

    Expects m agents on the positive a-axis, one on the non-positive a-axis
    and the remaining m at g on the positive b-axis; the sum of distances to
    the origin is unchanged.
    """
    prof = as_profile(profile)
    _require_odd(prof)
    m = (prof.n - 1) // 2
    labels = classify(prof)
    right = [i for i, lab in enumerate(labels) if lab == "R"]
    left = [i for i, lab in enumerate(labels) if lab == "L"]
    if len(right) != m or len(left) != 1:
        return prof
    pts = prof.as_array()
    s = (pts[right, 0].sum() - pts[left[0], 0]) / (m + 1)
    pts[right] = (s, 0.0)
    pts[left[0]] = (-s, 0.0)
    return Profile(pts)


def eta_layout_t(profile: ProfileLike) -> Optional[float]:
    """``t/c`` when the profile is m at (t, 0), one at (-t, 0), m at (0, c) up to order; else None."""
    prof = as_profile(profile)
    if prof.n % 2 == 0 or prof.n < 3:
        return None
    m = (prof.n - 1) // 2
    tol = axis_tol(prof)
    pts = prof.points
    up = [i for i in range(prof.n) if abs(pts[i, 0]) <= tol and pts[i, 1] > tol]
    rest = [i for i in range(prof.n) if i not in up]
    if len(up) != m or any(abs(pts[i, 1]) > tol for i in rest):
        return None
    c = pts[up, 1]
    if np.ptp(c) > tol:
        return None
    a = np.sort(pts[rest, 0])
    t = a[-1]
    if np.ptp(a[1:]) > tol or abs(a[0] + t) > tol:
        return None
    return float(t / c.mean())


def normalize(profile: ProfileLike):
    """Scale so the b-axis cluster sits at (0, 1) and reorder into the family's layout."""
    t = eta_layout_t(profile)
    if t is None:
        return None, None
    m = (as_profile(profile).n - 1) // 2
    return Profile(eta_points(m, t)), t


# ---------------------------------------------------------------------------
# characterisation of the reduced profiles
# ---------------------------------------------------------------------------


@dataclass
class CPCheck:
    ok: bool
    diagnostics: List[str] = field(default_factory=list)

    def __bool__(self):
        return self.ok


def cp_membership(profile: ProfileLike) -> CPCheck:
    """Centred, every agent on an axis or at g, and no agent can move towards g freely."""
    prof = as_profile(profile)
    tol = axis_tol(prof)
    diags = []
    c = _cm(prof.points)
    centred = bool(np.all(np.abs(c) <= tol))
    if not centred:
        diags.append(f"median at ({c[0]:.6g}, {c[1]:.6g}), not the origin")
    g = _gm(prof.points)
    pts = prof.points
    for i, (a, b) in enumerate(pts):
        if math.hypot(a - g[0], b - g[1]) <= tol:
            continue
        if abs(a) > tol and abs(b) > tol:
            diags.append(f"agent {i} at ({a:.6g}, {b:.6g}) is off both axes and not at g")
        elif centred and max_step_toward(pts, i, g) > 0.0:
            # the slack test reads the median window, so only meaningful once centred
            diags.append(f"agent {i} can move towards g without changing the median")
    return CPCheck(not diags, diags)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


class _Chain:
    def __init__(self, prof: Profile):
        self.prof = prof
        self.ratio = ar(prof)
        self.steps: List[ReductionStep] = []
        self.failure = ""
        self.changed = False

    def apply(self, name: StepName, after: Optional[Profile], detail: str = "", record_noop=True) -> bool:
        if after is None:
            self.failure = f"{name.value}: profile left the expected layout"
            return False
        if after == self.prof:
            if record_noop:
                self.steps.append(ReductionStep(name, self.prof, self.prof, self.ratio, self.ratio, detail))
            return True
        new_ratio = ar(after)
        if new_ratio < self.ratio - AR_SLACK:
            self.failure = f"{name.value}: ratio would drop from {self.ratio:.12g} to {new_ratio:.12g}"
            return False
        if not _centered(after.points, axis_tol(after)):
            self.failure = f"{name.value}: median left the origin"
            return False
        self.steps.append(ReductionStep(name, self.prof, after, self.ratio, new_ratio, detail))
        self.prof, self.ratio = after, new_ratio
        self.changed = True
        return True

    def trace(self, status=REDUCED, t=None) -> ReductionTrace:
        return ReductionTrace(self.steps, self.prof, t, status, "" if status == REDUCED else self.failure)


def _degenerate(chain: _Chain, m: int) -> ReductionTrace:
    thr = icp_threshold(m)
    chain.apply(StepName.DEGENERATE, Profile(eta_points(m, thr)), "ratio 1 profile replaced")
    return chain.trace(REDUCED, thr)


def _settled(prof: Profile, thr: float) -> Optional[float]:
    """t when the profile is in the family layout with t no more than 1e-6 below the threshold."""
    t = eta_layout_t(prof)
    return t if t is not None and t >= thr - 1e-6 else None


def _is_cp_shaped(prof: Profile) -> bool:
    return "X" not in classify(prof)


def reduce_to_icp(profile: ProfileLike, max_rounds: int = 50) -> ReductionTrace:
    """Chain the transformations and return the full trace.

    Rounds of TOWARD_GM, ORIENT, REDUCE_AXES, CONVEXITY, DOUBLE_ROTATION,
    CONVEXITY, GEOMETRIC_TO_AXIS and ISOSCELES repeat until the profile is in
    the family layout; later rounds only record steps that change something.
    A profile whose ratio is already 1 is replaced by the family member at the
    threshold (DEGENERATE).
    """
    prof = as_profile(profile)
    _require_odd(prof)
    if prof.n < 3:
        raise ValueError("the reduction needs at least 3 agents")
    m = (prof.n - 1) // 2
    thr = icp_threshold(m)
    chain = _Chain(prof)

    if not chain.apply(StepName.CENTER, center_profile(prof)):
        return chain.trace(UNREDUCED)
    for round_ in range(max_rounds):
        if chain.ratio <= 1.0 + AR_SLACK:
            return _degenerate(chain, m)
        first = round_ == 0
        chain.changed = False
        ok = chain.apply(StepName.TOWARD_GM, toward_gm_sweep(chain.prof), record_noop=first)
        if ok:
            oriented, how = orient(chain.prof)
            ok = chain.apply(StepName.ORIENT, oriented, how, record_noop=first)
        for name, fn in ((StepName.REDUCE_AXES, reduce_axes),
                         (StepName.CONVEXITY, convexity_merge),
                         (StepName.DOUBLE_ROTATION, double_rotation),
                         (StepName.CONVEXITY, convexity_merge)):
            if not ok:
                return chain.trace(UNREDUCED)
            ok = chain.apply(name, fn(chain.prof), record_noop=first)
        if not ok:
            return chain.trace(UNREDUCED)
        # merging can move g off the agents that sat on it; the next round's
        # TOWARD_GM restores that before g is moved to the axis
        if _is_cp_shaped(chain.prof):
            ok = (chain.apply(StepName.GEOMETRIC_TO_AXIS, geometric_to_axis(chain.prof), record_noop=first)
                  and chain.apply(StepName.ISOSCELES, isosceles_balance(chain.prof), record_noop=first))
            if not ok:
                return chain.trace(UNREDUCED)
        t = _settled(chain.prof, thr)
        if t is not None:
            break
        if not chain.changed:
            chain.failure = "no step applies but the profile is not in the family layout"
            return chain.trace(UNREDUCED)
    else:
        chain.failure = f"not in the family layout after {max_rounds} rounds"
        return chain.trace(UNREDUCED)

    final, t = normalize(chain.prof)
    if not chain.apply(StepName.NORMALIZE, final, f"t = {t!r}"):
        return chain.trace(UNREDUCED)
    return chain.trace(REDUCED, t)


def check_trace(trace: ReductionTrace, n: int) -> List[str]:
    """Problems with a trace: non-monotone steps, broken chaining, or an out-of-bound end."""
    problems = []
    for k, step in enumerate(trace.steps):
        if step.ar_after < step.ar_before - AR_SLACK:
            problems.append(f"step {k} ({step.name.value}) lowers the ratio")
        if k and trace.steps[k - 1].after != step.before:
            problems.append(f"step {k} does not chain")
    if trace.reduced:
        m = (n - 1) // 2
        if trace.final_t is None or trace.final_t < icp_threshold(m) - 1e-6:
            problems.append("final t below the threshold")
        if trace.final != Profile(eta_points(m, trace.final_t or 0.0)):
            problems.append("final profile is not in the family layout")
        if ar(trace.final) > theorem1_value(n) + AR_SLACK:
            problems.append("final ratio exceeds the worst case")
        if abs(ar(trace.final) - alpha(m, trace.final_t)) > 1e-9:
            problems.append("final ratio disagrees with the closed form")
    return problems
