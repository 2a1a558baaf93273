"""Generalized coordinate-wise median schemes and the geometric-median mechanism."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .core import MedianRule, Point, Profile, ProfileLike, as_profile, dumps, format_float


class Kind(enum.Enum):
    CWM_SCHEME = "cwm"
    GEOMETRIC_MEDIAN = "gm"


def rotate(points, theta: float) -> np.ndarray:
    """Rotate ``(..., 2)`` coordinates counter-clockwise by ``theta``."""
    pts = np.asarray(points, dtype=np.float64)
    if theta == 0.0:
        return pts.copy()
    c, s = math.cos(theta), math.sin(theta)
    out = np.empty_like(pts)
    out[..., 0] = c * pts[..., 0] - s * pts[..., 1]
    out[..., 1] = s * pts[..., 0] + c * pts[..., 1]
    return out


def _parse_coord(value, where):
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("+inf", "inf", "infinity"):
            return math.inf
        if text in ("-inf", "-infinity"):
            return -math.inf
        raise ValueError(f"mechanism spec field '{where}': expected a number, '+inf' or '-inf', got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"mechanism spec field '{where}': expected a number, got {value!r}")
    v = float(value)
    if math.isnan(v):
        raise ValueError(f"mechanism spec field '{where}': NaN is not a coordinate")
    return v


@dataclass(frozen=True)
class MechanismSpec:
    """A mechanism: either a coordinate-wise median scheme or the geometric median.

    ``constants`` are given in the standard frame; finite coordinates rotate
    with the scheme, and infinite ones are only allowed when ``theta == 0``.
    ``theta`` is stored in ``[0, pi)``: an input angle in ``[pi, 2*pi)`` is
    reduced by ``pi``, which negates every coordinate and therefore swaps the
    even-length tie rule.
    """

    kind: Kind = Kind.CWM_SCHEME
    theta: float = 0.0
    constants: tuple = ()
    tie: MedianRule = MedianRule.LOWER

    def __post_init__(self):
        kind = Kind(self.kind)
        tie = MedianRule.parse(self.tie)
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise ValueError("theta must be finite")
        consts = tuple(
            (_parse_coord(c[0], f"constants[{i}][0]"), _parse_coord(c[1], f"constants[{i}][1]"))
            for i, c in enumerate(self.constants)
        )
        if kind is Kind.GEOMETRIC_MEDIAN:
            if theta != 0.0 or consts:
                raise ValueError("the geometric-median mechanism takes no scheme parameters")
        else:
            theta = math.fmod(theta, 2.0 * math.pi)
            if theta < 0.0:
                theta += 2.0 * math.pi
            if theta >= math.pi:
                theta -= math.pi
                tie = tie.flipped()
            if theta >= math.pi:  # fmod rounding at the upper edge
                theta = 0.0
            if theta != 0.0 and any(math.isinf(v) for c in consts for v in c):
                raise ValueError("constant points with infinite coordinates require theta == 0")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "tie", tie)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "constants", consts)

    @classmethod
    def cm(cls, tie: MedianRule = MedianRule.LOWER) -> "MechanismSpec":
        return cls(Kind.CWM_SCHEME, 0.0, (), tie)

    @classmethod
    def gm(cls) -> "MechanismSpec":
        return cls(Kind.GEOMETRIC_MEDIAN)

    @classmethod
    def scheme(cls, constants=(), theta: float = 0.0, tie: MedianRule = MedianRule.LOWER) -> "MechanismSpec":
        return cls(Kind.CWM_SCHEME, theta, tuple(map(tuple, constants)), tie)

    @classmethod
    def rotated(cls, theta: float) -> "MechanismSpec":
        return cls(Kind.CWM_SCHEME, theta)

    @property
    def k(self) -> int:
        return len(self.constants)

    @property
    def is_scheme(self) -> bool:
        return self.kind is Kind.CWM_SCHEME

    @property
    def is_cm(self) -> bool:
        return self.is_scheme and self.k == 0 and self.theta == 0.0

    def constants_array(self) -> np.ndarray:
        return np.array(self.constants, dtype=np.float64).reshape(-1, 2)

    def frame_constants(self) -> np.ndarray:
        """Constant points expressed in the scheme's (rotated) frame."""
        return rotate(self.constants_array(), -self.theta)

    def to_dict(self) -> dict:
        if self.kind is Kind.GEOMETRIC_MEDIAN:
            return {"kind": "gm", "theta": 0.0, "constants": [], "tie": self.tie.value}
        consts = [[v if math.isfinite(v) else format_float(v) for v in c] for c in self.constants]
        return {"kind": "cwm", "theta": self.theta, "constants": consts, "tie": self.tie.value}

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data) -> "MechanismSpec":
        if not isinstance(data, dict):
            raise ValueError("mechanism spec must be a JSON object")
        unknown = set(data) - {"kind", "theta", "constants", "tie"}
        if unknown:
            raise ValueError(f"mechanism spec field '{sorted(unknown)[0]}': unknown field")
        if "kind" not in data:
            raise ValueError("mechanism spec field 'kind': missing")
        try:
            kind = Kind(data["kind"])
        except ValueError:
            raise ValueError(f"mechanism spec field 'kind': expected 'cwm' or 'gm', got {data['kind']!r}") from None
        theta = data.get("theta", 0.0)
        if isinstance(theta, bool) or not isinstance(theta, (int, float)):
            raise ValueError(f"mechanism spec field 'theta': expected a number, got {theta!r}")
        constants = data.get("constants", [])
        if not isinstance(constants, list):
            raise ValueError("mechanism spec field 'constants': expected a list of [a, b] pairs")
        for i, c in enumerate(constants):
            if not isinstance(c, list) or len(c) != 2:
                raise ValueError(f"mechanism spec field 'constants[{i}]': expected an [a, b] pair")
        try:
            tie = MedianRule.parse(data.get("tie", "lower"))
        except ValueError:
            raise ValueError(f"mechanism spec field 'tie': expected 'lower' or 'upper', got {data.get('tie')!r}") from None
        if kind is Kind.GEOMETRIC_MEDIAN:
            if constants or theta:
                raise ValueError("mechanism spec field 'constants': the gm mechanism takes no scheme parameters")
            return cls(kind, 0.0, (), tie)
        return cls(kind, float(theta), tuple(tuple(c) for c in constants), tie)

    @classmethod
    def from_json(cls, text: str) -> "MechanismSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"mechanism spec is not valid JSON: {exc}") from None
        return cls.from_dict(data)


def apply_mechanism(spec: MechanismSpec, profile: ProfileLike) -> Point:
    prof = as_profile(profile)
    loc = mechanism_points(spec, prof.points[None, :, :])[0]
    return Point(float(loc[0]), float(loc[1]))


def mechanism_points(spec: MechanismSpec, profiles: np.ndarray) -> np.ndarray:
    """Outcomes of ``spec`` on a ``(S, n, 2)`` stack of profiles."""
    profiles = np.asarray(profiles, dtype=np.float64)
    if profiles.shape[1] < 1:
        raise ValueError("profile must contain at least one point")
    if spec.kind is Kind.GEOMETRIC_MEDIAN:
        from .optimal import SolverConfig

        cfg = SolverConfig()
        locs, _, _, _ = kernels.geometric_median_batch(profiles, cfg.tolerance, cfg.max_iterations)
        return locs
    lower = spec.tie is MedianRule.LOWER
    if spec.theta == 0.0:
        return kernels.cwm_batch(profiles, spec.constants_array(), lower)
    frame = rotate(profiles, -spec.theta)
    med = kernels.cwm_batch(frame, spec.frame_constants(), lower)
    return rotate(med, spec.theta)


def coordinate_wise_median(profile: ProfileLike) -> Point:
    prof = as_profile(profile)
    if prof.n % 2 == 0:
        raise ValueError("coordinate_wise_median needs an odd number of agents; "
                         "use apply_mechanism with an explicit tie rule")
    return apply_mechanism(MechanismSpec.cm(), prof)


def rotated_cm(profile: ProfileLike, theta: float) -> Point:
    prof = as_profile(profile)
    if prof.n % 2 == 0:
        raise ValueError("rotated_cm needs an odd number of agents")
    return apply_mechanism(MechanismSpec.rotated(theta), prof)


def deviation_grid(profile: ProfileLike, resolution: int = 41, inflate: float = 0.5) -> np.ndarray:
    """Axis-aligned ``resolution x resolution`` grid over the inflated bounding box."""
    pts = as_profile(profile).points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo) * (1.0 + inflate)
    # a flat box still needs some room to deviate in
    floor = 0.5 * max(float((hi - lo).max()), 1.0)
    half = np.where(half > 0, half, floor)
    ga = np.linspace(centre[0] - half[0], centre[0] + half[0], resolution)
    gb = np.linspace(centre[1] - half[1], centre[1] + half[1], resolution)
    aa, bb = np.meshgrid(ga, gb, indexing="ij")
    return np.column_stack([aa.ravel(), bb.ravel()])


def outcomes_under_deviation(spec: MechanismSpec, profile: ProfileLike, agent: int, deviations) -> np.ndarray:
    """Mechanism outcome when ``agent`` reports each row of ``deviations`` instead."""
    prof = as_profile(profile)
    devs = np.asarray(deviations, dtype=np.float64).reshape(-1, 2)
    if spec.kind is Kind.GEOMETRIC_MEDIAN:
        stack = np.broadcast_to(prof.points, (devs.shape[0],) + prof.points.shape).copy()
        stack[:, agent, :] = devs
        return mechanism_points(spec, stack)
    lower = spec.tie is MedianRule.LOWER
    if spec.theta == 0.0:
        return kernels.cwm_deviations(prof.points, spec.constants_array(), agent, devs, lower)
    out = kernels.cwm_deviations(rotate(prof.points, -spec.theta), spec.frame_constants(), agent,
                                 rotate(devs, -spec.theta), lower)
    return rotate(out, spec.theta)


def profile_stack(profiles: Sequence[ProfileLike]) -> np.ndarray:
    return np.stack([as_profile(p).points for p in profiles])
