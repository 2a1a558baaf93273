"""Planar points, profiles, norm orders and the scalar median."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Union

import numpy as np

from . import kernels

# Absolute tolerance for comparisons against closed-form constants.
ABS_TOL = 1e-9


class Point(NamedTuple):
    a: float
    b: float


class MedianRule(enum.Enum):
    LOWER = "lower"
    UPPER = "upper"

    @classmethod
    def parse(cls, value) -> "MedianRule":
        if isinstance(value, MedianRule):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"median rule must be 'lower' or 'upper', got {value!r}") from None

    def flipped(self) -> "MedianRule":
        return MedianRule.UPPER if self is MedianRule.LOWER else MedianRule.LOWER


@dataclass(frozen=True)
class NormOrder:
    """Exponent of the social cost; ``NormOrder.INFINITY`` is the max-cost case.

    The infinite case is stored as ``math.inf`` but every consumer branches
    on :attr:`is_infinite` and evaluates an exact maximum.
    """

    value: float

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v) or v < 1.0:
            raise ValueError(f"norm order must be >= 1 or infinity, got {self.value!r}")
        object.__setattr__(self, "value", v)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    @classmethod
    def parse(cls, value) -> "NormOrder":
        if isinstance(value, NormOrder):
            return value
        if isinstance(value, str):
            text = value.strip().lower()
            if text in ("inf", "+inf", "infinity", "∞"):
                return cls.INFINITY
            value = float(text)
        return cls(float(value))

    def __str__(self):
        return "inf" if self.is_infinite else format(self.value, "g")


NormOrder.INFINITY = NormOrder(math.inf)

NormLike = Union[NormOrder, float, int, str]


@dataclass(frozen=True, eq=False)
class Profile:
    """An ordered, immutable list of agent ideal points stored as an ``(n, 2)`` array."""

    points: np.ndarray

    def __post_init__(self):
        arr = np.array(self.points, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"profile must have shape (n, 2), got {np.shape(self.points)}")
        if arr.shape[0] < 1:
            raise ValueError("profile must contain at least one point")
        if not np.isfinite(arr).all():
            raise ValueError("profile coordinates must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.n

    def __getitem__(self, i) -> Point:
        row = self.points[i]
        return Point(float(row[0]), float(row[1]))

    def __iter__(self):
        for row in self.points:
            yield Point(float(row[0]), float(row[1]))

    def __eq__(self, other):
        if not isinstance(other, Profile):
            return NotImplemented
        return self.points.shape == other.points.shape and bool((self.points == other.points).all())

    def __hash__(self):
        return hash(self.points.tobytes())

    def __repr__(self):
        pts = ", ".join(f"({a:.6g}, {b:.6g})" for a, b in self)
        return f"Profile([{pts}])"

    def as_array(self) -> np.ndarray:
        return self.points.copy()

    def with_point(self, i: int, point) -> "Profile":
        arr = self.as_array()
        arr[i] = point
        return Profile(arr)

    def translated(self, v) -> "Profile":
        return Profile(self.points + np.asarray(v, dtype=np.float64))

    def scaled(self, s: float) -> "Profile":
        return Profile(self.points * float(s))

    def diameter(self) -> float:
        d = self.points[:, None, :] - self.points[None, :, :]
        return float(np.hypot(d[..., 0], d[..., 1]).max())

    def to_json(self) -> str:
        return dumps({"points": self.points.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Profile":
        data = json.loads(text)
        if not isinstance(data, dict) or "points" not in data:
            raise ValueError("profile document must be an object with a 'points' field")
        return cls(np.asarray(data["points"], dtype=np.float64))


ProfileLike = Union[Profile, np.ndarray, Iterable]


def as_profile(profile: ProfileLike) -> Profile:
    return profile if isinstance(profile, Profile) else Profile(profile)


def distance(y, z) -> float:
    return math.hypot(y[0] - z[0], y[1] - z[1])


def social_cost(y, profile: ProfileLike, p: NormLike = 1) -> float:
    p = NormOrder.parse(p)
    prof = as_profile(profile)
    return kernels.social_cost(y, prof.points, 1.0 if p.is_infinite else p.value, p.is_infinite)


def median_1d(values, rule: MedianRule = MedianRule.LOWER) -> float:
    """Median of ``values``; for even length ``rule`` picks the lower or upper middle.

    Infinite entries take part as order-statistic sentinels.
    """
    rule = MedianRule.parse(rule)
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValueError("median of an empty sequence")
    k = v.size // 2
    if v.size % 2 == 0 and rule is MedianRule.LOWER:
        k -= 1
    return float(v[k])


def format_float(x: float) -> str:
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    text = format(float(x), ".17g")
    return "0" if text == "-0" else text


def dumps(obj, indent: int | None = None) -> str:
    """JSON with every float written to 17 significant digits."""
    return _dump(obj, indent, 0)


def _dump(obj, indent, level):
    if isinstance(obj, (np.floating, float)) and not isinstance(obj, bool):
        if math.isnan(obj) or math.isinf(obj):
            return json.dumps(format_float(float(obj)) if not math.isnan(obj) else None)
        return format_float(float(obj))
    if isinstance(obj, (np.integer,)):
        return str(int(obj))
    if isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        items = [json.dumps(str(k)) + ": " + _dump(v, indent, level + 1) for k, v in obj.items()]
        return _join(items, "{", "}", indent, level)
    if isinstance(obj, (list, tuple)):
        items = [_dump(v, indent, level + 1) for v in obj]
        # flat lists such as coordinate pairs stay on one line
        flat = not any(isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj)
        return _join(items, "[", "]", None if flat else indent, level)
    return json.dumps(obj)


def _join(items, open_, close, indent, level):
    if not items:
        return open_ + close
    if indent is None:
        return open_ + ", ".join(items) + close
    pad = " " * (indent * (level + 1))
    return open_ + "\n" + ",\n".join(pad + it for it in items) + "\n" + " " * (indent * level) + close


def read_profile(path) -> Profile:
    return Profile.from_json(Path(path).read_text(encoding="utf-8"))


def write_profile(profile: ProfileLike, path) -> None:
    Path(path).write_text(as_profile(profile).to_json() + "\n", encoding="utf-8")
