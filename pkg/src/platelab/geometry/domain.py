"""Domain descriptions: closed curves, inclusions, the measurement arc and a-priori data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError, EmptyCurve, MeshFailure

DEFAULT_RESOLUTION = 256
ROLES = ("rigid", "cavity", "elastic")


@dataclass(frozen=True)
class Curve:
    """Closed polygon, stored counterclockwise without repeating the first vertex."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise EmptyCurve("a closed curve needs at least three vertices")
        if np.allclose(v[0], v[-1]):
            v = v[:-1]
        if signed_area(v) < 0:
            # keep vertex 0 as the arclength origin
            v = np.vstack([v[:1], v[:0:-1]])
        object.__setattr__(self, "vertices", v)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    @property
    def perimeter(self) -> float:
        return float(np.linalg.norm(self.edges(), axis=1).sum())

    @property
    def diameter(self) -> float:
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cr = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a = cr.sum() / 2
        return np.array([((v[:, 0] + w[:, 0]) * cr).sum(), ((v[:, 1] + w[:, 1]) * cr).sum()]) / (6 * a)

    def arclength(self) -> np.ndarray:
        """Cumulative arclength at each vertex, starting at 0 on vertex 0."""
        return np.concatenate([[0.0], np.cumsum(np.linalg.norm(self.edges(), axis=1))[:-1]])

    def point_at(self, s: np.ndarray) -> np.ndarray:
        """Points at arclength ``s`` (taken modulo the perimeter)."""
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        cum = np.append(self.arclength(), self.perimeter)
        i = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, self.n - 1)
        seg = self.edges()
        ln = np.linalg.norm(seg, axis=1)
        u = (s - cum[i]) / ln[i]
        return self.vertices[i] + u[:, None] * seg[i]

    def sample(self, spacing: float) -> np.ndarray:
        """Points along the polygon with spacing at most ``spacing``, vertices included."""
        out = []
        v, seg = self.vertices, self.edges()
        for p, d in zip(v, seg):
            k = max(1, int(math.ceil(np.linalg.norm(d) / spacing)))
            u = np.arange(k) / k
            out.append(p + u[:, None] * d)
        return np.vstack(out)

    def translated(self, d: Sequence[float]) -> "Curve":
        return Curve(self.vertices + np.asarray(d, dtype=float))

    def scaled(self, s: float, about: Sequence[float] = (0.0, 0.0)) -> "Curve":
        c = np.asarray(about, dtype=float)
        return Curve(c + s * (self.vertices - c))

    def contains(self, points: np.ndarray) -> np.ndarray:
        return points_in_polygon(points, self.vertices)


def signed_area(v: np.ndarray) -> float:
    w = np.roll(v, -1, axis=0)
    return float((v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]).sum() / 2)


def points_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd point-in-polygon test, vectorized over points."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = p[:, 0:1], p[:, 1:2]
    a = poly[None, :, :]
    b = np.roll(poly, -1, axis=0)[None, :, :]
    ya, yb = a[..., 1], b[..., 1]
    crosses = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = a[..., 0] + (y - ya) * (b[..., 0] - a[..., 0]) / (yb - ya)
    return (crosses & (x < xint)).sum(axis=1) % 2 == 1


def segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Exact distance from each point to the union of segments ``[a_i, b_i]``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = b - a
    dd = np.maximum((d**2).sum(1), 1e-300)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk, None, :]
        u = np.clip(((p - a) * d).sum(-1) / dd, 0.0, 1.0)
        q = a + u[..., None] * d
        out[s:s + chunk] = np.sqrt(((p - q) ** 2).sum(-1)).min(axis=1)
    return out


def curve_distance(points: np.ndarray, curve: Curve) -> np.ndarray:
    v = curve.vertices
    return segment_distance(points, v, np.roll(v, -1, axis=0))


# shape constructors -------------------------------------------------------


def disk(center: Sequence[float] = (0.0, 0.0), radius: float = 1.0,
         resolution: int = DEFAULT_RESOLUTION) -> Curve:
    return ellipse(center, radius, radius, 0.0, resolution)


def ellipse(center: Sequence[float], a: float, b: float, angle: float = 0.0,
            resolution: int = DEFAULT_RESOLUTION) -> Curve:
    if not (a > 0 and b > 0):
        raise ConfigError("ellipse semi-axes must be positive")
    t = 2 * np.pi * np.arange(resolution) / resolution
    c, s = math.cos(angle), math.sin(angle)
    x, y = a * np.cos(t), b * np.sin(t)
    return Curve(np.c_[center[0] + c * x - s * y, center[1] + s * x + c * y])


def rectangle(lower: Sequence[float], upper: Sequence[float]) -> Curve:
    (x0, y0), (x1, y1) = lower, upper
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("rectangle corners must satisfy lower < upper")
    return Curve(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))


def polygon(vertices: Sequence[Sequence[float]]) -> Curve:
    return Curve(np.asarray(vertices, dtype=float))


def curve_from_spec(spec: dict) -> Curve:
    """Build a curve from a plain dictionary (config-file shape block)."""
    kind = spec.get("kind")
    res = int(spec.get("resolution", DEFAULT_RESOLUTION))
    if kind == "disk":
        return disk(spec.get("center", (0.0, 0.0)), spec["radius"], res)
    if kind == "ellipse":
        return ellipse(spec.get("center", (0.0, 0.0)), spec["a"], spec["b"], spec.get("angle", 0.0), res)
    if kind == "rectangle":
        return rectangle(spec["lower"], spec["upper"])
    if kind == "polygon":
        return polygon(spec["vertices"])
    raise ConfigError(f"unknown shape kind {kind!r}")


# domain ---------------------------------------------------------------------


@dataclass(frozen=True)
class Inclusion:
    curve: Curve
    role: str = "rigid"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"inclusion role must be one of {ROLES}, got {self.role!r}")


@dataclass(frozen=True)
class DomainSpec:
    """Plate midplane with inclusions and a measurement arc on the outer boundary.

    ``gamma`` holds start and end arclength fractions of the outer boundary,
    measured counterclockwise from outer vertex 0.  ``None`` means the whole
    boundary.
    """

    outer: Curve
    inclusions: tuple = ()
    gamma: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple(self.inclusions))
        if self.gamma is not None:
            g0, g1 = map(float, self.gamma)
            if not (0.0 <= g0 < g1 <= 1.0):
                raise ConfigError(f"gamma fractions must satisfy 0 <= start < end <= 1, got {self.gamma}")
            object.__setattr__(self, "gamma", (g0, g1))

    def validate(self) -> None:
        """Check containment and disjointness of the inclusions.

        Raises
        ------
        MeshFailure
            If an inclusion touches or crosses the outer boundary or another
            inclusion.
        """
        outer = self.outer
        for k, inc in enumerate(self.inclusions, start=1):
            v = inc.curve.vertices
            if not outer.contains(v).all() or curve_distance(v, outer).min() <= 0.0:
                raise MeshFailure(f"inclusion {k} is not strictly inside the outer boundary")
            if curve_distance(outer.vertices, inc.curve).min() <= 0.0:
                raise MeshFailure(f"inclusion {k} touches the outer boundary")
            for j, other in enumerate(self.inclusions[k:], start=k + 1):
                w = other.curve.vertices
                if (inc.curve.contains(w).any() or other.curve.contains(v).any()
                        or curve_distance(w, inc.curve).min() <= 0.0):
                    raise MeshFailure(f"inclusions {k} and {j} overlap")

    def with_inclusions(self, inclusions) -> "DomainSpec":
        return DomainSpec(self.outer, tuple(inclusions), self.gamma)

    def gamma_length(self) -> float:
        if self.gamma is None:
            return self.outer.perimeter
        return (self.gamma[1] - self.gamma[0]) * self.outer.perimeter


@dataclass(frozen=True)
class AprioriData:
    """User-declared a-priori constants.  Only ``rho0`` carries units (length)."""

    rho0: float = 1.0
    M0: float = 1.0
    M1: float = 10.0
    d0: float = 1.0
    h1: float = 0.1
    L: float = 1.0
    Q: float = 1.0
    r: float = 1.0
    delta0: float = 0.5
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("rho0", "M0", "M1", "d0", "h1", "L", "Q", "r", "delta0"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"a-priori constant {name} must be positive, got {v!r}")
        if not self.delta0 < 1:
            raise ConfigError("delta0 must lie in (0, 1)")

    def check_domain(self, spec: DomainSpec) -> list[str]:
        """Return warnings for declarations that can be checked against the domain."""
        warnings = []
        if spec.outer.area > self.M1 * self.rho0**2:
            warnings.append("area(Omega) exceeds M1 rho0^2")
        if spec.gamma is not None and spec.gamma_length() > (1 - self.delta0) * spec.outer.perimeter:
            warnings.append("measurement arc longer than (1 - delta0) |boundary|")
        for k, inc in enumerate(spec.inclusions, start=1):
            if curve_distance(inc.curve.vertices, spec.outer).min() < self.rho0:
                warnings.append(f"inclusion {k} closer than rho0 to the outer boundary")
        return warnings


@dataclass(frozen=True)
class AffineFunction:
    """``g(x1, x2) = a x1 + b x2 + c``."""

    a: float
    b: float
    c: float

    def __call__(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        return self.a * p[:, 0] + self.b * p[:, 1] + self.c

    @property
    def gradient(self) -> np.ndarray:
        return np.array([self.a, self.b])

    def normal_derivative(self, normals: np.ndarray) -> np.ndarray:
        return np.atleast_2d(normals) @ self.gradient

    def __add__(self, other: "AffineFunction") -> "AffineFunction":
        return AffineFunction(self.a + other.a, self.b + other.b, self.c + other.c)
