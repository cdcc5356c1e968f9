"""Plane elasticity and plate tensors, the quartic symbol and the dichotomy test.

A plane elasticity tensor with full minor and major symmetry has six
independent cartesian components::

    C1111 = A0          C1122 = B0          C1112 = C0
    C2212 = D0          C1212 = E0          C2222 = F0

Storing only the six-tuple enforces the symmetries by construction.  Acting on
symmetric 2x2 matrices written as ``(A11, A22, sqrt(2) A12)`` the tensor is the
3x3 (Mandel) matrix returned by :meth:`ElasticityTensor.mandel`; with this
scaling ``CA . A`` is the plain quadratic form and ``|A|`` the euclidean norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConvexityViolation, NonPositiveLeadingCoefficient

SQRT2 = math.sqrt(2.0)
COEFFICIENT_NAMES = ("A0", "B0", "C0", "D0", "E0", "F0")


@dataclass(frozen=True)
class ElasticityTensor:
    A0: float
    B0: float
    C0: float
    D0: float
    E0: float
    F0: float
    M: float | None = None  # declared regularity bound, metadata only

    @classmethod
    def from_array(cls, a: Sequence[float], M: float | None = None) -> "ElasticityTensor":
        a = [float(v) for v in a]
        if len(a) != 6:
            raise ValueError("expected six coefficients A0..F0")
        return cls(*a, M=M)

    def as_array(self) -> np.ndarray:
        return np.array([self.A0, self.B0, self.C0, self.D0, self.E0, self.F0])

    def mandel(self) -> np.ndarray:
        return mandel_matrices(self.as_array()[None, :])[0]

    def components(self) -> np.ndarray:
        """Full 2x2x2x2 array ``C[i, j, k, l]``."""
        A0, B0, C0, D0, E0, F0 = self.as_array()
        c = np.empty((2, 2, 2, 2))
        c[0, 0, 0, 0] = A0
        c[1, 1, 1, 1] = F0
        c[0, 0, 1, 1] = c[1, 1, 0, 0] = B0
        for i, j, k, l in [(0, 0, 0, 1), (0, 0, 1, 0), (0, 1, 0, 0), (1, 0, 0, 0)]:
            c[i, j, k, l] = C0
        for i, j, k, l in [(1, 1, 0, 1), (1, 1, 1, 0), (0, 1, 1, 1), (1, 0, 1, 1)]:
            c[i, j, k, l] = D0
        for i, j, k, l in [(0, 1, 0, 1), (0, 1, 1, 0), (1, 0, 0, 1), (1, 0, 1, 0)]:
            c[i, j, k, l] = E0
        return c

    def apply(self, A: np.ndarray) -> np.ndarray:
        """Return ``C A`` for a symmetric 2x2 matrix ``A``."""
        return np.einsum("ijkl,kl->ij", self.components(), np.asarray(A, dtype=float))

    def scaled(self, s: float) -> "ElasticityTensor":
        return ElasticityTensor.from_array(s * self.as_array(), M=self.M)


def make_isotropic(lam: float, mu: float) -> ElasticityTensor:
    """Isotropic tensor ``lam d_ij d_kl + mu (d_ik d_jl + d_il d_jk)``.

    Raises
    ------
    ConvexityViolation
        If the result is not strongly convex (needs ``mu > 0`` and
        ``lam + mu > 0``).
    """
    t = ElasticityTensor(lam + 2 * mu, lam, 0.0, 0.0, mu, lam + 2 * mu)
    gamma = convexity_margin(t)
    if gamma <= 0:
        raise ConvexityViolation(
            f"isotropic tensor with lambda={lam}, mu={mu} has convexity margin {gamma:g}"
        )
    return t


def mandel_matrices(coeffs: np.ndarray) -> np.ndarray:
    """Batch of 3x3 Mandel matrices from an ``(n, 6)`` coefficient array."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    A0, B0, C0, D0, E0, F0 = coeffs.T
    m = np.empty((coeffs.shape[0], 3, 3))
    m[:, 0, 0] = A0
    m[:, 1, 1] = F0
    m[:, 2, 2] = 2 * E0
    m[:, 0, 1] = m[:, 1, 0] = B0
    m[:, 0, 2] = m[:, 2, 0] = SQRT2 * C0
    m[:, 1, 2] = m[:, 2, 1] = SQRT2 * D0
    return m


def convexity_margin(t: ElasticityTensor | np.ndarray) -> float:
    """Largest ``gamma`` with ``CA . A >= gamma |A|^2`` for all symmetric ``A``.

    This is the smallest eigenvalue of the Mandel matrix.  It may be
    non-positive; callers decide whether that is fatal.
    """
    m = t.mandel() if isinstance(t, ElasticityTensor) else mandel_matrices(t)[0]
    return float(np.linalg.eigvalsh(m)[0])


def convexity_margins(coeffs: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(mandel_matrices(coeffs))[:, 0]


@dataclass(frozen=True)
class PlateTensor:
    """Plate tensor ``(h^3 / 12) C`` for a plate of thickness ``h``."""

    tensor: "ElasticityTensor | TensorField | RegionTensor"
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"plate thickness must be positive, got {self.h}")

    @property
    def factor(self) -> float:
        return self.h**3 / 12.0

    def coefficients(self) -> np.ndarray:
        """Plate coefficients for a constant tensor."""
        if not isinstance(self.tensor, ElasticityTensor):
            raise TypeError("coefficients() needs a constant elasticity tensor")
        return self.factor * self.tensor.as_array()

    def coefficients_at(self, points: np.ndarray, regions: np.ndarray | None = None) -> np.ndarray:
        return self.factor * field_coefficients(self.tensor, points, regions)

    def mandel_at(self, points: np.ndarray, regions: np.ndarray | None = None) -> np.ndarray:
        return mandel_matrices(self.coefficients_at(points, regions))


class TensorField:
    """Spatially varying elasticity tensor given by a function of position.

    ``func`` receives an ``(n, 2)`` array of points and returns an ``(n, 6)``
    coefficient array.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], M: float | None = None):
        self.func = func
        self.M = M

    @classmethod
    def constant(cls, t: ElasticityTensor) -> "TensorField":
        c = t.as_array()
        return cls(lambda p: np.tile(c, (len(p), 1)), M=t.M)

    @classmethod
    def blend(cls, t0: ElasticityTensor, t1: ElasticityTensor,
              weight: Callable[[np.ndarray], np.ndarray]) -> "TensorField":
        """Convex combination ``(1 - s) t0 + s t1`` with ``s = weight(points)``."""
        c0, c1 = t0.as_array(), t1.as_array()

        def func(p):
            s = np.clip(np.asarray(weight(p), dtype=float), 0.0, 1.0)[:, None]
            return (1 - s) * c0 + s * c1

        return cls(func)

    def coefficients_at(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.asarray(self.func(points), dtype=float)
        if out.shape != (len(points), 6):
            raise ValueError(f"tensor field returned shape {out.shape}, expected ({len(points)}, 6)")
        return out


@dataclass(frozen=True)
class RegionTensor:
    """Piecewise-constant tensor keyed by mesh region tag."""

    regions: dict
    default: ElasticityTensor | None = None

    def tensor_for(self, tag: int) -> ElasticityTensor:
        if tag in self.regions:
            return self.regions[tag]
        if self.default is None:
            raise KeyError(f"no tensor for region {tag}")
        return self.default

    def coefficients_for(self, regions: np.ndarray) -> np.ndarray:
        regions = np.asarray(regions, dtype=int)
        out = np.empty((len(regions), 6))
        for tag in np.unique(regions):
            out[regions == tag] = self.tensor_for(int(tag)).as_array()
        return out


def field_coefficients(t, points: np.ndarray, regions: np.ndarray | None = None) -> np.ndarray:
    """Evaluate any supported tensor description at points (and region tags)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(t, ElasticityTensor):
        return np.tile(t.as_array(), (len(points), 1))
    if isinstance(t, TensorField):
        return t.coefficients_at(points)
    if isinstance(t, RegionTensor):
        if regions is None:
            raise ValueError("a region-keyed tensor needs region tags")
        return t.coefficients_for(regions)
    raise TypeError(f"unsupported tensor description {type(t).__name__}")


# ---------------------------------------------------------------------------
# quartic symbol and dichotomy condition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolQuartic:
    a0: float
    a1: float
    a2: float
    a3: float
    a4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.a2, self.a3, self.a4])

    def scaled(self, s: float) -> "SymbolQuartic":
        return SymbolQuartic(*(s * self.as_array()))


def symbol_coefficients(t: ElasticityTensor | Sequence[float]) -> SymbolQuartic:
    A0, B0, C0, D0, E0, F0 = t.as_array() if isinstance(t, ElasticityTensor) else t
    return SymbolQuartic(A0, 4 * C0, 2 * B0 + 4 * E0, 4 * D0, F0)


def dichotomy_matrix(q: SymbolQuartic | Sequence[float]) -> np.ndarray:
    """The 7x7 matrix S: three shifted rows of the symbol, four of its derivative."""
    a0, a1, a2, a3, a4 = q.as_array() if isinstance(q, SymbolQuartic) else q
    s = np.zeros((7, 7))
    for r in range(3):
        s[r, r:r + 5] = (a0, a1, a2, a3, a4)
    for r in range(4):
        s[3 + r, r:r + 4] = (4 * a0, 3 * a1, 2 * a2, a3)
    return s


def det_full_pivot(a: np.ndarray) -> float:
    """Determinant by Gaussian elimination with complete pivoting."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    det = 1.0
    for k in range(n):
        sub = np.abs(a[k:, k:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        i += k
        j += k
        if a[i, j] == 0.0:
            return 0.0
        if i != k:
            a[[k, i]] = a[[i, k]]
            det = -det
        if j != k:
            a[:, [k, j]] = a[:, [j, k]]
            det = -det
        piv = a[k, k]
        det *= piv
        if k + 1 < n:
            f = a[k + 1:, k] / piv
            a[k + 1:, k:] -= np.outer(f, a[k, k:])
    return float(det)


def dichotomy_determinant(q: SymbolQuartic | Sequence[float]) -> tuple[float, float]:
    """Return ``(det S, max|S_ij|)``."""
    s = dichotomy_matrix(q)
    return det_full_pivot(s), float(np.max(np.abs(s)))


def dichotomy_value(q: SymbolQuartic | Sequence[float]) -> float:
    """``|det S| / a0``; zero exactly when the symbol has a repeated root."""
    a0 = q.a0 if isinstance(q, SymbolQuartic) else q[0]
    if not a0 > 0:
        raise NonPositiveLeadingCoefficient(f"leading symbol coefficient a0={a0:g} must be positive")
    det, _ = dichotomy_determinant(q)
    return abs(det) / a0


class Dichotomy(str, Enum):
    POSITIVE = "PositiveEverywhere"
    ZERO = "ZeroEverywhere"
    VIOLATED = "Violated"


@dataclass(frozen=True)
class DichotomyReport:
    points: np.ndarray
    values: np.ndarray           # D(x) at each sample
    determinants: np.ndarray     # det S(x)
    zero_mask: np.ndarray        # samples judged D = 0
    classification: Dichotomy
    delta1: float | None
    tol: float
    sampling_note: str = field(
        default="dichotomy is checked on a finite sample set, not on all of R^2")

    @property
    def offending_points(self) -> np.ndarray:
        if self.classification is not Dichotomy.VIOLATED:
            return np.empty((0, 2))
        # the minority pattern is reported as offending
        n_zero = int(self.zero_mask.sum())
        bad = self.zero_mask if n_zero <= len(self.zero_mask) - n_zero else ~self.zero_mask
        return self.points[bad]

    csv_header = ("x", "y", "D", "det_S", "is_zero", "classification")

    def csv_rows(self) -> Iterable[tuple]:
        for p, v, d, z in zip(self.points, self.values, self.determinants, self.zero_mask):
            yield (p[0], p[1], v, d, int(z), self.classification.value)


def classify_dichotomy(field_or_tensors, samples: np.ndarray, tol: float = 1e-9,
                       regions: np.ndarray | None = None) -> DichotomyReport:
    """Evaluate the dichotomy condition on a finite sample of points.

    A sample counts as ``D = 0`` when ``|det S| <= tol * max|S_ij|^7``.  The
    report is ``PositiveEverywhere`` if no sample is zero, ``ZeroEverywhere`` if
    all are, and ``Violated`` otherwise.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("classify_dichotomy needs at least one sample point")
    coeffs = field_coefficients(field_or_tensors, samples, regions)
    n = len(samples)
    values = np.empty(n)
    dets = np.empty(n)
    zero = np.empty(n, dtype=bool)
    for i, c in enumerate(coeffs):
        q = symbol_coefficients(c)
        values[i] = dichotomy_value(q)
        det, smax = dichotomy_determinant(q)
        dets[i] = det
        zero[i] = abs(det) <= tol * smax**7
    if not zero.any():
        cls, delta1 = Dichotomy.POSITIVE, float(values.min())
    elif zero.all():
        cls, delta1 = Dichotomy.ZERO, None
    else:
        cls, delta1 = Dichotomy.VIOLATED, None
    return DichotomyReport(samples, values, dets, zero, cls, delta1, tol)
