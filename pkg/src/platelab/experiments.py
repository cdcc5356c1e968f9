"""Stability experiments: Cauchy-data gaps on the measurement arc against shape distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import spearmanr

from .errors import PlateLabError, SupportViolation, TrivialData
from .estimates import solve_pair
from .fem.loads import CoupleField
from .fem.solvers import Solution, solve_reference
from .functionals import boundary_h_minus_half, gamma_traces, trace_gap
from .geometry.domain import AprioriData, DomainSpec
from .geometry.measures import hausdorff
from .geometry.mesh import Mesh
from .geometry.mesher import build_mesh
from .tensors import PlateTensor

LoadFactory = Callable[[Mesh], CoupleField]
MIN_MEMBERS = 5
MIN_FIT_ROWS = 4


@dataclass(frozen=True)
class StabilityRow:
    theta: float
    d_H: float
    epsilon: float
    epsilon_tilde: float
    flag: str = ""


@dataclass(frozen=True)
class StabilityCurve:
    """Rows sorted by ``theta``; ``C`` and ``eta`` are NaN unless enough rows lie in the fit range."""

    rows: tuple
    normalization: float
    C: float = float("nan")
    eta: float = float("nan")
    spearman: float = float("nan")
    floor: float = float("nan")
    trace_scale: float = float("nan")
    notes: tuple = ()

    csv_header = ("theta", "d_H", "epsilon", "epsilon_tilde")

    def csv_rows(self) -> Iterable[tuple]:
        for r in self.valid_rows:
            yield (r.theta, r.d_H, r.epsilon, r.epsilon_tilde)

    def footer(self) -> tuple:
        return ("fit", self.C, self.eta)

    @property
    def valid_rows(self) -> list[StabilityRow]:
        return [r for r in self.rows if not r.flag]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.valid_rows])


def _inclusion_boundary(spec: DomainSpec) -> np.ndarray:
    if not spec.inclusions:
        raise ValueError("stability family members need an inclusion")
    return np.vstack([inc.curve.vertices for inc in spec.inclusions])


def _solve_kind(plate: PlateTensor, mesh: Mesh, f: CoupleField, kind: str, inclusion_plate=None) -> Solution:
    if kind == "reference":
        return solve_reference(plate, mesh, f)
    return solve_pair(plate, mesh, f, kind, inclusion_plate)[1]


def _check_load(f: CoupleField) -> None:
    if not f.nontrivial:
        raise TrivialData("boundary couple field vanishes identically")
    if not f.support_in_gamma():
        raise SupportViolation("boundary couple field is not supported inside the measurement arc")


def fit_stability(d_H: np.ndarray, eps_tilde: np.ndarray, rho0: float) -> tuple[float, float]:
    """Fit ``d_H = C rho0 (log|log eps~|)^-eta`` over rows with ``0 < eps~ < 1/e`` and ``d_H > 0``.

    Returns NaNs unless at least four rows are in range; there is no extrapolation.
    """
    d = np.asarray(d_H, dtype=float)
    e = np.asarray(eps_tilde, dtype=float)
    ok = (e > 0) & (e < math.exp(-1)) & (d > 0)
    if ok.sum() < MIN_FIT_ROWS:
        return float("nan"), float("nan")
    x = np.log(np.log(np.abs(np.log(e[ok]))))
    if np.ptp(x) == 0:
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(x, np.log(d[ok] / rho0), 1)
    return float(np.exp(intercept)), float(-slope)


def stability_curve(base: DomainSpec, family: Callable[[float], DomainSpec], thetas: Sequence[float],
                    plate: PlateTensor, load: LoadFactory, a: AprioriData | None = None,
                    kind: str = "rigid", target_h: float = 0.05, inclusion_plate=None) -> StabilityCurve:
    """Affine gap of arc traces and Hausdorff distance for each member ``family(theta)``.

    The ``theta = 0`` member reuses the base mesh (numerical floor); every
    other member is meshed independently.  Traces of a member are evaluated at
    the arc quadrature points of the base mesh.

    Raises
    ------
    TrivialData
        If the couple field vanishes.
    SupportViolation
        If the couple field is not supported inside the arc.
    ValueError
        With fewer than five family members.
    """
    a = AprioriData() if a is None else a
    thetas = sorted(float(t) for t in thetas)
    if len(thetas) < MIN_MEMBERS:
        raise ValueError(f"stability curve needs at least {MIN_MEMBERS} family members")
    base_mesh = build_mesh(base, target_h)
    f = load(base_mesh)
    _check_load(f)
    norm = a.rho0**2 * boundary_h_minus_half(f)
    w1 = _solve_kind(plate, base_mesh, f, kind, inclusion_plate)
    t1 = gamma_traces(w1)
    base_curve = _inclusion_boundary(base)
    rows = []
    for th in thetas:
        spec = base if th == 0 else family(th)
        try:
            d = hausdorff(base_curve, _inclusion_boundary(spec))
            mesh = base_mesh if th == 0 else build_mesh(spec, target_h)
            fm = f if th == 0 else load(mesh)
            w = _solve_kind(plate, mesh, fm, kind, inclusion_plate)
            eps, _ = trace_gap(gamma_traces(w, reference=w1), t1, a.rho0)
        except PlateLabError as exc:
            rows.append(StabilityRow(th, float("nan"), float("nan"), float("nan"), f"skipped: {exc}"))
            continue
        rows.append(StabilityRow(th, d, eps, eps / norm))
    curve = StabilityCurve(tuple(rows), norm)
    good = curve.valid_rows
    C, eta = fit_stability(curve.column("d_H"), curve.column("epsilon_tilde"), a.rho0)
    rho = float("nan")
    if len(good) >= 3:
        rho = float(spearmanr(curve.column("epsilon"), curve.column("d_H")).statistic)
    floor = next((r.epsilon for r in good if r.theta == 0), float("nan"))
    return StabilityCurve(tuple(rows), norm, C, eta, rho, floor, t1.scale())


# uniqueness smoke test -----------------------------------------------------------------


@dataclass(frozen=True)
class UniquenessReport:
    d_H: float
    epsilons: tuple
    identical_floor: float
    mesh_floor: float
    threshold: float
    independent: bool
    notes: tuple = field(default_factory=tuple)

    @property
    def floor(self) -> float:
        return max(self.identical_floor, self.mesh_floor)

    @property
    def distinct(self) -> bool:
        """Every measurement separates the shapes by ``threshold`` times the noise floor."""
        return all(e > self.threshold * self.floor for e in self.epsilons)


def uniqueness_smoke(base: DomainSpec, other: DomainSpec, plate: PlateTensor, loads: Sequence[LoadFactory],
                     a: AprioriData | None = None, kind: str = "rigid", target_h: float = 0.05,
                     threshold: float = 10.0, independent: bool = True,
                     noise_h_factor: float = 0.9) -> UniquenessReport:
    """Check that distinct inclusions produce distinguishable arc data.

    Two floors are measured with the first load: an identical rerun on the
    base mesh (round-off) and the base shape on an independent mesh of size
    ``noise_h_factor * target_h`` (discretization noise).  ``independent``
    records the user's declaration that two loads are linearly independent.
    """
    a = AprioriData() if a is None else a
    if not loads:
        raise ValueError("uniqueness smoke test needs at least one load")
    mb = build_mesh(base, target_h)
    mo = build_mesh(other, target_h)
    mn = build_mesh(base, noise_h_factor * target_h)
    eps, floors = [], []
    for i, load in enumerate(loads):
        fb = load(mb)
        _check_load(fb)
        wb = _solve_kind(plate, mb, fb, kind)
        tb = gamma_traces(wb)
        wo = _solve_kind(plate, mo, load(mo), kind)
        eps.append(trace_gap(gamma_traces(wo, reference=wb), tb, a.rho0)[0])
        if i == 0:
            again = _solve_kind(plate, mb, fb, kind)
            floors.append(trace_gap(gamma_traces(again), tb, a.rho0)[0])
            wn = _solve_kind(plate, mn, load(mn), kind)
            floors.append(trace_gap(gamma_traces(wn, reference=wb), tb, a.rho0)[0])
    d = hausdorff(_inclusion_boundary(base), _inclusion_boundary(other))
    notes = ()
    if d < 0.05 * a.rho0:
        notes = ("shapes closer than 0.05 rho0",)
    return UniquenessReport(d, tuple(eps), floors[0], floors[1], threshold, independent, notes)
