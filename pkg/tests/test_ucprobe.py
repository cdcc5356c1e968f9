import math

import numpy as np
import pytest

from platelab.errors import DomainEscape, EmptyGrid, RadiusOrder
from platelab.fem import CoupleField, solve_reference, solve_rigid
from platelab.geometry import DomainSpec, build_mesh, disk, rectangle
from platelab.ucprobe import (
    N_GON,
    clearance,
    disk_energy,
    fit_decay,
    inscribed_polygon,
    lps_probe,
    three_sphere_probe,
    vanishing_rate_probe,
)
from tests.conftest import disk_spec

GON_FACTOR = N_GON * math.sin(2 * math.pi / N_GON) / (2 * math.pi)
RHO = (0.05, 0.1, 0.2)
# reference unit-disk solve, cos(theta) couple, target_h = 0.05
PINNED_DELTA = 0.4999999849494815
PINNED_LPS_MIN = 0.06354312452738099


@pytest.fixture(scope="module")
def quadratic(unit_plate):
    """Solution with Hessian diag(1, 0) on the square [-5, 5]^2."""
    m = build_mesh(DomainSpec(rectangle((-5, -5), (5, 5))), 0.5)
    f = CoupleField.manufactured(m, unit_plate.coefficients(), {(2, 0): 0.5})
    return solve_reference(unit_plate, m, f)


@pytest.fixture(scope="module")
def reference(plate):
    m = build_mesh(DomainSpec(disk()), 0.05)
    f = CoupleField.cos_theta(m)
    return solve_reference(plate, m, f), f


@pytest.fixture(scope="module")
def interior_points():
    rng = np.random.default_rng(0)
    rad = np.sqrt(rng.uniform(0, 0.36, 16))
    th = rng.uniform(0, 2 * np.pi, 16)
    return np.c_[rad * np.cos(th), rad * np.sin(th)]


class TestDiskEnergy:
    def test_polygon(self):
        p = inscribed_polygon((1.0, 2.0), 0.5)
        assert len(p) == N_GON
        np.testing.assert_allclose(np.linalg.norm(p - [1.0, 2.0], axis=1), 0.5)

    @pytest.mark.parametrize("r", [0.3, 1.0, 2.5])
    def test_constant_hessian_interior(self, quadratic, r):
        e = disk_energy(quadratic, (0.2, -0.1), r)
        assert e == pytest.approx(math.pi * r**2 * GON_FACTOR, rel=1e-9)
        assert e == pytest.approx(math.pi * r**2, rel=2e-3)

    def test_half_disk_on_straight_side(self, quadratic):
        r = 0.8
        assert disk_energy(quadratic, (5.0, 0.3), r) == pytest.approx(0.5 * math.pi * r**2, rel=5e-3)

    def test_outside_domain(self, quadratic):
        assert disk_energy(quadratic, (20.0, 0.0), 1.0) == 0.0
        assert disk_energy(quadratic, (0.0, 0.0), 0.0) == 0.0

    def test_monotone_in_radius(self, reference, rng):
        s, _ = reference
        for _ in range(20):
            c = rng.uniform(-0.6, 0.6, 2)
            r = np.sort(rng.uniform(0.01, 0.5, 4))
            e = [disk_energy(s, c, x) for x in r]
            assert all(a <= b for a, b in zip(e, e[1:]))

    def test_clearance_sign(self, disk_solutions):
        d = clearance(disk_solutions["wR"], np.array([[0.5, 0.0], [0.0, 0.0], [2.0, 0.0]]))
        assert d[0] == pytest.approx(0.3, abs=2e-3)
        assert d[1] < 0 and d[2] < 0


class TestThreeSphere:
    def test_constant_hessian(self, quadratic):
        rep = three_sphere_probe(quadratic, (0.0, 0.0), 1.0, 2.0, 4.0)
        assert rep.delta_star == pytest.approx(0.5, abs=1e-6)
        assert rep.delta_ref == pytest.approx(math.log(0.5) / math.log(0.25), abs=1e-15)
        assert abs(rep.defect) <= 1e-9

    def test_reference_disk(self, reference):
        rep = three_sphere_probe(reference[0], (0.0, 0.0), 0.2, 0.3, 0.45)
        assert 0 < rep.delta_star < 1 and math.isfinite(rep.defect)
        assert rep.delta_star == pytest.approx(PINNED_DELTA, rel=1e-9)
        assert rep.energies == tuple(sorted(rep.energies))

    def test_scaling_invariance(self, plate, reference):
        s, f = reference
        s2 = solve_reference(plate, s.mesh, f.scaled(3.0))
        a = three_sphere_probe(s, (0.1, 0.05), 0.1, 0.2, 0.3)
        b = three_sphere_probe(s2, (0.1, 0.05), 0.1, 0.2, 0.3)
        assert b.delta_star == pytest.approx(a.delta_star, abs=1e-12)

    @pytest.mark.parametrize("radii", [(0.2, 0.2, 0.3), (0.3, 0.2, 0.4), (0.0, 0.1, 0.2)])
    def test_radius_order(self, reference, radii):
        with pytest.raises(RadiusOrder):
            three_sphere_probe(reference[0], (0, 0), *radii)

    def test_domain_escape(self, reference, disk_solutions):
        with pytest.raises(DomainEscape):
            three_sphere_probe(reference[0], (0.8, 0.0), 0.05, 0.1, 0.3)
        with pytest.raises(DomainEscape):
            three_sphere_probe(disk_solutions["wR"], (0.4, 0.0), 0.05, 0.1, 0.3)

    def test_csv_row(self, quadratic):
        rep = three_sphere_probe(quadratic, (0.0, 0.0), 1.0, 2.0, 4.0)
        assert len(rep.csv_row()) == len(rep.csv_header)


class TestLPS:
    def test_reference_disk(self, reference, interior_points):
        s, f = reference
        rep = lps_probe(s, f, RHO, interior_points)
        assert rep.min_normalized > 0
        assert rep.min_normalized == pytest.approx(PINNED_LPS_MIN, rel=1e-9)
        assert rep.normalization > 0

    def test_data_scaling(self, plate, reference, interior_points):
        s, f = reference
        f2 = f.scaled(2.0)
        s2 = solve_reference(plate, s.mesh, f2)
        a = lps_probe(s, f, RHO, interior_points)
        b = lps_probe(s2, f2, RHO, interior_points)
        np.testing.assert_allclose(b.normalized, a.normalized, rtol=1e-10)

    def test_zero_data_is_degenerate(self, plate, reference, interior_points):
        m = reference[0].mesh
        z = CoupleField.zero(m)
        rep = lps_probe(solve_reference(plate, m, z), z, RHO, interior_points)
        e = rep.energies[np.isfinite(rep.energies)]
        assert e.size and not e.any() and rep.degenerate

    def test_standoff_excludes_pairs(self, reference):
        s, f = reference
        rep = lps_probe(s, f, RHO, np.array([[0.8, 0.0]]))
        assert np.isfinite(rep.energies[0, 0]) and np.isnan(rep.energies[0, 2])

    def test_empty_grid(self, reference):
        s, f = reference
        with pytest.raises(EmptyGrid):
            lps_probe(s, f, RHO, np.array([[0.99, 0.0]]))
        with pytest.raises(EmptyGrid):
            lps_probe(s, f, RHO, np.zeros((0, 2)))

    def test_fit_on_decaying_envelope(self):
        rho = np.array([0.05, 0.1, 0.2, 0.4])
        env = 2.0 * np.exp(-0.3 * rho**-1.5)
        A, B, C, deg = fit_decay(rho, env)
        # C is the envelope maximum, so the largest radius carries no slope information
        assert not deg and C == env.max() and A > 0 and B > 0

    def test_fit_degenerate(self):
        assert fit_decay(np.array([0.1]), np.array([1.0]))[3]
        assert fit_decay(np.array([0.1, 0.2]), np.zeros(2))[3]


@pytest.fixture(scope="module")
def rigid(disk_solutions):
    return disk_solutions["wR"]


class TestVanishingRate:
    def test_energies_increase(self, rigid):
        rep = vanishing_rate_probe(rigid, 1, (0.02, 0.05, 0.1, 0.2))
        assert len(rep.points) == 16
        assert np.all(np.diff(rep.energies, axis=1) > 0)
        assert not rep.degenerate and rep.B > 0

    def test_zero_data(self, plate, rigid):
        z = CoupleField.zero(rigid.mesh)
        rep = vanishing_rate_probe(solve_rigid(plate, rigid.mesh, z), 1, (0.05, 0.1))
        assert not rep.energies.any()
