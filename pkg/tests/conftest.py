import numpy as np
import pytest

from platelab.fem.loads import CoupleField
from platelab.fem.solvers import solve_cavity, solve_reference, solve_rigid
from platelab.geometry import DomainSpec, Inclusion, build_mesh, disk
from platelab.tensors import PlateTensor, make_isotropic

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def plate():
    """Isotropic lambda = mu = 1, unit thickness."""
    return PlateTensor(make_isotropic(1.0, 1.0), 1.0)


@pytest.fixture(scope="session")
def unit_plate():
    """Plate tensor equal to the elasticity tensor (thickness 12^(1/3))."""
    return PlateTensor(make_isotropic(1.0, 1.0), 12.0 ** (1 / 3))


def disk_spec(r=0.2, role="rigid", center=(0.0, 0.0), gamma=None):
    return DomainSpec(disk((0.0, 0.0), 1.0), [Inclusion(disk(center, r), role)], gamma)


@pytest.fixture(scope="session")
def disk_mesh():
    return build_mesh(disk_spec(), 0.05)


@pytest.fixture(scope="session")
def disk_solutions(plate, disk_mesh):
    """Reference, rigid and cavity solves for the cos(theta) couple, r = 0.2."""
    f = CoupleField.cos_theta(disk_mesh)
    return {
        "f": f,
        "w0": solve_reference(plate, disk_mesh, f),
        "wR": solve_rigid(plate, disk_mesh, f),
        "wV": solve_cavity(plate, disk_mesh, f),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
