import numpy as np
import pytest

from phsvk.assembly import Material, mixed_spaces
from phsvk.mesh import interval_mesh, rect_tri_mesh
from phsvk.system import BoundaryInput, PHSystem

# lines printed by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []

ROD = dict(length=3.0, rho0=7.85, young=1.0e9, area=1.0e-4)
BEAM = dict(lx=25.0, ly=1.0, rho0=1.02e-4, lam=329.67, mu=384.62)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def rod_system(n=4, degrees=(2, 2, 1), inputs=None, linear=False):
    spaces = mixed_spaces(interval_mesh(ROD["length"], n), *degrees)
    mat = Material.rod(ROD["rho0"], ROD["young"], ROD["area"])
    return PHSystem.build(spaces, mat, inputs, linear=linear)


def beam_system(nx=5, ny=2, degrees=(1, 1, 0), inputs=None, linear=False, lx=None, ly=None):
    mesh = rect_tri_mesh(lx or BEAM["lx"], ly or BEAM["ly"], nx, ny)
    spaces = mixed_spaces(mesh, *degrees)
    mat = Material.lame(BEAM["rho0"], BEAM["lam"], BEAM["mu"], 2)
    return PHSystem.build(spaces, mat, inputs, linear=linear)


def rod_inputs():
    return BoundaryInput(
        lambda t: np.array([100.0 if t <= 0.2 else 0.0]),
        lambda t: np.array([(1.0 - t / 0.2) * 0.5 if t <= 0.2 else 0.0]),
    )


def beam_inputs(scale=1.0):
    return BoundaryInput(
        lambda t: scale * np.array([0.0, 0.1 * t if t <= 1.0 else 0.0]),
        lambda t: np.zeros(2),
    )


def random_defgrad(system, rng, amplitude=0.3):
    """Coefficients of ``I + amplitude * noise`` in the deformation gradient space."""
    return system.F_identity + amplitude * rng.standard_normal(system.assembler.n_F)


def random_state(system, rng, amplitude=0.3):
    s = system.initial_state()
    s.v = rng.standard_normal(s.v.size)
    s.S = rng.standard_normal(s.S.size)
    s.F = random_defgrad(system, rng, amplitude)
    return s
