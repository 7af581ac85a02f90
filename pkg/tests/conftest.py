import numpy as np
import pytest

from torsolve.geometry import SectionShape
from torsolve.material import BilinearCurve, TtoFgm
from torsolve.plasticity import SolverOptions, TorsionModel

STEEL = BilinearCurve(E=210600.0, nu=0.3, sigma_y=24.0, E_h=0.0)
FAST = SolverOptions(jacobian="analytic")


def fgm(k, q=np.inf):
    return TtoFgm(E_c=5000.0, nu_c=0.25, E_m=3000.0, nu_m=0.25, sigma_ym=5.0, E_mh=500.0, k=k, q=q, h=10.0)


@pytest.fixture(scope="session")
def rect():
    return SectionShape.rectangle(5.0, 10.0)


@pytest.fixture(scope="session")
def tri():
    return SectionShape.equilateral_triangle(10.0)


@pytest.fixture(scope="session")
def rect_coarse(rect):
    """Reduced-resolution steel rectangle for quick behavioural checks."""
    return TorsionModel(rect, STEEL, n_elements=120, m_target=162, options=FAST)


@pytest.fixture(scope="session")
def rect_fine(rect):
    return TorsionModel(rect, STEEL, n_elements=300, m_target=450, options=FAST)


RECT_RATIOS = (0.5, 1.09, 1.5, 1.9, 2.18, 2.45, 3.0, 4.75)


@pytest.fixture(scope="session")
def rect_sweep(rect_fine):
    return rect_fine.sweep_ratios(RECT_RATIOS, keep_states=True)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
