import pytest

from nkglab.nonlinearity import NonlinearityModel, PolynomialR, WellsR
from nkglab.radial import RadialGrid

# One pass/fail line per acceptance criterion, printed after the run.
acceptance_log = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_log:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_log:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cubic_quintic():
    """R = -s^3 + s^5: binds at every charge, the workhorse fixture."""
    return NonlinearityModel(
        omega=1.0,
        dimension=3,
        r_spec=PolynomialR((0.0, 0.0, 0.0, -1.0, 0.0, 1.0)),
        p_exponent=3.0,
        q_exponent=5.0,
    )


@pytest.fixture(scope="session")
def quartic_model():
    """R = -s^4 + 0.6 s^5: flat enough near zero that binding needs a finite charge."""
    return NonlinearityModel(
        omega=1.0,
        dimension=3,
        r_spec=PolynomialR((0.0, 0.0, 0.0, 0.0, -1.0, 0.6)),
        p_exponent=4.0,
        q_exponent=5.0,
    )


@pytest.fixture(scope="session")
def deep_well_model():
    """Single smooth well with depth tuned so F vanishes at the center.

    The static energy density touching zero lets droplets of arbitrarily
    large charge form at fixed interior amplitude.
    """
    return NonlinearityModel(
        omega=1.0,
        dimension=3,
        r_spec=WellsR(centers=(2.0,), widths=(1.0,), depths=(0.5,)),
        p_exponent=3.0,
        q_exponent=5.0,
    )


@pytest.fixture(scope="session")
def two_well_model():
    return NonlinearityModel(
        omega=1.0,
        dimension=3,
        r_spec=WellsR(centers=(1.0, 2.5), widths=(0.5, 0.5), depths=(0.40, 0.49)),
        p_exponent=3.0,
        q_exponent=5.0,
    )


@pytest.fixture(scope="session")
def coarse_grid():
    return RadialGrid(30.0, 256)


@pytest.fixture(scope="session")
def mid_grid():
    return RadialGrid(60.0, 1024)


@pytest.fixture(scope="session")
def desk_grid():
    return RadialGrid(60.0, 2048)
