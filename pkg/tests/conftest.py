import numpy as np
import pytest

from atd.problems import PowerProfile, RidgeOracle

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def cube6(order=2, lipschitz=1.0):
    """f(t) = |t|^3 / 6 in one dimension."""
    return RidgeOracle([[1.0]], [0.0], order, PowerProfile(3), weights=[0.5], lipschitz=lipschitz)


def square(order=1, lipschitz=None):
    """f(t) = t^2."""
    return RidgeOracle([[1.0]], [0.0], order, PowerProfile(2), weights=[2.0],
                       lipschitz=lipschitz if lipschitz is not None else 2.0)


def quartic(lipschitz=6.0):
    """f(t) = t^4 / 4 at order 3."""
    return RidgeOracle([[1.0]], [0.0], 3, PowerProfile(4), lipschitz=lipschitz)


def grid_minimize(F, center, halfwidth, step=1e-4, final=1e-6, points=41):
    """Brute-force minimizer of F near ``center``.

    One dimension: a dense pass at ``step`` over the whole box.  Two
    dimensions: coarse tensor grids shrinking around the best point.  Both
    then refine by local grids until the spacing reaches ``final``.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    d = center.size
    if d == 1:
        ts = np.arange(-halfwidth, halfwidth + step / 2, step) + center[0]
        vals = np.array([F(np.array([t])) for t in ts])
        best = np.array([ts[np.argmin(vals)]])
        width = step
    else:
        best, width = center, halfwidth
    while True:
        axes = [np.linspace(b - width, b + width, points) for b in best]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        vals = np.array([F(z) for z in mesh])
        best = mesh[np.argmin(vals)]
        spacing = 2 * width / (points - 1)
        if spacing <= final:
            return best
        width = 2 * spacing


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
