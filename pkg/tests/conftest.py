import numpy as np
import pytest

from surfbench.dynamics import PRESETS, SurfaceParams
from surfbench.kinematics import JumpCycle, LegModel
from surfbench.simulation import simulate

# a stiff, well-damped floor used wherever a "rigid" surface is called for
RIGID = SurfaceParams(mu=0.9, k_n=3.0e5, c_n=150.0, name="rigid")


@pytest.fixture(scope="session")
def leg():
    return LegModel()


@pytest.fixture(scope="session")
def tile_log(leg):
    """Ten seconds of hopping on tile at one hop per second, with ground truth."""
    return simulate(leg, PRESETS[2], JumpCycle(period=1.0), 10.0, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_model(window=20, hidden=4, classes=3, components=4, seed=0):
    """Random small pipeline model (identity-like preprocessing)."""
    from surfbench.model import init_model

    rng = np.random.default_rng(seed)
    comps = np.linalg.qr(rng.standard_normal((6, 6)))[0][:components]
    scaler = (rng.normal(size=6), rng.uniform(0.5, 2.0, size=6))
    names = tuple(f"c{k}" for k in range(classes))
    return init_model(scaler, (rng.normal(size=6), comps), names, hidden, window, rng=rng)


# acceptance criteria report their verdicts here; printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
