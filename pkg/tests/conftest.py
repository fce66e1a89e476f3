import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from blfmrac.scenario import load_preset
from blfmrac.simulation import simulate

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# Reference values derived independently from the aircraft example data.
S4_P_EIGS = np.array([0.02507733, 0.14113239, 0.31475626, 0.4235949])
S4_X_BAR_MIN = 5.879202855575555


@pytest.fixture(scope="session")
def s4_scenario():
    return load_preset("paper-s4")


@pytest.fixture(scope="session")
def s4_models(s4_scenario):
    return s4_scenario.build()


@pytest.fixture(scope="session")
def s4_run(s4_models):
    loop = s4_models.closed_loop()
    traj, rep = simulate(loop, initial=s4_models.initial, horizon=60.0, dt=1e-3)
    return loop, traj, rep


@pytest.fixture(scope="session")
def s4_baseline_run():
    models = load_preset("paper-s4-robust-mrac").build()
    loop = models.closed_loop()
    traj, rep = simulate(loop, initial=models.initial, horizon=60.0, dt=1e-3)
    return loop, traj, rep


@pytest.fixture(scope="session")
def zero_scenario(s4_scenario):
    return s4_scenario.with_values(**{
        "signals.reference": "zero", "signals.disturbance": "zero",
    })


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
