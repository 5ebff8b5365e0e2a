import numpy as np
import pytest

from storagecuts.battery import BatteryParams


def b1(horizon=3, soc_init=0.0, **changes):
    """Reference battery: 10 kW both ways, 5 kWh, lossless, hourly."""
    values = dict(p_dis_max=10.0, p_ch_max=10.0, soc_min=0.0, soc_max=5.0, eta_c=1.0,
                  eta_d=1.0, delta=1.0, soc_init=soc_init, horizon=horizon)
    values.update(changes)
    return BatteryParams(**values)


def rand_battery(rng, horizon, interior=False):
    """Random battery with mixed rates, losses, floors and initial states."""
    smin = float(rng.choice([0.0, rng.uniform(0, 3)]))
    smax = smin + float(rng.uniform(0.5, 10))
    if interior:
        s0 = float(rng.uniform(smin + 0.05 * (smax - smin), smax - 0.05 * (smax - smin)))
    else:
        s0 = float(rng.choice([smin, smax, rng.uniform(smin, smax)]))
    eta_c = float(rng.choice([1.0, rng.uniform(0.7, 1)]))
    eta_d = float(rng.choice([1.0, rng.uniform(0.7, 1)]))
    return BatteryParams(float(rng.uniform(0.2, 8)), float(rng.uniform(0.2, 8)), smin, smax,
                         eta_c, eta_d, float(rng.choice([0.5, 1.0, 2.0])), s0, int(horizon))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
