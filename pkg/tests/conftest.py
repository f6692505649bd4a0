import numpy as np
import pytest

from homeostasis import material_point as mp
from homeostasis import presets


@pytest.fixture(scope="session")
def stripe_l2():
    return presets.discovered_weights("stripe", "L2")


@pytest.fixture(scope="session")
def stripe_run(stripe_l2):
    """Stripe protocol on a 0.1 h grid: rest until 17 h, compression after."""
    ew, pw = stripe_l2
    return mp.simulate(presets.stripe_protocol("compress", t_end=40.0, dt=0.1), ew, pw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status:7s} {detail}")
