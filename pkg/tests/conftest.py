import sys

import numpy as np
import pytest

from learncurve.model import WeibullRegParams, sample_array

CASE_STUDY_TRAINEE = WeibullRegParams(0.0722, 1.7859, (-0.0152,))
STANDARD_CASE_STUDY = WeibullRegParams(0.1099, 1.9220, (-0.0201,))
SIM_TRUTH = WeibullRegParams(0.2, 2.0, (-0.05,))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def simulate(params, t, rng, low=13, high=56):
    X = rng.integers(low, high + 1, size=(t, params.d)).astype(float)
    y = sample_array(params.gamma, params.eta, params.beta, X, rng.random(t))
    return y, X


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
