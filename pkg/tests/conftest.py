import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from bdt.core import Dataset  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def small_data():
    """Eight hand-made rows, two features, a clean split at x0 = 0.5."""
    X = np.array([
        [0.1, 3.0], [0.2, 1.0], [0.3, 2.0], [0.4, 5.0],
        [0.6, 4.0], [0.7, 0.5], [0.8, 2.5], [0.9, 3.5],
    ])
    y = np.array([0, 0, 0, 1, 1, 1, 1, 0])
    return Dataset(X, y, ("a", "b"))


@pytest.fixture(scope="session")
def stca_small():
    from bdt.data import SynthConfig, generate_synthetic_stca

    return generate_synthetic_stca(SynthConfig(pair_count=10, cycles_per_pair=30, seed=3))


def random_data(seed, n=20, m=3, C=2):
    rng = np.random.default_rng(seed)
    X = np.round(rng.uniform(0, 10, (n, m)), 2)
    y = rng.integers(0, C, n)
    y[:C] = np.arange(C)
    return Dataset(X, y, tuple(f"f{j}" for j in range(m)), C)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
