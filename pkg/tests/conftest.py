from __future__ import annotations

import pytest

from ivsysid.dynamics import LorenzParams, integrate


@pytest.fixture(scope="session")
def lorenz_trajectory():
    # the benchmark-sized noiseless path; integrated once per test session
    return integrate(LorenzParams(), (-8.0, 8.0, 27.0), 1e-3, 100_000, substeps=10)
