import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nfisac.errors import RankDeficientBlock
from nfisac.scenario import ArraySpec, ScenarioConfig, TargetSpec, UserSpec, multi_target_bistatic

settings.register_profile("default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_rank_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientBlock)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_layout(n_x=3, n_y=3, sinr_db=25.0, **kw):
    """Two targets and one user in front of facing 1.5 GHz arrays 1.205 m apart."""
    return multi_target_bistatic(n_x, n_y, 1.5e9, 1.205, [(0, 0.75), (0.25, 1 / 3)], [(0, 0.25)], sinr_db=sinr_db, **kw)


def generic_config(n=3, m=2, K=2, U=1, **kw):
    """An asymmetric layout with complex reflections and a skewed Rx array."""
    fields = dict(
        carrier_hz=28e9,
        tx=ArraySpec(n, n),
        rx=ArraySpec(m, m, center=(0.004, -0.002, 0.2)),
        targets=tuple(TargetSpec((0.01 * (k + 1), 0.02 - 0.015 * k, 0.1 + 0.01 * k), complex(0.7 - 0.2 * k, 0.3 + 0.1 * k)) for k in range(K)),
        users=tuple(UserSpec((-0.01 * (u + 1), 0.005 * u, 0.08), 10.0) for u in range(U)),
    )
    fields.update(kw)
    return ScenarioConfig(**fields)


@pytest.fixture
def small3():
    return small_layout(3, 3)


@pytest.fixture
def small4():
    return small_layout(4, 4)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
