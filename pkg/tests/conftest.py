import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

VALUE_TYPES = ["uint8", "int8", "uint16", "int16", "int32"]


def random_values(rng, shape, value_type, spread=None):
    """Uniform values over the type's range, or a narrower band around zero/the midpoint."""
    info = np.iinfo(value_type)
    lo, hi = int(info.min), int(info.max)
    if spread is not None:
        mid = 0 if lo < 0 else spread
        lo, hi = max(lo, mid - spread), min(hi, mid + spread)
    return rng.integers(lo, hi + 1, size=shape, dtype=np.int64).astype(value_type)


def storm_field(n=256, seed=7, zero_fraction=0.9):
    """Sparse blob field: a few smooth storm cells on a zero background."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:n, 0:n]
    f = np.zeros((n, n))
    for _ in range(max(4, n // 17)):
        cy, cx = rng.uniform(0, n, 2)
        r = rng.uniform(8, 30) * n / 512
        f += rng.uniform(30, 80) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
    cut = np.quantile(f, zero_fraction)
    return np.where(f > cut, np.clip(f, 0, 255), 0).astype(np.uint8)


def smooth_field(n=256, seed=11):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:n, 0:n]
    f = 127 + 60 * np.sin(xx / 40.0) * np.cos(yy / 55.0) + rng.normal(0, 2, (n, n))
    return np.clip(f, 0, 255).astype(np.uint8)


def gradient_field(n=256):
    yy, xx = np.mgrid[0:n, 0:n]
    return ((xx + yy) * 255 // (2 * (n - 1))).astype(np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
