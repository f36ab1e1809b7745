import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from deepscatter.filterbank import build_morlet_bank
from deepscatter.scattering import ScatteringConfig, default_banks

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

RATE = 22050.0


@pytest.fixture(scope="session")
def rate():
    return RATE


@pytest.fixture(scope="session")
def bank8():
    return build_morlet_bank(8, 0.19, RATE, 2 ** 13)


@pytest.fixture(scope="session")
def small_banks():
    """Q = (8, 1), T = 46 ms banks for 2^12-sample inputs (plus a residual bank)."""
    return default_banks(ScatteringConfig(0.046, (8, 1, 1), 2, RATE), 2 ** 12, extra_order=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def scaling_report():
    """One timing run shared by the benchmark and acceptance suites."""
    from deepscatter.bench import run_scaling
    return run_scaling(ScatteringConfig(0.19, (8, 1), 2, RATE), [2 ** 14, 2 ** 16, 2 ** 18], repeats=5)


ACCEPTANCE = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    def record(number, checks: dict, detail: str = ""):
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        if failed:
            line += f"  [failed: {', '.join(failed)}]"
        ACCEPTANCE[number] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("-", "acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
