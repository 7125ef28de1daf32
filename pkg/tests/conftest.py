"""Shared fixtures and the acceptance summary printed at the end of a run."""

import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

_ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unitary(rng, n=2):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = "test_acceptance.py::test_criterion_"
    if marker in report.nodeid:
        number = int(report.nodeid.split(marker)[1].split("_")[0])
        ok = report.outcome == "passed"
        _ACCEPTANCE[number] = _ACCEPTANCE.get(number, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        verdict = "PASS" if _ACCEPTANCE[number] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}")


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0, abs_tol=tol)
