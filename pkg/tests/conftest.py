import numpy as np
import pytest

from crm.kernels import _numba, _numpy
from crm.process import Observation


@pytest.fixture(params=["numpy", "numba"])
def backend(request):
    return {"numpy": _numpy, "numba": _numba}[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def labels_only(labels):
    return [Observation(np.empty(0), int(y), t) for t, y in enumerate(labels, start=1)]


def points(feats, labels=None):
    feats = np.asarray(feats, dtype=np.float64)
    if labels is None:
        labels = [0] * len(feats)
    return [Observation(f, int(y), t) for t, (f, y) in enumerate(zip(feats, labels), start=1)]


_ACCEPTANCE: dict = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number, title, passed, detail=""):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {title} {detail}".rstrip())
        return passed

    return record


def pytest_runtest_makereport(item, call):
    # a criterion test that errors before recording still gets a FAIL line
    marker = item.get_closest_marker("acceptance")
    if marker and call.when == "call" and call.excinfo is not None:
        number, title = marker.args
        prev = _ACCEPTANCE.get(number)
        _ACCEPTANCE[number] = (title, False, prev[2] if prev else str(call.excinfo.value).splitlines()[0])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}  {detail}".rstrip())
