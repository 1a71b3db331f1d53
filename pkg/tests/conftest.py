import numpy as np
import pytest

from quantile_admission import measure as msr
from quantile_admission.streams import make_rng


def catalog():
    return {
        "uniform": msr.Uniform(0.0, 1.0),
        "exponential": msr.Exponential(1.0),
        "normal": msr.Normal(0.0, 1.0),
        "compressed_exp": msr.CompressedExp(2.0),
        "geometric_atomic": msr.GeometricAtomic(0.5),
    }


@pytest.fixture(params=sorted(catalog()))
def family(request):
    return request.param, catalog()[request.param]


@pytest.fixture
def rng():
    return make_rng(12345)


def ks_two_sample(a, b):
    a = np.sort(a)
    b = np.sort(b)
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[cid].line())
