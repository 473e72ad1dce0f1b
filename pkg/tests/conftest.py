import json
from pathlib import Path

import pytest

from heatdrift import ModelConfig

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


@pytest.fixture(scope="session")
def base_config():
    """rho = gamma = 1, alpha = beta = 1/2, F*(k) = 1/k."""
    return ModelConfig(gamma=1.0, rho=1.0, alpha=0.5, beta=0.5, delta=0.0)


def _kernel_modules():
    from heatdrift import _pykernels

    mods = [pytest.param(_pykernels, id="python")]
    try:
        from heatdrift import _ckernels

        mods.append(pytest.param(_ckernels, id="cython"))
    except ImportError:
        mods.append(pytest.param(None, id="cython", marks=pytest.mark.skip(reason="extension not built")))
    return mods


@pytest.fixture(params=_kernel_modules())
def kern(request):
    return request.param


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
