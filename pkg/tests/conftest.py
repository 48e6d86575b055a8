import numpy as np
import pytest

from neckstokes.geometry import NeckGeometry


@pytest.fixture
def quad():
    return NeckGeometry(epsilon=0.01, profile="quadratic")


@pytest.fixture
def circle():
    return NeckGeometry(epsilon=0.01, profile="circle")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def shear04():
    """Assembled shear solution on the circle geometry at eps = 0.04."""
    from neckstokes.analysis import MeshParams
    from neckstokes.rigid import LinearDatum, solve_system

    g = NeckGeometry(epsilon=0.04)
    return solve_system(g, MeshParams().build(g), LinearDatum.preset("shear"))


@pytest.fixture(scope="session")
def shear01():
    from neckstokes.analysis import MeshParams
    from neckstokes.rigid import LinearDatum, solve_system

    g = NeckGeometry(epsilon=0.01)
    return solve_system(g, MeshParams().build(g), LinearDatum.preset("shear"))


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def record(cid: str, passed: bool, detail: str = ""):
        line = f"criterion {cid}: {'pass' if passed else 'fail'}" + (f" ({detail})" if detail else "")
        store[cid] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_CRITERIA, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(store, key=lambda c: int(c.split("_")[0])):
            terminalreporter.write_line(store[cid])
