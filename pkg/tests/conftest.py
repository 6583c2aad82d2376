import numpy as np
import pytest

from imftbounds.corpus import build_corpus
from imftbounds.verify import certificate_verify


@pytest.fixture(scope="session")
def corpus():
    return build_corpus()


@pytest.fixture(scope="session")
def corpus_reports(corpus):
    """500 x-samples, 20 Newton starts per fixture."""
    return {f.name: certificate_verify(f.cert, f.oracle, x_samples=500, seeds=20) for f in corpus}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def have_matpower():
    try:
        from imftbounds.powerflow import find_case_file

        find_case_file("case9")
        return True
    except FileNotFoundError:
        return False


needs_cases = pytest.mark.skipif(not have_matpower(), reason="MATPOWER case files not installed")


ACCEPTANCE_LINES = {}


def record(criterion: int, ok: bool, detail: str):
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[criterion])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
