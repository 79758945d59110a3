import numpy as np
import pytest

from bsgan.data import Dataset, load_dataset


@pytest.fixture(scope="session")
def ecoli():
    return load_dataset("ecoli")[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_blobs(rng, n_major=60, n_minor=12, d=2, sep=0.35, spread=0.08):
    centre = np.full(d, 0.5)
    shift = np.zeros(d)
    shift[0] = sep / 2
    maj = rng.normal(centre - shift, spread, size=(n_major, d))
    mino = rng.normal(centre + shift, spread, size=(n_minor, d))
    x = np.clip(np.vstack([maj, mino]), 0, 1)
    y = np.r_[np.zeros(n_major, dtype=int), np.ones(n_minor, dtype=int)]
    return Dataset(x, y)


# one pass/fail line per acceptance criterion, printed after the run
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, title = mark.args
    _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")
