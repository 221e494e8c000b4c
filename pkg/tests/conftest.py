import numpy as np
import pytest

from iotguard.evaluation import labeled_windows, split_balance
from iotguard.flow_stats import PollingConfig
from iotguard import knn
from iotguard.synth import build_corpus

CORPUS_SEED = 7

_CRITERIA = []


@pytest.fixture(scope="session")
def corpus():
    return build_corpus(CORPUS_SEED)


@pytest.fixture(scope="session")
def split24(corpus):
    samples = labeled_windows(corpus.benign, corpus.attack, corpus.labels, PollingConfig(24, 0))
    return split_balance(samples, 0.75, CORPUS_SEED)


@pytest.fixture(scope="session")
def model24(split24):
    return knn.fit(split24[0])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and rep.when == "call":
        _CRITERIA.append((marker.args[0], marker.args[1], rep.passed, getattr(item, "detail", "")))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_CRITERIA):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}" + (f"  ({detail})" if detail else ""))
