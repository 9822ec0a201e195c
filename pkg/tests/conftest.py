from __future__ import annotations

import pytest

from osmfacilities.classifier import reference_topic_model
from osmfacilities.demo import build_demo
from osmfacilities.gazetteer import load_lexicon
from osmfacilities.tags import load_key_schema

_ACCEPTANCE: dict[str, tuple[int, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[report.nodeid] = (number, title, "PASS" if report.passed else "FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status in sorted(_ACCEPTANCE.values()):
        terminalreporter.write_line(f"{status}  criterion {number:>2}: {title}")


@pytest.fixture(scope="session")
def schema():
    return load_key_schema()


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def model(lexicon):
    return reference_topic_model(lexicon)


@pytest.fixture(scope="session")
def demo_inputs(tmp_path_factory):
    """The bundled synthetic extract, admin areas and WHO list (built once)."""
    return build_demo(tmp_path_factory.mktemp("demo"))
