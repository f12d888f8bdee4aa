import pytest
from hypothesis import strategies as st

from privamp.divergence import DiscreteMeasure

_criteria: dict[str, tuple[int, str]] = {}
_outcomes: dict[int, list[str]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criteria[item.nodeid] = (int(mark.args[0]), str(mark.args[1]))


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    number, _ = _criteria[report.nodeid]
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(number, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    titles = {}
    for number, title in _criteria.values():
        titles.setdefault(number, title)
    terminalreporter.section("acceptance criteria")
    for number in sorted(titles):
        outcomes = _outcomes.get(number, ["not run"])
        status = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}: {titles[number]}")


@st.composite
def measures(draw, outcomes=("a", "b", "c", "d", "e"), min_size=1):
    """Random probability measure on a subset of ``outcomes``."""
    keys = draw(st.lists(st.sampled_from(outcomes), min_size=min_size, max_size=len(outcomes), unique=True))
    weights = draw(st.lists(st.floats(0.01, 1.0), min_size=len(keys), max_size=len(keys)))
    total = sum(weights)
    return DiscreteMeasure({k: w / total for k, w in zip(keys, weights)})


@pytest.fixture
def bern():
    from privamp.divergence import bernoulli

    return bernoulli
