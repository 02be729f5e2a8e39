import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as hst

from fgsub.stallings import SubgroupSpec
from fgsub.words import Word

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def letters_of(n):
    return [x for i in range(1, n + 1) for x in (i, -i)]


def word_strategy(n, min_size=0, max_size=8):
    return hst.lists(hst.sampled_from(letters_of(n)), min_size=min_size, max_size=max_size).map(Word)


@hst.composite
def subgroups(draw, n=None, max_gens=3, max_len=8, nontrivial=True):
    if n is None:
        n = draw(hst.integers(1, 3))
    gens = draw(hst.lists(word_strategy(n, 1, max_len), min_size=1, max_size=max_gens))
    gens = [g for g in gens if g] or ([Word((1,))] if nontrivial else [])
    return SubgroupSpec(n, tuple(gens))


def random_word(rng, n, length):
    return Word(rng.choice(letters_of(n)) for _ in range(length))


def random_subgroup(rng, n, max_gens=3, max_len=8):
    gens = []
    while not gens:
        k = rng.randint(1, max_gens)
        gens = [w for w in (random_word(rng, n, rng.randint(1, max_len)) for _ in range(k)) if w]
    return SubgroupSpec(n, tuple(gens))


@pytest.fixture
def rng():
    return random.Random(20261014)


# -- per-criterion report for the acceptance module ---------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or report.failed:
        ok = report.passed
        prev = _CRITERIA.get(crit[0])
        _CRITERIA[crit[0]] = (crit[1], ok if prev is None else prev[1] and ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.criterion = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
