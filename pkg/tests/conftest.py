import pytest

from gridner.corpus import Entity, Sentence

PAIN_TOKENS = "Pain and cramping in my hands and lower legs .".split()
PAIN_GOLD = [
    Entity((0, 3, 4, 5), "ADR"),
    Entity((0, 3, 4, 7, 8), "ADR"),
    Entity((2, 3, 4, 7, 8), "ADR"),
    Entity((2, 3, 4, 5), "ADR"),
]
PAIN_PRED = [
    Entity((0, 3, 4, 7, 8), "ADR"),
    Entity((0, 3, 4, 5), "ADR"),
    Entity((0, 3, 7, 8), "ADR"),
    Entity((2, 3, 4, 5), "ADR"),
    Entity((2, 3, 4, 7, 8), "ADR"),
    Entity((2, 3, 7, 8), "ADR"),
]


@pytest.fixture
def pain_cramping():
    return Sentence(PAIN_TOKENS, list(PAIN_GOLD))


@pytest.fixture
def insomnia():
    return Sentence("Insomnia was constant .".split(), [Entity((0,), "ADR")])


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.RESULTS:
        terminalreporter.write_line(line)
