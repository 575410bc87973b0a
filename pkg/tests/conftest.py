import time
from pathlib import Path

import pytest

from ccfunnel import load, simulate
from ccfunnel.scenario import loads

DATA = Path(__file__).parent / "data"

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} -- {detail}"
    ACCEPTANCE.setdefault(number, []).append((passed, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        for _, line in ACCEPTANCE[number]:
            terminalreporter.write_line(line)


class TimedTrace:
    def __init__(self, scenario):
        self.scenario = scenario
        start, cpu = time.perf_counter(), time.process_time()
        self.trace = simulate(scenario)
        self.seconds = time.perf_counter() - start
        self.cpu_seconds = time.process_time() - cpu


@pytest.fixture(scope="session")
def paper_kc3():
    return load("paper_kc3")


@pytest.fixture(scope="session")
def paper_kc03():
    return load("paper_kc03")


@pytest.fixture(scope="session")
def run_kc3(paper_kc3):
    return TimedTrace(paper_kc3)


@pytest.fixture(scope="session")
def run_kc03(paper_kc03):
    return TimedTrace(paper_kc03)


@pytest.fixture(scope="session")
def recovery_probe():
    return loads((DATA / "recovery_probe.scn").read_text(), "recovery_probe.scn")


@pytest.fixture(scope="session")
def run_recovery(recovery_probe):
    return TimedTrace(recovery_probe)
