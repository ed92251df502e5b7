import json
from pathlib import Path

import pytest

from crimefront.kinetics import KineticsParams

ORACLE_PATH = Path(__file__).parent / "oracle_values.json"
PARAM_SETS = [(3.0, 0.2), (2.0, 0.1), (5.0, 0.3)]

_criteria = {}


def oracle(beta, s_b):
    data = json.loads(ORACLE_PATH.read_text())
    return data[f"beta={int(beta)},s_b={s_b}"]


@pytest.fixture(scope="session")
def params():
    return KineticsParams.normalized(3.0, 0.2)


@pytest.fixture(scope="session")
def ref():
    return oracle(3.0, 0.2)


def pytest_runtest_logreport(report):
    marker = "test_acceptance.py::test_criterion_"
    if report.when == "call" and marker in report.nodeid:
        name = report.nodeid.split(marker, 1)[1]
        number = int(name.split("_", 1)[0])
        ok = _criteria.get(number, True) and report.passed
        _criteria[number] = ok


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status = "PASS" if _criteria[number] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}")
