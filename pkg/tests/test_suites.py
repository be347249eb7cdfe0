"""pytest entry point for the suites driven by scripts/run_tests.py."""
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"
sys.path.insert(0, str(SCRIPTS.parent))
sys.path.insert(0, str(SCRIPTS))

from run_tests import TestResults as _Results  # noqa: E402

SUITES = ["suite_instance", "suite_aqnm", "suite_rate", "suite_selection", "suite_bench"]


@pytest.mark.parametrize("name", SUITES)
def test_suite(name):
    suite = __import__(name)
    results = _Results()
    suite.run(results, False)
    failures = [f"{n}: {m}" for n, ok, m in results.tests if not ok]
    assert not failures, "\n".join(failures)
