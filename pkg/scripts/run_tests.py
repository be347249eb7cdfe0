"""
Comprehensive Test Suite for beambit
Tests instance synthesis, the quantization model, rate evaluation, the
selection algorithms and the experiment harness
"""
import argparse
import logging
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))
sys.path.insert(0, str(Path(__file__).parent))

import suite_aqnm
import suite_bench
import suite_instance
import suite_rate
import suite_selection


class TestResults:
    """Track test results"""
    def __init__(self):
        self.passed = 0
        self.failed = 0
        self.tests = []

    def add_test(self, name: str, passed: bool, message: str = ""):
        self.tests.append((name, bool(passed), message))
        if passed:
            self.passed += 1
        else:
            self.failed += 1

    def expect_error(self, name: str, error: type, func, *args, **kwargs):
        """Pass when func(*args, **kwargs) raises `error`."""
        try:
            func(*args, **kwargs)
        except error:
            self.add_test(name, True)
        except Exception as e:
            self.add_test(name, False, f"raised {type(e).__name__}: {e}")
        else:
            self.add_test(name, False, f"expected {error.__name__}")

    def print_summary(self):
        print("\n" + "="*70)
        print("TEST SUMMARY")
        print("="*70)
        for name, passed, message in self.tests:
            status = "✅ PASS" if passed else "❌ FAIL"
            print(f"{status} - {name}")
            if message and not passed:
                print(f"        {message}")

        print("="*70)
        print(f"Total: {self.passed + self.failed} | Passed: {self.passed} | Failed: {self.failed}")
        if self.failed == 0:
            print("✅ ALL TESTS PASSED!")
        else:
            print(f"❌ {self.failed} TEST(S) FAILED")
        print("="*70)


def run_all_tests(full: bool = False):
    """Run complete test suite"""
    print("="*70)
    print("🧪 BEAMBIT - TEST SUITE" + (" (full counts)" if full else ""))
    print("="*70)

    results = TestResults()

    for suite in (suite_instance, suite_aqnm, suite_rate, suite_selection, suite_bench):
        suite.run(results, full)

    results.print_summary()

    return results.failed == 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Run the beambit test suite")
    parser.add_argument("--full", action="store_true",
                        help="use the acceptance sample sizes and run the desk-scale trend checks")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(stream=sys.stdout, level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s - %(levelname)s - %(message)s")
    success = run_all_tests(args.full)
    sys.exit(0 if success else 1)
