#!/usr/bin/env python3
"""
Test runner script for the fedtalora project.
Runs the unit tests under coverage and writes a terminal and an HTML report.

Usage:
    python run_tests.py                    # every package
    python run_tests.py aggregate fedsim   # selected test packages
    python run_tests.py --slow             # also the desk-scale checks

`--slow` sets FEDTALORA_SLOW_TESTS=1, which enables the multi-seed
empirical checks in tests/fedsim.
"""

import argparse
import os
import sys
import unittest
from pathlib import Path
from typing import Optional, Sequence

import coverage

ROOT = Path(__file__).parent
TESTS_DIR = ROOT / 'tests'
SLOW_FLAG = 'FEDTALORA_SLOW_TESTS'


def build_suite(packages: Sequence[str] = ()) -> unittest.TestSuite:
    """Discover tests of the named packages under tests/, or of all of them.

    Raises:
        SystemExit: If a named package has no test directory.
    """
    loader = unittest.TestLoader()
    if not packages:
        return loader.discover(str(TESTS_DIR), pattern='test_*.py', top_level_dir=str(ROOT))
    suite = unittest.TestSuite()
    for name in packages:
        start = TESTS_DIR / name
        if not start.is_dir():
            raise SystemExit(f"no test package tests/{name}")
        suite.addTests(loader.discover(str(start), pattern='test_*.py', top_level_dir=str(ROOT)))
    return suite


def run_tests(packages: Sequence[str] = (), slow: bool = False) -> bool:
    """Run the tests and generate the coverage reports."""
    if slow:
        os.environ[SLOW_FLAG] = '1'
    cov = coverage.Coverage(
        source=['src'],
        omit=['*/__init__.py', '*/tests/*']
    )
    cov.start()

    suite = build_suite(packages)
    result = unittest.TextTestRunner(verbosity=2).run(suite)

    cov.stop()
    cov.save()

    print('\nCoverage Summary:')
    cov.report()

    cov.html_report(directory='coverage_html')
    print('\nDetailed HTML coverage report generated in coverage_html/index.html')

    return result.wasSuccessful()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(description='Run the fedtalora test suite under coverage.')
    parser.add_argument('packages', nargs='*', help='test packages under tests/, e.g. aggregate')
    parser.add_argument('--slow', action='store_true', help=f'set {SLOW_FLAG}=1')
    args = parser.parse_args(argv)
    return 0 if run_tests(args.packages, args.slow) else 1


if __name__ == '__main__':
    sys.exit(main())
