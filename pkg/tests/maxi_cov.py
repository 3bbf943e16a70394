#!/usr/bin/env python

"""
Measure how well each driftlab module is covered by its own tests.

Coverage of the full suite hides gaps: ``drift`` is exercised by the training,
flow and experiment tests, so a missing drift test goes unnoticed. This script
records, for each module, only the lines run by the test modules listed for it
in ``MODULE_TESTS``, then merges the results into one report.

"""

import glob
import os
import subprocess
import sys


# Test modules allowed to count toward the coverage of each source module.
# Most modules are covered by tests/test_<module>.py alone. Small helpers whose
# behavior is only observable through their callers list those callers too.
MODULE_TESTS = {
    "artifacts": ["test_artifacts"],
    "config": ["test_config"],
    "drift": ["test_drift"],
    "exceptions": ["test_exceptions"],
    "experiments": ["test_experiments"],
    "flow": ["test_flow"],
    "generator": ["test_generator"],
    "imports": ["test_imports"],
    "kernels": ["test_kernels"],
    "landscape": ["test_landscape"],
    "metrics": ["test_metrics"],
    "plots": ["test_plots"],
    "spectral": ["test_spectral"],
    "targets": ["test_targets"],
    "training": ["test_training"],
    "transport": ["test_transport"],
    "utils": ["test_utils", "test_training"],
    "version": ["test_main"],
    "workers": ["test_workers", "test_drift"],
}

# Modules without behavior of their own.
UNMEASURED = ["__init__", "__main__", "typing"]

# Test modules that don't target a single source module. They run once, with
# every module measured, so that the report lists all files.
WHOLE_PACKAGE_TESTS = ["test_exports", "test_main"]


def check_environment():
    """Check that prerequisites for running this script are met."""
    try:
        import driftlab  # noqa: F401
    except ImportError:
        print("failed to import driftlab; is src on PYTHONPATH?")
        return False
    try:
        import coverage  # noqa: F401
    except ImportError:
        print("failed to locate Coverage.py; is it installed?")
        return False
    return True


def check_module_tests(src_dir):
    """Check that MODULE_TESTS lists every source and test module."""
    modules = {
        os.path.splitext(os.path.basename(path))[0]
        for path in glob.glob(os.path.join(src_dir, "driftlab", "*.py"))
    }
    tests = {
        os.path.splitext(os.path.basename(path))[0]
        for path in glob.glob(os.path.join("tests", "test_*.py"))
    }
    listed = {test for names in MODULE_TESTS.values() for test in names}
    missing_modules = modules - set(MODULE_TESTS) - set(UNMEASURED)
    missing_tests = tests - listed - set(WHOLE_PACKAGE_TESTS) - {"test_acceptance"}
    assert not missing_modules, f"no tests listed for {sorted(missing_modules)}"
    assert not missing_tests, f"tests not listed: {sorted(missing_tests)}"
    assert listed <= tests, f"unknown tests: {sorted(listed - tests)}"


def coverage_run(args, env):
    subprocess.run(
        [sys.executable, "-m", "coverage", "run"] + args, check=True, env=env
    )


def run_coverage(src_dir):
    package = os.path.join(src_dir, "driftlab")
    omit = [os.path.join(package, f"{name}.py") for name in UNMEASURED]
    # Acceptance runs take minutes and measure nothing the unit tests don't.
    env = {k: v for k, v in os.environ.items() if k != "DRIFTLAB_SLOW_TESTS"}

    print("\nMeasuring whole-package tests\n", flush=True)
    coverage_run(
        ["--source", package, "--omit", ",".join(omit), "-m", "unittest"]
        + [f"tests.{test}" for test in WHOLE_PACKAGE_TESTS],
        env,
    )
    for module, tests in MODULE_TESTS.items():
        print(f"\nMeasuring {module} with {', '.join(tests)}\n", flush=True)
        coverage_run(
            ["--append", "--include", os.path.join(package, f"{module}.py")]
            + ["-m", "unittest"]
            + [f"tests.{test}" for test in tests],
            env,
        )


if __name__ == "__main__":
    if not check_environment():
        sys.exit(1)
    src_dir = sys.argv[1] if len(sys.argv) == 2 else "src"
    check_module_tests(src_dir)
    run_coverage(src_dir)
