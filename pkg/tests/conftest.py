import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from envbench.partition import apply_split, attach_labels
from envbench.synth import SynthConfig, generate_dataset

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA_ENV = "ENVBENCH_DATA"

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        if rep.skipped:
            reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else ""
            _criteria[n] = f"SKIP ({reason.removeprefix('Skipped: ')})"
        else:
            _criteria[n] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        terminalreporter.write_line(f"criterion {n:>2}: {_criteria[n]}")


@pytest.fixture(scope="session")
def full_raw():
    """Full-size synthetic tower: 22 x 7 x 7 conditions, 6 seeds, 30 sections."""
    return generate_dataset(SynthConfig())


@pytest.fixture(scope="session")
def e2_tables(full_raw):
    train, test = apply_split(full_raw)
    return attach_labels(train, test)


@pytest.fixture(scope="session")
def small_raw():
    return generate_dataset(SynthConfig(n_seeds=1, n_sections=4))


def real_dataset_dir():
    root = os.environ.get(DATA_ENV)
    if not root:
        return None
    root = Path(root)
    return root if root.is_dir() else None


def real_tower_files():
    """``{tower: path to data.csv}`` for whichever towers are present under $ENVBENCH_DATA."""
    root = real_dataset_dir()
    if root is None:
        return {}
    found = {}
    for tower in ("ref", "opt1", "opt2"):
        p = root / tower / "data.csv"
        if p.is_file():
            found[tower] = p
    if not found and (root / "data.csv").is_file():
        found["ref"] = root / "data.csv"
    return found
