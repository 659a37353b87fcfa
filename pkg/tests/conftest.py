import shutil
import sys

import pytest

from spinstack.forge import (
    DEFAULT_PROBLEM_COUNT,
    DEFAULT_SET_SEED,
    SweepSpec,
    forge_problem_set,
    make_sweep_dataset,
    probe_objects,
    save_problem_set,
    save_sweep_dataset,
)


@pytest.fixture(scope="session")
def default_set():
    """The canonical 40-problem benchmark set, forged once per test session."""
    return forge_problem_set(seed=DEFAULT_SET_SEED, count=DEFAULT_PROBLEM_COUNT)


@pytest.fixture(scope="session")
def small_set():
    return forge_problem_set(seed=11, count=6)


@pytest.fixture(scope="session")
def saved_dataset_dir(tmp_path_factory, default_set):
    out = tmp_path_factory.mktemp("dataset") / "benchmark"
    save_problem_set(default_set, out)
    return out


@pytest.fixture
def dataset_copy(tmp_path, saved_dataset_dir):
    """A private mutable copy of the saved dataset for tests that write to it."""
    dest = tmp_path / "benchmark"
    shutil.copytree(saved_dataset_dir, dest)
    return dest


@pytest.fixture(scope="session")
def sweep_pairs():
    # 3 probe objects x 3 directions x 12 angles = 108 before/after pairs
    objects = probe_objects(count=3, seed=1)
    pairs = []
    for i, shape in enumerate(objects):
        pairs.extend(make_sweep_dataset(shape, SweepSpec(), id_prefix=f"obj{i}_"))
    return pairs


@pytest.fixture(scope="session")
def saved_sweep_dir(tmp_path_factory, sweep_pairs):
    out = tmp_path_factory.mktemp("sweeps") / "pairs"
    save_sweep_dataset(sweep_pairs, out)
    return out


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo one PASS/FAIL line per acceptance criterion after the run."""
    module = sys.modules.get("test_acceptance")
    if module is None or not getattr(module, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for name in module.CRITERIA:
        if name in module.RESULTS:
            terminalreporter.write_line(module.RESULTS[name])
