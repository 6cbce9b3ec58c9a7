"""Tests for study orchestration and the result directory."""

import pandas as pd
import pytest
import yaml

from robust_linear_bandits.config import parse_config_text
from robust_linear_bandits.exceptions import EpisodeError, FileSystemError
from robust_linear_bandits.harness import ROUND_COLUMNS, paired_lower_bound_run
from robust_linear_bandits.storage import FAILURE_FILE, INCOMPLETE_MARKER, ResultStore, safe_component
from robust_linear_bandits.study import ExperimentRunner, scaling_study, write_lower_bound

SCALING_CONFIG = """\
experiment:
  name: scaling
  horizon: 40
  num_seeds: 2
instance:
  dim: 2
  theta_star: [0.6, 0.2]
  bounds: {R: 0.1}
  decision_set:
    kind: fixed
    arms: [[1.0, 0.0], [0.0, 1.0]]
adversary:
  kind: suppression
  shift: 0.5
  budget: 0
grid:
  horizon: [40, 80]
  corruption: [0, 2]
policies:
  - {name: cw, kind: cw_oful}
  - {name: oful, kind: oful}
"""


def test_run_writes_all_outputs(small_config_text, tmp_path):
    config = parse_config_text(small_config_text)
    store = ResultStore(tmp_path / "out")
    cells = ExperimentRunner(config, jobs=1).run(store)

    assert not store.is_incomplete
    assert [len(episodes) for episodes in cells[0].episodes.values()] == [2, 2, 2, 2]
    rounds = pd.read_csv(store.root / "main" / "cw_oful" / "rounds_seed1.csv")
    assert list(rounds.columns) == ROUND_COLUMNS
    assert len(rounds) == 60
    summary = pd.read_csv(store.root / "main" / "oful" / "cumulative_regret.csv")
    assert list(summary.columns) == ["k", "mean", "std", "min", "max"]
    for name in ("cumulative_corruption.csv", "potential.csv"):
        assert (store.root / "main" / "greedy" / name).exists()

    metadata = yaml.safe_load((store.root / "metadata.yaml").read_text())
    assert metadata["status"] == "complete"
    assert metadata["tool"]["name"] == "robust-linear-bandits"
    assert metadata["prng"]["family"] == "numpy.random.Philox"
    assert metadata["derived"]["main"]["oful"]["alpha"] == "uncapped"
    assert metadata["config"]["experiment"]["seeds"] == [0, 1]


def test_runs_are_byte_reproducible(small_config_text, tmp_path):
    config = parse_config_text(small_config_text)
    first = ResultStore(tmp_path / "a")
    second = ResultStore(tmp_path / "b")
    ExperimentRunner(config, jobs=1).run(first)
    ExperimentRunner(config, jobs=1).run(second)
    for relative in ("main/cw_oful/rounds_seed0.csv", "main/enlarged/cumulative_regret.csv", "metadata.yaml"):
        assert (first.root / relative).read_bytes() == (second.root / relative).read_bytes()


@pytest.mark.slow
def test_parallel_run_matches_serial_run(small_config_text, tmp_path):
    config = parse_config_text(small_config_text)
    serial = ResultStore(tmp_path / "serial")
    parallel = ResultStore(tmp_path / "parallel")
    ExperimentRunner(config, jobs=1).run(serial)
    ExperimentRunner(config, jobs=2).run(parallel)
    for path in sorted(serial.root.rglob("*.csv")):
        relative = path.relative_to(serial.root)
        assert path.read_bytes() == (parallel.root / relative).read_bytes()


def test_check_writes_diagnostics(small_config_text, tmp_path):
    config = parse_config_text(small_config_text)
    store = ResultStore(tmp_path / "out")
    _, report = ExperimentRunner(config, jobs=1).check(store)
    assert report.all_hard_passed
    diagnostics = pd.read_csv(store.root / "diagnostics.csv")
    assert set(diagnostics["policy"]) == {"cw_oful", "oful", "enlarged", "greedy"}
    assert (diagnostics["passed"] == 1).all()
    assert (store.root / "diagnostic_rates.csv").exists()
    metadata = yaml.safe_load((store.root / "metadata.yaml").read_text())
    assert metadata["status"] == "complete"


def test_failed_episode_leaves_incomplete_marker(small_config_text, tmp_path):
    text = small_config_text.replace(
        "  kind: target_flip\n  target_arm: 0\n  magnitude: 0.5\n", "  kind: pre_action\n  table: [0.1, 0.2, 0.3]\n"
    )
    config = parse_config_text(text)
    store = ResultStore(tmp_path / "out")
    with pytest.raises(EpisodeError):
        ExperimentRunner(config, jobs=1).run(store)
    assert (store.root / INCOMPLETE_MARKER).exists()
    failure = yaml.safe_load((store.root / FAILURE_FILE).read_text())
    assert failure["error_type"] == "EpisodeError"
    assert failure["round_index"] == 1
    assert not (store.root / "metadata.yaml").exists()


def test_scaling_study_table():
    table = scaling_study(parse_config_text(SCALING_CONFIG), jobs=1)
    assert len(table.cells) == 8
    assert set(table.cells["K"]) == {40, 80}
    assert set(table.cells["C"]) == {0.0, 2.0}
    assert table.cells["gap"].tolist() == pytest.approx([0.4] * 8)
    assert table.cells["gap_ratio"].notna().all()
    affine = table.fits[table.fits["fit"] == "affine_regret_vs_C"]
    assert set(affine["policy"]) == {"cw", "oful"}
    assert set(affine["K"]) == {40, 80}


def test_grid_run_writes_scaling_tables(tmp_path):
    store = ResultStore(tmp_path / "grid")
    ExperimentRunner(parse_config_text(SCALING_CONFIG), jobs=1).run(store)
    assert (store.root / "K80_C2_d2" / "cw" / "rounds_seed0.csv").exists()
    assert list(pd.read_csv(store.root / "scaling_fits.csv").columns) == ["policy", "d", "fit", "K", "slope", "intercept"]
    assert len(pd.read_csv(store.root / "scaling.csv")) == 8


def test_write_lower_bound(tmp_path):
    report = paired_lower_bound_run(3, 1.0, "cw_oful", 50)
    store = ResultStore(tmp_path / "lb")
    write_lower_bound(store, report)
    assert len(pd.read_csv(store.root / "lowerbound" / "A0_rounds.csv")) == 50
    assert len(pd.read_csv(store.root / "lowerbound" / "A1_rounds.csv")) == 50
    saved = yaml.safe_load((store.root / "lowerbound_report.yaml").read_text())
    assert saved["report"]["indistinguishable"] is True
    assert saved["report"]["theta_a0"] == [0.25, 0.125, 0.125]


def test_safe_component():
    assert safe_component("cw oful") == "cw_oful"
    assert safe_component("..") == "_"
    assert safe_component("../x") == "_x"
    assert safe_component("CON") == "_CON"


def test_store_paths_stay_inside_root(tmp_path):
    store = ResultStore(tmp_path / "root")
    path = store.path("..", "..", "escape.csv")
    assert path.resolve().is_relative_to(store.root)


def test_store_rejects_file_root(tmp_path):
    target = tmp_path / "file"
    target.write_text("x")
    with pytest.raises(FileSystemError):
        ResultStore(target)
    with pytest.raises(FileSystemError):
        ResultStore("")
