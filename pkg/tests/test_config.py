"""Tests for experiment configuration parsing and resolution."""

import math
from pathlib import Path

import pytest

from robust_linear_bandits.config import (
    OUTPUT_ROOT_ENV,
    build_instance,
    dump_config,
    load_config,
    parse_config,
    parse_config_text,
    parse_seeds,
)
from robust_linear_bandits.environment import FixedFinite
from robust_linear_bandits.exceptions import ConfigurationError, FileSystemError
from robust_linear_bandits.policies import BetaModeKind, PolicyKind


def test_parse_small_config(small_config_text):
    config = parse_config_text(small_config_text)
    assert config.experiment.name == "small"
    assert config.experiment.horizon == 60
    assert config.experiment.seeds == (0, 1)
    assert config.instance.dim == 2
    assert isinstance(config.instance.decision_set, FixedFinite)
    assert config.adversary.kind == "target_flip"
    assert [p.name for p in config.policies] == ["cw_oful", "oful", "enlarged", "greedy"]
    assert config.policies[2].kind is PolicyKind.ENLARGED_BETA_OFUL
    assert config.grid is None


def test_single_cell_resolution(small_config_text):
    config = parse_config_text(small_config_text)
    [cell] = config.cells()
    assert cell.name == "main"
    plan = config.materialize(cell)
    cw = plan.policies[0]
    assert cw.beta_mode.kind is BetaModeKind.KNOWN_C
    assert cw.beta_mode.value == 3.0
    assert cw.lam == pytest.approx(0.01)
    assert cw.alpha == pytest.approx((0.1 * math.sqrt(2) + 0.1) / 3.0)
    assert plan.policies[1].uncapped
    assert plan.adversary.budget == 3.0


def test_seed_range_form(small_config_text):
    text = small_config_text.replace("  seeds: [0, 1]\n", "  seed0: 5\n  num_seeds: 3\n")
    assert parse_config_text(text).experiment.seeds == (5, 6, 7)


def test_unknown_key_reports_field_and_line(small_config_text):
    text = small_config_text.replace("  horizon: 60\n", "  horizon: 60\n  horizn: 70\n")
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config_text(text)
    assert excinfo.value.field == "experiment.horizn"
    assert excinfo.value.line == 4


def test_delta_out_of_range_reports_line(small_config_text):
    text = small_config_text.replace("    kind: oful\n", "    kind: oful\n    delta: 1.5\n")
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config_text(text)
    assert excinfo.value.field == "policies[1].delta"
    assert excinfo.value.line == text.splitlines().index("    delta: 1.5") + 1


def test_exponent_strings_are_numbers(small_config_text):
    text = small_config_text.replace("    kind: oful\n", "    kind: oful\n    delta: 1e-3\n")
    assert parse_config_text(text).policies[1].delta == pytest.approx(1e-3)


def test_missing_section(small_config_text):
    text = small_config_text.split("instance:")[0]
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config_text(text)
    assert excinfo.value.field == "instance"


def test_invalid_yaml_reports_line():
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config_text("experiment:\n  name: [unclosed\n")
    assert excinfo.value.line is not None


def test_enlarged_kind_needs_known_c(small_config_text):
    text = small_config_text.replace(
        "    kind: enlarged_beta_oful\n", "    kind: enlarged_beta_oful\n    beta_mode: unknown_c\n"
    )
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config_text(text)
    assert excinfo.value.field == "policies[2].beta_mode"


def test_target_arm_must_exist(small_config_text):
    text = small_config_text.replace("target_arm: 0", "target_arm: 2")
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config_text(text)
    assert excinfo.value.field == "adversary.target_arm"


def test_duplicate_policy_names_rejected(small_config_text):
    text = small_config_text.replace("name: oful", "name: cw_oful")
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_theta_length_must_match_dim(small_config_text):
    text = small_config_text.replace("theta_star: [0.6, 0.2]", "theta_star: [0.6, 0.2, 0.1]")
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config_text(text)
    assert excinfo.value.field == "instance.theta_star"


def test_theta_outside_S_is_an_instance_error(small_config_text):
    text = small_config_text.replace("theta_star: [0.6, 0.2]", "theta_star: [0.9, 0.9]")
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config_text(text)
    assert excinfo.value.field == "instance.theta_star"


GRID_CONFIG = """\
experiment:
  name: grid
  horizon: 100
  num_seeds: 2
instance:
  dim: 3
  theta_star: random
  instance_seed: 4
  decision_set: {kind: fresh_sphere, num_arms: 6}
adversary:
  kind: suppression
  shift: 0.5
  budget: 1
grid:
  horizon: [50, 100]
  corruption: [0, 2]
  dim: [2, 3]
policies:
  - {name: cw, kind: cw_oful}
"""


def test_grid_cells():
    config = parse_config_text(GRID_CONFIG)
    names = [cell.name for cell in config.cells()]
    assert len(names) == 8
    assert names[0] == "K50_C0_d2"
    assert names[-1] == "K100_C2_d3"
    plan = config.materialize(config.cells()[3])
    assert plan.instance.dim == 3
    assert plan.adversary.budget == 2.0
    assert plan.policies[0].horizon == 50


def test_random_theta_is_shared_across_seeds():
    config = parse_config_text(GRID_CONFIG)
    first = build_instance(config.instance)
    second = build_instance(config.instance)
    assert list(first.theta_star) == list(second.theta_star)


def test_dimension_grid_needs_random_theta(small_config_text):
    text = small_config_text + "grid:\n  dim: [2, 3]\n"
    with pytest.raises(ConfigurationError) as excinfo:
        parse_config_text(text)
    assert excinfo.value.field == "grid.dim"


def test_corruption_grid_needs_budgeted_adversary():
    text = GRID_CONFIG.replace("  kind: suppression\n  shift: 0.5\n", "  kind: none\n")
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_to_dict_parses_back_to_equal_config(small_config_text):
    config = parse_config_text(small_config_text)
    assert parse_config(config.to_dict()) == config
    assert parse_config_text(dump_config(config)) == config


def test_overrides(small_config_text):
    config = parse_config_text(small_config_text).with_overrides(seeds=(4, 5, 6), snapshot_interval=7, jobs=2)
    assert config.experiment.seeds == (4, 5, 6)
    assert config.experiment.snapshot_interval == 7
    assert config.experiment.jobs == 2
    with pytest.raises(ConfigurationError):
        config.with_overrides(jobs=0)


def test_output_dir_resolution(small_config_text, monkeypatch, tmp_path):
    config = parse_config_text(small_config_text)
    assert config.output_dir("explicit") == Path("explicit")
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    assert config.output_dir() == tmp_path / "small"
    monkeypatch.delenv(OUTPUT_ROOT_ENV)
    assert config.output_dir() == Path("results") / "small"


def test_parse_seeds():
    assert parse_seeds("0,1,5") == (0, 1, 5)
    assert parse_seeds("3:4") == (3, 4, 5, 6)
    for bad in ("", "a,b", "2:0", "-1"):
        with pytest.raises(ConfigurationError):
            parse_seeds(bad)


def test_load_config(write_config, small_config_text):
    assert load_config(write_config(small_config_text)).experiment.name == "small"
    with pytest.raises(FileSystemError):
        load_config(Path("/nonexistent/config.yaml"))


def test_bundled_configs_are_valid():
    root = Path(__file__).resolve().parents[1] / "configs"
    for path in sorted(root.glob("*.yaml")):
        config = load_config(path)
        for cell in config.cells():
            config.materialize(cell)
