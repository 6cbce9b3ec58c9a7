"""Tests for the MCP tool server."""

import pytest

pytest.importorskip("mcp")

from robust_linear_bandits.exceptions import ConfigurationError, EpisodeError, FileSystemError  # noqa: E402
from robust_linear_bandits.server import BanditLabMCPServer  # noqa: E402


@pytest.fixture
def server(tmp_path):
    return BanditLabMCPServer(output_root=str(tmp_path / "results"), jobs=1)


def test_describe_config(server, write_config, small_config_text):
    response = server.describe_config(str(write_config(small_config_text)))
    assert response["success"]
    [cell] = response["cells"]
    assert cell["cell"] == "main"
    assert cell["policies"]["oful"]["alpha"] == "uncapped"
    assert cell["policies"]["enlarged"]["kind"] == "oful"


def test_run_experiment(server, write_config, small_config_text, tmp_path):
    response = server.run_experiment(str(write_config(small_config_text)), seeds="0")
    assert response["success"]
    assert response["output_dir"] == str((tmp_path / "results" / "small").resolve())
    assert {r["policy"] for r in response["results"]} == {"cw_oful", "oful", "enlarged", "greedy"}
    assert all(r["num_seeds"] == 1 for r in response["results"])


def test_check_experiment(server, write_config, small_config_text):
    response = server.check_experiment(str(write_config(small_config_text)))
    assert response["success"]
    assert response["all_passed"]
    assert response["failures"] == []
    assert response["checks_run"] > 0


def test_run_lower_bound(server):
    response = server.run_lower_bound(d=2, budget=1.0, policy="cw_oful", K=50)
    assert response["success"]
    assert response["report"]["indistinguishable"]
    assert response["output_dir"].endswith("lowerbound_d2_b1")


def test_error_responses(server):
    config_error = server._handle_error(ConfigurationError("bad", "experiment.horizon", -1, 3))
    assert config_error == {
        "success": False,
        "error_type": "ConfigurationError",
        "error": "Invalid configuration",
        "details": str(ConfigurationError("bad", "experiment.horizon", -1, 3)),
    }
    episode = server._handle_error(EpisodeError("boom", seed=2, round_index=5, policy="cw"))
    assert episode["error"] == "Episode failed"
    assert episode["episode"]["round_index"] == 5
    assert server._handle_error(FileSystemError("nope"))["error_type"] == "FileSystemError"
    assert server._handle_error(RuntimeError("x"))["error"] == "An unexpected error occurred"
