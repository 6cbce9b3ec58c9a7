"""Shared fixtures for the robust-linear-bandits tests."""

from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from robust_linear_bandits.environment import BanditInstance, Bounds, FixedFinite, NoiseKind

SMALL_CONFIG = """\
experiment:
  name: small
  horizon: 60
  seeds: [0, 1]
  snapshot_interval: 20

instance:
  dim: 2
  theta_star: [0.6, 0.2]
  bounds: {L: 1.0, S: 1.0, R: 0.1}
  decision_set:
    kind: fixed
    arms:
      - [1.0, 0.0]
      - [0.0, 1.0]

adversary:
  kind: target_flip
  target_arm: 0
  magnitude: 0.5
  budget: 3

policies:
  - name: cw_oful
    kind: cw_oful
  - name: oful
    kind: oful
  - name: enlarged
    kind: enlarged_beta_oful
  - name: greedy
    kind: greedy
"""


@pytest.fixture
def small_config_text() -> str:
    return SMALL_CONFIG


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[str], Path]:
    """Write YAML text to a file in the test's temporary directory."""

    def _write(text: str, name: str = "config.yaml") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def two_arm_instance() -> BanditInstance:
    return BanditInstance(
        theta_star=np.array([0.6, 0.2]),
        bounds=Bounds(L=1.0, S=1.0, R=0.1),
        decision_set=FixedFinite(((1.0, 0.0), (0.0, 1.0))),
        noise=NoiseKind.GAUSSIAN,
        name="two_arm",
    )
