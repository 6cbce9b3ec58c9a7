"""Incrementally maintained weighted ridge regression state.

The state holds ``Sigma = lambda * I + sum_i w_i x_i x_i^T`` together with its inverse, the
response vector ``b = sum_i w_i x_i r_i``, the estimate ``theta_hat = Sigma^{-1} b`` and
``log det(Sigma)``. Updates are rank one and cost O(d^2); a dense re-inversion every
``refresh_interval`` updates bounds the drift of the maintained inverse.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ConfigurationError, ContractError, NumericalError

logger = logging.getLogger(__name__)

REFRESH_INTERVAL = 512


@dataclass(frozen=True, eq=False)
class DesignSnapshot:
    """Copy of the design after ``num_updates`` rank-one updates."""

    num_updates: int
    lam: float
    cov: np.ndarray
    logdet: float
    theta_hat: np.ndarray


class WeightedDesignState:
    """Weighted design matrix, its inverse and the ridge estimate.

    One instance belongs to one simulation run. It may be handed between threads or
    processes but must never be mutated concurrently.
    """

    def __init__(self, dim: int, lam: float, refresh_interval: int = REFRESH_INTERVAL) -> None:
        """Create the zero-update state ``Sigma = lam * I``.

        Args:
            dim: Context dimension d (>= 1)
            lam: Ridge regularization lambda (> 0)
            refresh_interval: Number of updates between dense re-inversions

        Raises:
            ConfigurationError: If dim or lam are out of range
            ContractError: If refresh_interval is below 1
        """
        if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)) or dim < 1:
            raise ConfigurationError("Dimension must be a positive integer", "dim", dim)
        if not math.isfinite(lam) or lam <= 0:
            raise ConfigurationError("Ridge regularization must be positive", "lambda", lam)
        if refresh_interval < 1:
            raise ContractError(f"Refresh interval must be at least 1, got {refresh_interval}", "linalg")

        self.dim = int(dim)
        self.lam = float(lam)
        self.refresh_interval = int(refresh_interval)
        self.cov = self.lam * np.eye(self.dim)
        self.cov_inv = np.eye(self.dim) / self.lam
        self.response = np.zeros(self.dim)
        self.theta_hat = np.zeros(self.dim)
        self.num_updates = 0
        self.logdet = self.dim * math.log(self.lam)
        self.last_drift = 0.0

    def rank_one_update(self, x: np.ndarray, r: float, w: float) -> "WeightedDesignState":
        """Fold one weighted observation into the state.

        ``Sigma += w x x^T`` and ``b += w x r``; the inverse follows the rank-one inverse-update
        identity and ``log det`` grows by ``log(1 + w x^T Sigma^{-1} x)``.

        Args:
            x: Context vector of dimension d
            r: Observed (possibly corrupted) reward
            w: Sample weight in (0, 1]

        Returns:
            The updated state (self)

        Raises:
            NumericalError: If w is outside (0, 1] or x / r are not finite
        """
        if not (0.0 < w <= 1.0):
            raise NumericalError(f"Weight {w!r} outside (0, 1]", "rank_one_update")
        x = self._as_vector(x, "rank_one_update")
        if not math.isfinite(r):
            raise NumericalError(f"Reward {r!r} is not finite", "rank_one_update")

        u = self.cov_inv @ x
        quad = float(x @ u)
        self.cov_inv = self.cov_inv - (w / (1.0 + w * quad)) * np.outer(u, u)
        self.cov_inv = 0.5 * (self.cov_inv + self.cov_inv.T)
        self.cov = self.cov + w * np.outer(x, x)
        self.cov = 0.5 * (self.cov + self.cov.T)
        self.response = self.response + (w * r) * x
        self.logdet += math.log1p(w * quad)
        self.num_updates += 1

        if self.num_updates % self.refresh_interval == 0:
            self.refresh()
        self.theta_hat = self.cov_inv @ self.response
        return self

    def refresh(self) -> float:
        """Re-invert the design densely and return the drift that was removed.

        The drift is ``max|Sigma Sigma^{-1} - I|`` measured before the refresh.
        """
        drift = self.inverse_drift()
        self.cov_inv = np.linalg.inv(self.cov)
        self.cov_inv = 0.5 * (self.cov_inv + self.cov_inv.T)
        _, self.logdet = np.linalg.slogdet(self.cov)
        self.logdet = float(self.logdet)
        self.theta_hat = self.cov_inv @ self.response
        self.last_drift = drift
        logger.debug(f"Refreshed inverse after {self.num_updates} updates (drift {drift:.3e})")
        return drift

    def inverse_drift(self) -> float:
        """Max-abs deviation of ``Sigma @ Sigma^{-1}`` from the identity."""
        return float(np.max(np.abs(self.cov @ self.cov_inv - np.eye(self.dim))))

    def mahalanobis_bonus(self, x: np.ndarray) -> float:
        """Exploration bonus ``sqrt(x^T Sigma^{-1} x)`` of a single action."""
        x = self._as_vector(x, "mahalanobis_bonus")
        return float(self.mahalanobis_bonuses(x[np.newaxis, :])[0])

    def mahalanobis_bonuses(self, actions: np.ndarray) -> np.ndarray:
        """Exploration bonuses of every row of an (M, d) action matrix."""
        actions = np.asarray(actions, dtype=np.float64)
        if actions.ndim != 2 or actions.shape[1] != self.dim:
            raise ContractError(
                f"Expected an (M, {self.dim}) action matrix, got shape {actions.shape}", "linalg"
            )
        if not np.all(np.isfinite(actions)):
            raise NumericalError("Actions contain non-finite entries", "mahalanobis_bonus")
        quad = np.einsum("ij,jk,ik->i", actions, self.cov_inv, actions)
        return np.sqrt(np.maximum(quad, 0.0))

    def estimation_error_norm(self, theta_star: np.ndarray) -> float:
        """``||theta_hat - theta_star||_Sigma``."""
        theta_star = self._as_vector(theta_star, "estimation_error_norm")
        diff = self.theta_hat - theta_star
        return math.sqrt(max(float(diff @ self.cov @ diff), 0.0))

    def inverse_norm(self, v: np.ndarray) -> float:
        """``||v||_{Sigma^{-1}}`` for an arbitrary vector v."""
        v = self._as_vector(v, "inverse_norm")
        return math.sqrt(max(float(v @ self.cov_inv @ v), 0.0))

    def snapshot(self) -> DesignSnapshot:
        return DesignSnapshot(
            num_updates=self.num_updates,
            lam=self.lam,
            cov=self.cov.copy(),
            logdet=self.logdet,
            theta_hat=self.theta_hat.copy(),
        )

    def _as_vector(self, x: np.ndarray, operation: str) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.dim:
            raise ContractError(f"Expected a vector of dimension {self.dim}, got {x.shape[0]}", operation)
        if not np.all(np.isfinite(x)):
            raise NumericalError("Vector contains non-finite entries", operation)
        return x


def new_design_state(dim: int, lam: float, refresh_interval: Optional[int] = None) -> WeightedDesignState:
    """Zero-update weighted design state (``Sigma = lam * I``); None keeps the default refresh interval."""
    if refresh_interval is None:
        refresh_interval = REFRESH_INTERVAL
    return WeightedDesignState(dim, lam, refresh_interval)


def dense_ridge_solution(actions: np.ndarray, rewards: np.ndarray, weights: np.ndarray, lam: float) -> np.ndarray:
    """From-scratch solve of ``(lam I + sum w x x^T) theta = sum w x r``."""
    actions = np.asarray(actions, dtype=np.float64)
    dim = actions.shape[1]
    weighted = actions * np.asarray(weights, dtype=np.float64)[:, np.newaxis]
    cov = lam * np.eye(dim) + weighted.T @ actions
    response = weighted.T @ np.asarray(rewards, dtype=np.float64)
    return np.linalg.solve(cov, response)
