"""Decision rules: corruption-weighted OFUL and its baselines.

CW-OFUL picks the action with the largest upper confidence bound
``theta_hat^T x + beta * ||x||_{Sigma^{-1}}`` and folds the observation into a weighted ridge
regression with weight ``min(1, alpha / ||x||_{Sigma^{-1}})``. Small-bonus (well explored)
actions keep full weight; high-uncertainty actions, where a corrupted reward would move the
estimate the most, are down-weighted. Plain OFUL is the same rule with every weight equal to 1.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .environment import Bounds
from .exceptions import ConfigurationError, ContractError
from .linalg import WeightedDesignState, new_design_state

logger = logging.getLogger(__name__)

# Threshold value meaning "never cap the weight".
UNCAPPED = math.inf


class PolicyKind(str, Enum):
    CW_OFUL = "cw_oful"
    OFUL = "oful"
    ENLARGED_BETA_OFUL = "enlarged_beta_oful"
    GREEDY = "greedy"


class BetaModeKind(str, Enum):
    KNOWN_C = "known_c"
    UNKNOWN_C = "unknown_c"
    FIXED = "fixed"


class TieBreak(str, Enum):
    FIRST = "first"
    RANDOM = "random"


@dataclass(frozen=True)
class BetaMode:
    """How the confidence radius is obtained.

    ``value`` is the corruption level C (known C), the estimate C_bar (unknown C) or the
    radius itself (fixed).
    """

    kind: BetaModeKind
    value: float = 0.0

    @classmethod
    def known_c(cls, corruption_level: float) -> "BetaMode":
        return cls(BetaModeKind.KNOWN_C, float(corruption_level))

    @classmethod
    def unknown_c(cls, corruption_estimate: float) -> "BetaMode":
        return cls(BetaModeKind.UNKNOWN_C, float(corruption_estimate))

    @classmethod
    def fixed(cls, beta: float) -> "BetaMode":
        return cls(BetaModeKind.FIXED, float(beta))


@dataclass(frozen=True)
class PolicyConfig:
    """Everything needed to build a policy for one run.

    Attributes:
        name: Label used in outputs
        kind: Decision rule
        lam: Ridge regularization lambda
        alpha: Weight threshold; ``UNCAPPED`` keeps every weight at 1
        beta_mode: Source of the confidence radius
        delta: Confidence parameter in (0, 1)
        horizon: Number of rounds K
        bounds: L, S, R of the instance
        tie_break: UCB tie rule
    """

    name: str
    kind: PolicyKind
    lam: float
    alpha: float
    beta_mode: BetaMode
    delta: float
    horizon: int
    bounds: Bounds = field(default_factory=Bounds)
    tie_break: TieBreak = TieBreak.FIRST

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        object.__setattr__(self, "tie_break", TieBreak(self.tie_break))
        if not (0.0 < self.delta < 1.0):
            raise ConfigurationError("delta must lie in (0, 1)", f"{self.name}.delta", self.delta)
        if not math.isfinite(self.lam) or self.lam <= 0:
            raise ConfigurationError("lambda must be positive", f"{self.name}.lambda", self.lam)
        if math.isnan(self.alpha) or self.alpha <= 0:
            raise ConfigurationError("alpha must be positive", f"{self.name}.alpha", self.alpha)
        if self.horizon < 1:
            raise ConfigurationError("Horizon must be at least 1", "horizon", self.horizon)

        mode = self.beta_mode
        if not math.isfinite(mode.value) or mode.value < 0:
            raise ConfigurationError("Beta-mode value must be finite and nonnegative", f"{self.name}.beta_mode", mode.value)
        if mode.kind is BetaModeKind.UNKNOWN_C and mode.value <= 0:
            raise ConfigurationError("The corruption estimate must be positive", f"{self.name}.corruption_estimate", mode.value)
        if mode.kind is BetaModeKind.FIXED and mode.value <= 0:
            raise ConfigurationError("A fixed beta must be positive", f"{self.name}.beta", mode.value)

        if self.kind in (PolicyKind.OFUL, PolicyKind.ENLARGED_BETA_OFUL):
            object.__setattr__(self, "alpha", UNCAPPED)
        elif mode.kind is BetaModeKind.KNOWN_C:
            if mode.value == 0.0:
                object.__setattr__(self, "alpha", UNCAPPED)
            elif math.isinf(self.alpha):
                raise ConfigurationError(
                    "An uncapped alpha with a positive known corruption level gives an infinite beta",
                    f"{self.name}.alpha",
                )

    @property
    def uncapped(self) -> bool:
        return math.isinf(self.alpha)


@dataclass(frozen=True)
class ActionChoice:
    index: int
    ucb_value: float
    bonus: float


def known_c_hyperparameters(corruption_level: float, d: int, bounds: Bounds) -> Tuple[float, float]:
    """(alpha, lambda) for a known corruption level C.

    ``lambda = R^2 / S^2`` and ``alpha = (R sqrt(d) + sqrt(lambda) S) / C``; C = 0 gives an
    uncapped alpha.
    """
    lam = bounds.R**2 / bounds.S**2
    if corruption_level < 0:
        raise ConfigurationError("Corruption level must be nonnegative", "corruption_level", corruption_level)
    if corruption_level == 0:
        return UNCAPPED, lam
    alpha = (bounds.R * math.sqrt(d) + math.sqrt(lam) * bounds.S) / corruption_level
    return alpha, lam


def unknown_c_hyperparameters(corruption_estimate: float, d: int, bounds: Bounds) -> Tuple[float, float]:
    """(alpha, lambda) when only an estimate C_bar of the corruption level is available."""
    if corruption_estimate <= 0:
        raise ConfigurationError("The corruption estimate must be positive", "corruption_estimate", corruption_estimate)
    return known_c_hyperparameters(corruption_estimate, d, bounds)


def default_corruption_estimate(horizon: int) -> float:
    """``C_bar = sqrt(K)``, tolerating corruption up to the order of the uncorrupted regret."""
    return math.sqrt(horizon)


def misspecification_corruption_level(epsilon: float, horizon: int) -> float:
    """A misspecification bounded by eps is a corruption of level at most ``K * eps``."""
    return horizon * epsilon


def _stochastic_width(config: PolicyConfig, d: int) -> float:
    bounds = config.bounds
    ratio = (1.0 + config.horizon * bounds.L**2 / config.lam) / config.delta
    log_term = d * math.log(ratio)
    assert log_term > 0, "confidence log term must be positive"
    return bounds.R * math.sqrt(log_term)


def confidence_radius(config: PolicyConfig, d: int) -> float:
    """Confidence radius beta of a run, held constant over the horizon.

    Args:
        config: Policy configuration
        d: Context dimension

    Returns:
        The fixed value, the known-C radius ``R sqrt(d log((1 + K L^2/lambda)/delta)) + alpha C
        + sqrt(lambda) S`` (with C = 0 for plain OFUL), or the unknown-C radius
        ``2 R sqrt(...) + 2 sqrt(lambda) S``
    """
    mode = config.beta_mode
    if mode.kind is BetaModeKind.FIXED:
        return mode.value

    width = _stochastic_width(config, d)
    regularization = math.sqrt(config.lam) * config.bounds.S
    if mode.kind is BetaModeKind.UNKNOWN_C:
        return 2.0 * width + 2.0 * regularization

    corruption = 0.0
    if config.kind is PolicyKind.CW_OFUL and mode.value > 0:
        corruption = config.alpha * mode.value
    return width + corruption + regularization


def enlarged_beta_baseline(config: PolicyConfig, d: int) -> PolicyConfig:
    """OFUL with the radius inflated by ``C * L / sqrt(lambda)`` and all weights 1.

    Raises:
        ConfigurationError: If the corruption level is not known
    """
    if config.beta_mode.kind is not BetaModeKind.KNOWN_C:
        raise ConfigurationError("The enlarged-beta baseline needs a known corruption level", f"{config.name}.beta_mode")
    corruption_level = config.beta_mode.value
    plain = replace(config, kind=PolicyKind.OFUL, beta_mode=BetaMode.known_c(0.0), alpha=UNCAPPED)
    beta = confidence_radius(plain, d) + corruption_level * config.bounds.L / math.sqrt(config.lam)
    return replace(plain, beta_mode=BetaMode.fixed(beta))


def build_policy_config(
    name: str,
    kind: "PolicyKind | str",
    d: int,
    horizon: int,
    bounds: Bounds,
    beta_mode: "BetaModeKind | str" = BetaModeKind.KNOWN_C,
    corruption_level: float = 0.0,
    corruption_estimate: Optional[float] = None,
    alpha: Optional[float] = None,
    lam: Optional[float] = None,
    beta: Optional[float] = None,
    delta: float = 0.05,
    tie_break: "TieBreak | str" = TieBreak.FIRST,
) -> PolicyConfig:
    """Resolve a policy description into a PolicyConfig.

    ``None`` for ``lam`` means ``R^2 / S^2``; ``None`` for ``alpha`` means
    ``(R sqrt(d) + sqrt(lambda) S) / C`` with C the known level or the estimate, and uncapped
    when that level is 0.

    Raises:
        ConfigurationError: For unknown kinds or inconsistent values
    """
    try:
        kind = PolicyKind(kind)
        mode_kind = BetaModeKind(beta_mode)
        tie_break = TieBreak(tie_break)
    except ValueError as e:
        raise ConfigurationError(str(e), name) from e

    lam = bounds.R**2 / bounds.S**2 if lam is None else float(lam)
    if mode_kind is BetaModeKind.KNOWN_C:
        mode = BetaMode.known_c(corruption_level)
        level = corruption_level
    elif mode_kind is BetaModeKind.UNKNOWN_C:
        estimate = default_corruption_estimate(horizon) if corruption_estimate is None else corruption_estimate
        mode = BetaMode.unknown_c(estimate)
        level = estimate
    else:
        if beta is None:
            raise ConfigurationError("Fixed beta mode needs a beta value", f"{name}.beta")
        mode = BetaMode.fixed(beta)
        level = corruption_level

    if alpha is None:
        if level > 0 and math.isfinite(lam) and lam > 0:
            alpha = (bounds.R * math.sqrt(d) + math.sqrt(lam) * bounds.S) / level
        else:
            alpha = UNCAPPED
    return PolicyConfig(
        name=name,
        kind=kind,
        lam=lam,
        alpha=float(alpha),
        beta_mode=mode,
        delta=delta,
        horizon=horizon,
        bounds=bounds,
        tie_break=tie_break,
    )


class PolicyState:
    """Learner state of one run: weighted design, weight history and the radius beta."""

    def __init__(self, config: PolicyConfig, dim: int, rng: Optional[np.random.Generator] = None) -> None:
        """Build the zero-round state.

        Args:
            config: Policy configuration
            dim: Context dimension
            rng: The run's policy stream (used only by random tie-breaking)
        """
        if config.kind is PolicyKind.ENLARGED_BETA_OFUL:
            config = enlarged_beta_baseline(config, dim)
        self.config = config
        self.kind = config.kind
        self.alpha = config.alpha
        self.design: WeightedDesignState = new_design_state(dim, config.lam)
        self.weight_history: List[float] = []
        self.beta = confidence_radius(config, dim)
        self.rng = rng

        if config.tie_break is TieBreak.RANDOM and rng is None:
            raise ContractError("Random tie-breaking needs the policy stream", "policies")
        if self.beta < 1.0:
            logger.warning(f"Policy {config.name}: beta = {self.beta:.4g} is below 1")
        logger.debug(
            f"Policy {config.name} ({config.kind.value}): beta={self.beta:.6g}, "
            f"alpha={self.alpha:.6g}, lambda={config.lam:.6g}"
        )

    @property
    def num_rounds(self) -> int:
        return self.design.num_updates

    def select_action(self, decision_set: np.ndarray) -> ActionChoice:
        """Optimistic action: argmax of ``theta_hat^T x + beta * ||x||_{Sigma^{-1}}``.

        Greedy uses beta = 0 here. Ties go to the lowest index unless random tie-breaking
        is configured.

        Raises:
            ContractError: If the decision set is empty
        """
        arms = np.asarray(decision_set, dtype=np.float64)
        if arms.ndim != 2 or arms.shape[0] == 0:
            raise ContractError("Decision set must be a non-empty (M, d) matrix", "policies")

        bonuses = self.design.mahalanobis_bonuses(arms)
        beta = 0.0 if self.kind is PolicyKind.GREEDY else self.beta
        ucb = arms @ self.design.theta_hat + beta * bonuses

        if self.config.tie_break is TieBreak.RANDOM:
            assert self.rng is not None
            candidates = np.flatnonzero(ucb == np.max(ucb))
            index = int(self.rng.choice(candidates))
        else:
            index = int(np.argmax(ucb))
        return ActionChoice(index=index, ucb_value=float(ucb[index]), bonus=float(bonuses[index]))

    def compute_weight(
        self, chosen: np.ndarray, alpha: Optional[float] = None, bonus: Optional[float] = None
    ) -> float:
        """Sample weight ``min(1, alpha / ||x||_{Sigma^{-1}})`` against the pre-update design.

        Args:
            chosen: The action picked this round
            alpha: Threshold, defaults to the configured one
            bonus: Bonus of ``chosen`` if already computed this round

        Returns:
            Weight in (0, 1]; 1 when uncapped or when the bonus is 0
        """
        alpha = self.alpha if alpha is None else alpha
        if bonus is None:
            bonus = self.design.mahalanobis_bonus(chosen)
        if math.isinf(alpha) or bonus == 0.0:
            return 1.0
        return min(1.0, alpha / bonus)

    def observe(self, chosen: np.ndarray, observed_reward: float, w: float) -> "PolicyState":
        """Fold ``(x, r_hat, w)`` into the weighted ridge regression."""
        self.design.rank_one_update(chosen, observed_reward, w)
        self.weight_history.append(w)
        return self

    def derived(self) -> Dict[str, Any]:
        """Derived run quantities echoed into metadata."""
        return {
            "kind": self.kind.value,
            "beta": self.beta,
            "alpha": "uncapped" if math.isinf(self.alpha) else self.alpha,
            "lambda": self.config.lam,
            "beta_below_one": self.beta < 1.0,
        }
