"""Bandit instances: ground truth, decision sets, rewards and the clean optimum of each round."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ConfigurationError, ContractError

logger = logging.getLogger(__name__)

PRNG_FAMILY = "numpy.random.Philox"

# Frequency inside the misspecification sign pattern.
MISSPEC_FREQUENCY = 1.0e3

GAP_TOLERANCE = 1e-12
ARM_NORM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Bounds:
    """Action-norm bound L, parameter-norm bound S and sub-Gaussian noise scale R."""

    L: float = 1.0
    S: float = 1.0
    R: float = 1.0

    def __post_init__(self) -> None:
        for name in ("L", "S", "R"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigurationError("Bound must be positive and finite", f"bounds.{name}", value)


@dataclass(frozen=True)
class FixedFinite:
    """The same finite list of actions every round."""

    arms: Tuple[Tuple[float, ...], ...]

    def matrix(self) -> np.ndarray:
        return np.array(self.arms, dtype=np.float64)


@dataclass(frozen=True)
class FreshSphereSample:
    """``num_arms`` fresh actions per round, uniform on the sphere of radius L."""

    num_arms: int


@dataclass(frozen=True)
class BasisArms:
    """The d standard basis vectors every round."""


DecisionSetSpec = Union[FixedFinite, FreshSphereSample, BasisArms]


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    ZERO = "zero"


@dataclass(frozen=True, eq=False)
class RandomStreams:
    """Independent generators for the environment, the policy and the adversary.

    All three are spawned from one seed so a run is reproducible, yet changing how one
    component consumes randomness never shifts another component's draws.
    """

    environment: np.random.Generator
    policy: np.random.Generator
    adversary: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RandomStreams":
        children = np.random.SeedSequence(seed).spawn(3)
        env, pol, adv = (np.random.Generator(np.random.Philox(child)) for child in children)
        return cls(environment=env, policy=pol, adversary=adv)


@dataclass(frozen=True, eq=False)
class BanditInstance:
    """Ground truth of a linear contextual bandit.

    Attributes:
        theta_star: Unknown parameter, ``||theta_star||_2 <= S``
        bounds: L, S, R
        decision_set: How each round's decision set is produced
        noise: Noise law; Gaussian uses std R, Uniform uses [-R, R]
        misspec_epsilon: Bound of the deterministic reward perturbation (0 = exact linear model)
        instance_seed: Seed of the misspecification direction
        name: Label used in reports
        paired_with_flip_adversary: Set on the lower-bound pair
    """

    theta_star: np.ndarray
    bounds: Bounds
    decision_set: DecisionSetSpec
    noise: NoiseKind = NoiseKind.GAUSSIAN
    misspec_epsilon: float = 0.0
    instance_seed: int = 0
    name: str = "instance"
    paired_with_flip_adversary: bool = False
    misspec_direction: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta_star, dtype=np.float64).reshape(-1)
        if theta.size < 1 or not np.all(np.isfinite(theta)):
            raise ConfigurationError("theta_star must be a non-empty finite vector", "theta_star")
        norm = float(np.linalg.norm(theta))
        if norm > self.bounds.S + 1e-12:
            raise ConfigurationError(
                f"||theta_star|| = {norm:.6g} exceeds S = {self.bounds.S:.6g}", "theta_star"
            )
        if not math.isfinite(self.misspec_epsilon) or self.misspec_epsilon < 0:
            raise ConfigurationError("Misspecification must be nonnegative", "misspec_epsilon", self.misspec_epsilon)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "noise", NoiseKind(self.noise))

        spec = self.decision_set
        if isinstance(spec, FixedFinite):
            arms = spec.matrix()
            if arms.ndim != 2 or arms.shape[0] == 0 or arms.shape[1] != theta.size:
                raise ConfigurationError(
                    f"Fixed arms must form a non-empty (M, {theta.size}) matrix", "decision_set.arms"
                )
            too_long = np.linalg.norm(arms, axis=1) > self.bounds.L + 1e-12
            if np.any(too_long):
                raise ConfigurationError(
                    f"Arm {int(np.argmax(too_long))} exceeds the action-norm bound L", "decision_set.arms"
                )
        elif isinstance(spec, FreshSphereSample):
            if spec.num_arms < 1:
                raise ConfigurationError("num_arms must be positive", "decision_set.num_arms", spec.num_arms)
        elif isinstance(spec, BasisArms):
            if self.bounds.L < 1.0:
                raise ConfigurationError("Basis arms need L >= 1", "bounds.L", self.bounds.L)
        else:
            raise ConfigurationError(f"Unknown decision set spec {spec!r}", "decision_set")

        direction = np.random.Generator(np.random.Philox(self.instance_seed)).standard_normal(theta.size)
        object.__setattr__(self, "misspec_direction", direction / np.linalg.norm(direction))

    @property
    def dim(self) -> int:
        return int(self.theta_star.size)

    def fixed_arms(self) -> Optional[np.ndarray]:
        """The round-invariant decision set, or None for fresh samples."""
        if isinstance(self.decision_set, FixedFinite):
            return self.decision_set.matrix()
        if isinstance(self.decision_set, BasisArms):
            return np.eye(self.dim) * 1.0
        return None

    def mean_reward(self, x: np.ndarray) -> float:
        """Clean expected reward ``<theta_star, x>`` of the exact linear model."""
        return float(self.theta_star @ np.asarray(x, dtype=np.float64))

    def misspecification(self, x: np.ndarray) -> float:
        """Deterministic perturbation ``eps * sign(sin(1e3 * <u, x>))``, bounded by eps."""
        if self.misspec_epsilon == 0.0:
            return 0.0
        phase = MISSPEC_FREQUENCY * float(self.misspec_direction @ np.asarray(x, dtype=np.float64))
        return self.misspec_epsilon * float(np.sign(math.sin(phase)))

    def draw_noise(self, rng: np.random.Generator) -> float:
        if self.noise is NoiseKind.GAUSSIAN:
            return float(rng.normal(0.0, self.bounds.R))
        if self.noise is NoiseKind.UNIFORM:
            return float(rng.uniform(-self.bounds.R, self.bounds.R))
        return 0.0


@dataclass(frozen=True, eq=False)
class RoundContext:
    """The realized decision set of round k and its clean optimum."""

    round_index: int
    decision_set: np.ndarray
    arm_values: np.ndarray
    optimal_value: float
    optimal_index: int


@dataclass(frozen=True)
class RewardSample:
    """Reward of the chosen action; ``misspec`` is the part the linear model cannot express."""

    clean_reward: float
    noise: float
    misspec: float = 0.0


@dataclass(frozen=True, eq=False)
class LowerBoundPair:
    """The two indistinguishable instances of the corruption lower-bound construction."""

    a0: BanditInstance
    a1: BanditInstance
    budget_param: float


def generate_round(instance: BanditInstance, k: int, rng: np.random.Generator) -> RoundContext:
    """Draw the decision set of round k and compute its clean optimum.

    Args:
        instance: Bandit instance
        k: Round index (>= 1)
        rng: The run's environment stream

    Returns:
        RoundContext with the first index attaining the optimum

    Raises:
        ContractError: If k < 1, or (with debug logging on) an arm is longer than L
    """
    if k < 1:
        raise ContractError(f"Round index must be >= 1, got {k}", "environment")

    arms = instance.fixed_arms()
    if arms is None:
        spec = instance.decision_set
        assert isinstance(spec, FreshSphereSample)
        raw = rng.standard_normal((spec.num_arms, instance.dim))
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        arms = instance.bounds.L * raw / norms

    if logger.isEnabledFor(logging.DEBUG):
        norms = np.linalg.norm(arms, axis=1)
        if np.any(norms > instance.bounds.L + ARM_NORM_TOLERANCE):
            raise ContractError(
                f"Round {k}: arm {int(np.argmax(norms))} has norm {float(np.max(norms)):.6g} "
                f"above L = {instance.bounds.L:.6g}",
                "environment",
            )

    values = arms @ instance.theta_star
    best = int(np.argmax(values))
    return RoundContext(
        round_index=k,
        decision_set=arms,
        arm_values=values,
        optimal_value=float(values[best]),
        optimal_index=best,
    )


def sample_reward(instance: BanditInstance, x: np.ndarray, rng: np.random.Generator) -> RewardSample:
    """Clean reward ``<theta*, x> + misspec(x) + noise`` of the chosen action."""
    noise = instance.draw_noise(rng)
    misspec = instance.misspecification(x)
    clean = instance.mean_reward(x) + misspec + noise
    return RewardSample(clean_reward=clean, noise=noise, misspec=misspec)


def lower_bound_instance_pair(d: int, budget_param: float, noise_scale: float = 1.0) -> LowerBoundPair:
    """Instances A0 and A1 of the corruption lower bound.

    Both use the d basis arms and zero noise. A0 has ``theta = (1/4, 1/8, ..., 1/8)``; A1 differs
    only in the second coordinate, 3/8, so the second arm is optimal there. Paired with the
    budget-flip adversary, A1 looks exactly like A0 until the flip budget runs out.
    """
    if d < 2:
        raise ConfigurationError("The lower-bound construction needs d >= 2", "d", d)
    if budget_param < 0 or not math.isfinite(budget_param):
        raise ConfigurationError("Budget parameter must be nonnegative", "budget_param", budget_param)

    theta0 = np.full(d, 1.0 / 8.0)
    theta0[0] = 1.0 / 4.0
    theta1 = theta0.copy()
    theta1[1] = 3.0 / 8.0
    bounds = Bounds(L=1.0, S=max(1.0, float(np.linalg.norm(theta1))), R=noise_scale)

    a0 = BanditInstance(theta0, bounds, BasisArms(), NoiseKind.ZERO, name="A0", paired_with_flip_adversary=True)
    a1 = BanditInstance(theta1, bounds, BasisArms(), NoiseKind.ZERO, name="A1", paired_with_flip_adversary=True)
    return LowerBoundPair(a0=a0, a1=a1, budget_param=float(budget_param))


def minimal_gap(instance: BanditInstance) -> Optional[float]:
    """Smallest nonzero sub-optimality gap, or None when every arm is optimal.

    Raises:
        ContractError: For fresh decision sets, whose gap is a random quantity
    """
    arms = instance.fixed_arms()
    if arms is None:
        raise ContractError("Minimal gap is only defined for fixed decision sets", "environment")
    values = arms @ instance.theta_star
    gaps = float(np.max(values)) - values
    nonzero = gaps[gaps > GAP_TOLERANCE]
    if nonzero.size == 0:
        return None
    return float(np.min(nonzero))


def random_theta(dim: int, norm: float, seed: int) -> np.ndarray:
    """Parameter drawn uniformly on the sphere of radius ``norm`` from an instance seed."""
    raw = np.random.Generator(np.random.Philox(seed)).standard_normal(dim)
    return norm * raw / np.linalg.norm(raw)


def empirical_mgf_ratio(draws: Sequence[float], scale: float, lambdas: Sequence[float]) -> np.ndarray:
    """Empirical ``E[exp(l * eta)] / exp(R^2 l^2 / 2)`` for each l (sub-Gaussian smoke test)."""
    draws = np.asarray(draws, dtype=np.float64)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    mgf = np.mean(np.exp(np.outer(lambdas, draws)), axis=1)
    return mgf / np.exp(scale**2 * lambdas**2 / 2.0)
