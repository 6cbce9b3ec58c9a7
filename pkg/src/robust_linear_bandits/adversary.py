"""Reward-corruption strategies and corruption budget accounting.

The primary model is the post-action adversary: it sees the round, the chosen action and the
clean reward, then adds ``c_k`` to what the agent observes. Total corruption ``C = sum |c_k|``
is charged against a budget with a full-or-nothing rule per round. A pre-action adversary
fixes a per-arm table before the action is chosen; it is supported for ``C'`` accounting.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .environment import BanditInstance, RoundContext
from .exceptions import ConfigurationError, ContractError

logger = logging.getLogger(__name__)

OPTIMALITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class NoCorruption:
    """Never corrupts."""


@dataclass(frozen=True)
class BudgetedTargetFlip:
    """Rewrites the observed reward of one arm.

    When ``flip_to`` is set the observation becomes ``flip_to`` (``c_k = flip_to - clean``);
    otherwise the reward is shifted down by ``magnitude``.
    """

    target_arm: int
    flip_to: Optional[float] = None
    magnitude: float = 0.25


@dataclass(frozen=True)
class OptimalActionSuppression:
    """Subtracts ``shift`` whenever the chosen action is optimal for the round."""

    shift: float


@dataclass(frozen=True)
class Misspecification:
    """Corruption delegated to the environment's misspecification term; ``c_k`` is always 0."""


@dataclass(frozen=True)
class PreActionWorstCase:
    """Per-arm corruption committed before the action is chosen.

    With an explicit ``table`` the same per-arm corruption applies every round. Without one,
    a table with entries uniform in ``[-magnitude, magnitude]`` is drawn each round from the
    adversary stream.
    """

    table: Optional[Tuple[float, ...]] = None
    magnitude: float = 0.0


Strategy = Union[NoCorruption, BudgetedTargetFlip, OptimalActionSuppression, Misspecification, PreActionWorstCase]


@dataclass(frozen=True)
class Corruption:
    corrupted_reward: float
    c_k: float


@dataclass(frozen=True)
class CorruptionReport:
    C_realized: float
    C_prime_realized: float
    rounds_corrupted: int
    budget: float
    exhausted: bool
    first_declined_round: Optional[int] = None


@dataclass
class AdversaryState:
    """A corruption strategy together with its budget ledger.

    Attributes:
        strategy: What to corrupt and by how much
        budget: Total ``sum |c_k|`` allowed (inf for misspecification delegation)
        spent: ``sum |c_k|`` charged on the chosen actions (C)
        spent_prime: ``sum max_x |c_{k,x}|`` over the decision sets (C')
        rounds_corrupted: Rounds with ``c_k != 0``
        exhausted: Set once a corruption was withheld for budget reasons
        first_declined_round: Round of the first withheld corruption
    """

    strategy: Strategy = field(default_factory=NoCorruption)
    budget: float = 0.0
    spent: float = 0.0
    spent_prime: float = 0.0
    rounds_corrupted: int = 0
    exhausted: bool = False
    first_declined_round: Optional[int] = None

    def __post_init__(self) -> None:
        if isinstance(self.strategy, Misspecification):
            self.budget = math.inf
        if math.isnan(self.budget) or self.budget < 0:
            raise ConfigurationError("Corruption budget must be nonnegative", "adversary.budget", self.budget)
        if isinstance(self.strategy, BudgetedTargetFlip) and self.strategy.target_arm < 0:
            raise ConfigurationError("Target arm must be a valid index", "adversary.target_arm", self.strategy.target_arm)
        if isinstance(self.strategy, OptimalActionSuppression) and self.strategy.shift < 0:
            raise ConfigurationError("Suppression shift must be nonnegative", "adversary.shift", self.strategy.shift)

    @property
    def tracks_prime(self) -> bool:
        return isinstance(self.strategy, PreActionWorstCase)

    def corrupt(
        self,
        round_context: RoundContext,
        action_index: int,
        chosen_action: np.ndarray,
        clean_reward: float,
        rng: Optional[np.random.Generator] = None,
    ) -> Corruption:
        """Corrupt the reward of this round's chosen action.

        Called exactly once per round, after action selection. A corruption that would push
        the spent total past the budget is withheld entirely and flags the state as exhausted.

        Args:
            round_context: The current round
            action_index: Index of the chosen action in the decision set
            chosen_action: The chosen action vector
            clean_reward: Reward before corruption
            rng: The run's adversary stream (used by randomized pre-action tables)

        Returns:
            Corruption with the observed reward and c_k
        """
        strategy = self.strategy
        k = round_context.round_index

        if isinstance(strategy, PreActionWorstCase):
            return self._corrupt_pre_action(round_context, action_index, clean_reward, rng)

        proposal = 0.0
        if isinstance(strategy, BudgetedTargetFlip):
            if action_index == strategy.target_arm:
                if strategy.flip_to is not None:
                    proposal = strategy.flip_to - clean_reward
                else:
                    proposal = -strategy.magnitude
        elif isinstance(strategy, OptimalActionSuppression):
            chosen_value = float(round_context.arm_values[action_index])
            if chosen_value >= round_context.optimal_value - OPTIMALITY_TOLERANCE:
                proposal = -strategy.shift

        if proposal == 0.0:
            return Corruption(corrupted_reward=clean_reward, c_k=0.0)

        charged = self.spent + abs(proposal)
        if charged > self.budget:
            self._decline(k)
            return Corruption(corrupted_reward=clean_reward, c_k=0.0)

        self.spent = charged
        self.spent_prime += abs(proposal)
        self.rounds_corrupted += 1
        return Corruption(corrupted_reward=clean_reward + proposal, c_k=proposal)

    def _corrupt_pre_action(
        self,
        round_context: RoundContext,
        action_index: int,
        clean_reward: float,
        rng: Optional[np.random.Generator],
    ) -> Corruption:
        strategy = self.strategy
        assert isinstance(strategy, PreActionWorstCase)
        num_arms = round_context.decision_set.shape[0]
        if strategy.table is not None:
            table = np.asarray(strategy.table, dtype=np.float64)
            if table.shape[0] != num_arms:
                raise ContractError(
                    f"Per-arm table has {table.shape[0]} entries for {num_arms} arms", "adversary"
                )
        else:
            if rng is None:
                raise ContractError("A randomized per-arm table needs the adversary stream", "adversary")
            table = rng.uniform(-strategy.magnitude, strategy.magnitude, size=num_arms)

        worst = float(np.max(np.abs(table)))
        if worst == 0.0:
            return Corruption(corrupted_reward=clean_reward, c_k=0.0)

        # The decision to corrupt is taken before the action is known, against C'.
        charged_prime = self.spent_prime + worst
        if charged_prime > self.budget:
            self._decline(round_context.round_index)
            return Corruption(corrupted_reward=clean_reward, c_k=0.0)

        c_k = float(table[action_index])
        self.spent_prime = charged_prime
        self.spent += abs(c_k)
        if c_k != 0.0:
            self.rounds_corrupted += 1
        return Corruption(corrupted_reward=clean_reward + c_k, c_k=c_k)

    def _decline(self, round_index: int) -> None:
        if not self.exhausted:
            logger.warning(f"Corruption budget {self.budget:g} exhausted at round {round_index}")
            self.first_declined_round = round_index
        self.exhausted = True

    def report(self) -> CorruptionReport:
        """Realized C, C' and the number of corrupted rounds."""
        return CorruptionReport(
            C_realized=self.spent,
            C_prime_realized=self.spent_prime,
            rounds_corrupted=self.rounds_corrupted,
            budget=self.budget,
            exhausted=self.exhausted,
            first_declined_round=self.first_declined_round,
        )


def corruption_report(state: AdversaryState) -> CorruptionReport:
    """End-of-run totals of an adversary."""
    return state.report()


def lower_bound_adversary(budget_param: float, d: int) -> AdversaryState:
    """Budget-flip attack paired with the lower-bound instance A1.

    Whenever the second arm is chosen its reward is rewritten from 3/8 to 1/8 (a charge of
    1/4), for as long as the total stays within ``4 * budget_param / (d - 1)``. Under the
    full-or-nothing rule this is the same as corrupting while the previous total is at most
    that cap minus 1/4.
    """
    if d < 2:
        raise ConfigurationError("The lower-bound adversary needs d >= 2", "d", d)
    if budget_param < 0 or not math.isfinite(budget_param):
        raise ConfigurationError("Budget parameter must be nonnegative", "budget_param", budget_param)
    strategy = BudgetedTargetFlip(target_arm=1, flip_to=1.0 / 8.0, magnitude=0.25)
    return AdversaryState(strategy=strategy, budget=4.0 * budget_param / (d - 1))


def nominal_corruption_level(state: AdversaryState, instance: BanditInstance, horizon: int) -> float:
    """The corruption level a known-C policy is told about.

    This is the budget, except for misspecification where the equivalent level is ``K * eps``.
    """
    if isinstance(state.strategy, NoCorruption):
        return 0.0
    if isinstance(state.strategy, Misspecification):
        return horizon * instance.misspec_epsilon
    return state.budget
