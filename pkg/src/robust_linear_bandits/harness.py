"""Simulation episodes, regret curves and their reductions.

One episode runs one policy against one instance and one adversary for K rounds. The loop order
per round is: draw the decision set, choose, draw the clean reward, corrupt, weight, update.
Regret is always measured against clean expected rewards; corruption only reaches the learner
through the observation.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .adversary import AdversaryState, CorruptionReport, NoCorruption, lower_bound_adversary
from .environment import (
    BanditInstance,
    Bounds,
    LowerBoundPair,
    RandomStreams,
    generate_round,
    lower_bound_instance_pair,
    sample_reward,
)
from .exceptions import ContractError, EpisodeError
from .policies import PolicyConfig, PolicyKind, PolicyState, build_policy_config

logger = logging.getLogger(__name__)

DEFAULT_SNAPSHOT_INTERVAL = 50

ROUND_COLUMNS = [
    "k",
    "action_index",
    "weight",
    "bonus",
    "clean_reward",
    "c_k",
    "observed_reward",
    "instant_regret",
    "cum_regret",
    "est_error",
    "confidence_ok",
]


@dataclass(slots=True)
class RoundRecord:
    """Everything observed and decided in one round.

    ``est_error`` is ``||theta_k - theta*||_{Sigma_k}`` of the estimate used to choose in
    round k, and ``confidence_ok`` compares it with beta. ``misspec`` is the model deviation
    inside ``clean_reward``; it is kept out of the per-round log.
    """

    k: int
    action_index: int
    weight: float
    bonus: float
    clean_reward: float
    c_k: float
    observed_reward: float
    instant_regret: float
    cum_regret: float
    est_error: float
    confidence_ok: bool
    misspec: float = 0.0


@dataclass(frozen=True, eq=False)
class EpisodeSnapshot:
    """State of the learner after ``round_index`` completed rounds.

    Attributes:
        round_index: Completed rounds
        cov: Sigma after those rounds
        logdet: Maintained log det Sigma
        theta_hat: Ridge estimate
        noise_sum: ``sum_i w_i eta_i x_i``
        corruption_sum: ``sum_i w_i c_i x_i``
        corruption_spent: ``sum_i |c_i|`` so far
        misspec_sum: ``sum_i w_i m_i x_i`` for the model deviations m_i
        effective_spent: ``sum_i |c_i + m_i|``, the corruption level seen by the regression
    """

    round_index: int
    cov: np.ndarray
    logdet: float
    theta_hat: np.ndarray
    noise_sum: np.ndarray
    corruption_sum: np.ndarray
    corruption_spent: float
    misspec_sum: np.ndarray
    effective_spent: float


@dataclass(eq=False)
class EpisodeResult:
    """Trajectory and end state of one episode."""

    policy_name: str
    policy_kind: PolicyKind
    seed: int
    horizon: int
    dim: int
    instance_name: str
    theta_star: np.ndarray
    bounds: Bounds
    beta: float
    alpha: float
    lam: float
    delta: float
    records: List[RoundRecord]
    snapshots: List[EpisodeSnapshot]
    corruption: CorruptionReport
    derived: Dict[str, Any] = field(default_factory=dict)
    misspec_epsilon: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def actions(self) -> np.ndarray:
        return self.column("action_index").astype(np.int64)

    @property
    def total_regret(self) -> float:
        return self.records[-1].cum_regret if self.records else 0.0

    def cumulative_regret(self) -> np.ndarray:
        return self.column("cum_regret")

    def cumulative_corruption(self) -> np.ndarray:
        total = 0.0
        out = np.empty(len(self.records))
        for i, record in enumerate(self.records):
            total = total + abs(record.c_k)
            out[i] = total
        return out

    def potential_terms(self) -> np.ndarray:
        """Per-round ``min(1, w_k * bonus_k^2)``."""
        return np.minimum(1.0, self.column("weight") * self.column("bonus") ** 2)

    def to_frame(self) -> pd.DataFrame:
        """Per-round log in its fixed column order."""
        frame = pd.DataFrame([[getattr(r, c) for c in ROUND_COLUMNS] for r in self.records], columns=ROUND_COLUMNS)
        frame["confidence_ok"] = frame["confidence_ok"].astype(int)
        return frame


def run_episode(
    instance: BanditInstance,
    adversary: AdversaryState,
    policy_config: PolicyConfig,
    K: int,
    seed: int,
    snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL,
) -> EpisodeResult:
    """Run one policy against one instance and adversary for K rounds.

    The adversary passed in is a template: the episode works on a deep copy so the same
    template can drive many seeds.

    Args:
        instance: Ground truth
        adversary: Corruption strategy and budget
        policy_config: Policy to run
        K: Number of rounds
        seed: Episode seed; spawns the environment, policy and adversary streams
        snapshot_interval: Rounds between design snapshots

    Returns:
        EpisodeResult with every round recorded

    Raises:
        ContractError: If K or the horizon of the policy do not match
        EpisodeError: If any component fails during the loop
    """
    if K < 1:
        raise ContractError(f"Horizon must be at least 1, got {K}", "harness")
    if policy_config.horizon != K:
        raise ContractError(
            f"Policy {policy_config.name} was configured for K={policy_config.horizon}, episode has K={K}", "harness"
        )
    if snapshot_interval < 1:
        raise ContractError("Snapshot interval must be positive", "harness")

    streams = RandomStreams.from_seed(seed)
    adversary = copy.deepcopy(adversary)
    theta_star = instance.theta_star
    dim = instance.dim

    try:
        policy = PolicyState(policy_config, dim, streams.policy)
    except Exception as e:
        raise EpisodeError(str(e), seed=seed, round_index=0, policy=policy_config.name) from e

    records: List[RoundRecord] = []
    snapshots: List[EpisodeSnapshot] = []
    noise_sum = np.zeros(dim)
    corruption_sum = np.zeros(dim)
    misspec_sum = np.zeros(dim)
    effective_spent = 0.0
    cum_regret = 0.0
    k = 0

    logger.debug(f"Episode start: policy={policy_config.name} seed={seed} K={K} instance={instance.name}")
    try:
        for k in range(1, K + 1):
            context = generate_round(instance, k, streams.environment)
            est_error = policy.design.estimation_error_norm(theta_star)
            choice = policy.select_action(context.decision_set)
            x = context.decision_set[choice.index]
            sample = sample_reward(instance, x, streams.environment)
            corruption = adversary.corrupt(context, choice.index, x, sample.clean_reward, streams.adversary)
            w = policy.compute_weight(x, bonus=choice.bonus)
            policy.observe(x, corruption.corrupted_reward, w)

            instant_regret = context.optimal_value - float(context.arm_values[choice.index])
            cum_regret += instant_regret
            noise_sum = noise_sum + (w * sample.noise) * x
            corruption_sum = corruption_sum + (w * corruption.c_k) * x
            misspec_sum = misspec_sum + (w * sample.misspec) * x
            effective_spent += abs(corruption.c_k + sample.misspec)

            records.append(
                RoundRecord(
                    k=k,
                    action_index=choice.index,
                    weight=w,
                    bonus=choice.bonus,
                    clean_reward=sample.clean_reward,
                    c_k=corruption.c_k,
                    observed_reward=corruption.corrupted_reward,
                    instant_regret=instant_regret,
                    cum_regret=cum_regret,
                    est_error=est_error,
                    confidence_ok=est_error <= policy.beta,
                    misspec=sample.misspec,
                )
            )
            if k % snapshot_interval == 0 or k == K:
                design = policy.design
                snapshots.append(
                    EpisodeSnapshot(
                        round_index=k,
                        cov=design.cov.copy(),
                        logdet=design.logdet,
                        theta_hat=design.theta_hat.copy(),
                        noise_sum=noise_sum.copy(),
                        corruption_sum=corruption_sum.copy(),
                        corruption_spent=adversary.spent,
                        misspec_sum=misspec_sum.copy(),
                        effective_spent=effective_spent,
                    )
                )
    except EpisodeError:
        raise
    except Exception as e:
        raise EpisodeError(str(e), seed=seed, round_index=k, policy=policy_config.name) from e

    report = adversary.report()
    if report.exhausted:
        logger.warning(
            f"Corruption budget {report.budget:g} ran out at round {adversary.first_declined_round} "
            f"(policy={policy_config.name}, seed={seed})"
        )
    logger.debug(f"Episode done: policy={policy_config.name} seed={seed} regret={cum_regret:.6g}")

    return EpisodeResult(
        policy_name=policy_config.name,
        policy_kind=policy.kind,
        seed=seed,
        horizon=K,
        dim=dim,
        instance_name=instance.name,
        theta_star=theta_star,
        bounds=instance.bounds,
        beta=policy.beta,
        alpha=policy.alpha,
        lam=policy.config.lam,
        delta=policy.config.delta,
        records=records,
        snapshots=snapshots,
        corruption=report,
        derived=policy.derived(),
        misspec_epsilon=instance.misspec_epsilon,
    )


@dataclass(eq=False)
class RegretCurve:
    """Per-seed cumulative traces with their cross-seed summaries.

    Every trace matrix has one row per seed and one column per round.

    Attributes:
        seeds: Seeds in row order
        cumulative_regret: Cumulative pseudo-regret
        cumulative_corruption: Cumulative ``sum |c_k|``
        potential: Cumulative ``sum min(1, w_k bonus_k^2)``
        confidence_violations: Rounds with ``est_error > beta``, per seed
    """

    seeds: Tuple[int, ...]
    cumulative_regret: np.ndarray
    cumulative_corruption: Optional[np.ndarray] = None
    potential: Optional[np.ndarray] = None
    confidence_violations: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        regret = np.atleast_2d(np.asarray(self.cumulative_regret, dtype=np.float64))
        if regret.shape[0] != len(self.seeds):
            raise ContractError(f"{len(self.seeds)} seeds for {regret.shape[0]} regret rows", "harness")
        self.seeds = tuple(int(s) for s in self.seeds)
        self.cumulative_regret = regret
        if self.cumulative_corruption is None:
            self.cumulative_corruption = np.zeros_like(regret)
        if self.potential is None:
            self.potential = np.zeros_like(regret)
        if self.confidence_violations is None:
            self.confidence_violations = np.zeros(len(self.seeds), dtype=np.int64)
        self.cumulative_corruption = np.atleast_2d(np.asarray(self.cumulative_corruption, dtype=np.float64))
        self.potential = np.atleast_2d(np.asarray(self.potential, dtype=np.float64))
        self.confidence_violations = np.asarray(self.confidence_violations, dtype=np.int64)
        for trace in (self.cumulative_corruption, self.potential):
            if trace.shape != regret.shape:
                raise ContractError("All traces must share the regret shape", "harness")

    @classmethod
    def from_episode(cls, result: EpisodeResult) -> "RegretCurve":
        return cls(
            seeds=(result.seed,),
            cumulative_regret=result.cumulative_regret()[np.newaxis, :],
            cumulative_corruption=result.cumulative_corruption()[np.newaxis, :],
            potential=np.cumsum(result.potential_terms())[np.newaxis, :],
            confidence_violations=np.array([int(np.sum(~result.column("confidence_ok").astype(bool)))]),
        )

    @property
    def horizon(self) -> int:
        return int(self.cumulative_regret.shape[1])

    @property
    def num_seeds(self) -> int:
        return len(self.seeds)

    @property
    def mean(self) -> np.ndarray:
        return np.mean(self.cumulative_regret, axis=0)

    @property
    def std(self) -> np.ndarray:
        return np.std(self.cumulative_regret, axis=0)

    @property
    def seeds_with_violation(self) -> int:
        assert self.confidence_violations is not None
        return int(np.count_nonzero(self.confidence_violations))

    def summary_frame(self, metric: str = "cumulative_regret") -> pd.DataFrame:
        """Columns k, mean, std, min, max of one trace."""
        trace = getattr(self, metric)
        return pd.DataFrame(
            {
                "k": np.arange(1, trace.shape[1] + 1),
                "mean": np.mean(trace, axis=0),
                "std": np.std(trace, axis=0),
                "min": np.min(trace, axis=0),
                "max": np.max(trace, axis=0),
            }
        )


def aggregate(curves: Sequence[RegretCurve]) -> RegretCurve:
    """Stack curves into one, ordered by seed.

    Inputs are sorted (stably) by seed before any reduction, so the result does not depend on
    the order the curves arrive in.

    Raises:
        ContractError: If no curves are given or the horizons differ
    """
    if not curves:
        raise ContractError("Nothing to aggregate", "harness")
    horizons = {c.horizon for c in curves}
    if len(horizons) != 1:
        raise ContractError(f"Cannot aggregate curves with horizons {sorted(horizons)}", "harness")

    seeds = np.concatenate([np.asarray(c.seeds, dtype=np.int64) for c in curves])
    order = np.argsort(seeds, kind="stable")

    def stack(name: str) -> np.ndarray:
        return np.concatenate([getattr(c, name) for c in curves], axis=0)[order]

    return RegretCurve(
        seeds=tuple(int(s) for s in seeds[order]),
        cumulative_regret=stack("cumulative_regret"),
        cumulative_corruption=stack("cumulative_corruption"),
        potential=stack("potential"),
        confidence_violations=np.concatenate([c.confidence_violations for c in curves])[order],
    )


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2 or np.any(xs <= 0) or np.any(ys <= 0):
        raise ContractError("A log-log fit needs at least two positive points", "harness")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


def fit_affine(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """Least-squares (slope, intercept) of y against x."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2:
        raise ContractError("An affine fit needs at least two points", "harness")
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(slope), float(intercept)


def instance_dependent_ratio(regret: float, d: int, gap: float, corruption_level: float) -> float:
    """``regret / (d^2 / gap + d C)``."""
    if gap <= 0:
        raise ContractError("The gap must be positive", "harness")
    return regret / (d**2 / gap + d * corruption_level)


def late_horizon_slope(mean_regret: np.ndarray) -> float:
    """``(regret(K) - regret(K/2)) / (K/2)`` of a mean cumulative-regret trace."""
    K = len(mean_regret)
    half = K // 2
    if half < 1:
        raise ContractError("Need at least two rounds", "harness")
    return float((mean_regret[K - 1] - mean_regret[half - 1]) / (K - half))


@dataclass(eq=False)
class LowerBoundReport:
    """Outcome of the paired A0 / A1 experiment.

    Attributes:
        divergence_round: First round where the two action sequences differ (None if never)
        first_declined_round: First round the flip adversary ran out of budget (None if never)
        regret_bound: ``(1/8) * (K - 16 * budget_param / (d - 1))``
        bound_applicable: The flip budget was never exhausted
        bound_holds: A1 regret reaches the bound
        indistinguishable: Observations on A0 and A1 agree up to the first declined flip
    """

    d: int
    budget_param: float
    budget: float
    horizon: int
    seed: int
    policy: str
    regret_a0: float
    regret_a1: float
    divergence_round: Optional[int]
    first_declined_round: Optional[int]
    C_realized: float
    rounds_corrupted: int
    regret_bound: float
    bound_applicable: bool
    bound_holds: bool
    indistinguishable: bool
    theta_a0: Tuple[float, ...] = ()
    theta_a1: Tuple[float, ...] = ()
    a0_result: Optional[EpisodeResult] = field(default=None, repr=False)
    a1_result: Optional[EpisodeResult] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "budget_param": self.budget_param,
            "budget": self.budget,
            "horizon": self.horizon,
            "seed": self.seed,
            "policy": self.policy,
            "theta_a0": list(self.theta_a0),
            "theta_a1": list(self.theta_a1),
            "regret_a0": self.regret_a0,
            "regret_a1": self.regret_a1,
            "divergence_round": self.divergence_round,
            "first_declined_round": self.first_declined_round,
            "C_realized": self.C_realized,
            "rounds_corrupted": self.rounds_corrupted,
            "regret_bound": self.regret_bound,
            "bound_applicable": self.bound_applicable,
            "bound_holds": self.bound_holds,
            "indistinguishable": self.indistinguishable,
        }


def lower_bound_policy(kind: "PolicyKind | str", pair: LowerBoundPair, K: int, delta: float = 0.05) -> PolicyConfig:
    """Policy for the paired experiment, told the flip budget as its corruption level."""
    kind = PolicyKind(kind)
    d = pair.a0.dim
    budget = 4.0 * pair.budget_param / (d - 1)
    level = 0.0 if kind is PolicyKind.OFUL else budget
    return build_policy_config(kind.value, kind, d, K, pair.a0.bounds, corruption_level=level, delta=delta)


def paired_lower_bound_run(
    d: int,
    budget_param: float,
    policy: "PolicyKind | str | PolicyConfig",
    K: int,
    seed: int = 0,
    snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL,
) -> LowerBoundReport:
    """Run one policy on A0 (clean) and on A1 (with the flip adversary) with the same seed.

    Args:
        d: Dimension (>= 2)
        budget_param: Corruption budget parameter; the flip budget is ``4 * budget_param / (d - 1)``
        policy: Policy kind, or a full PolicyConfig built for the pair's bounds
        K: Horizon
        seed: Shared episode seed

    Returns:
        LowerBoundReport
    """
    pair = lower_bound_instance_pair(d, budget_param)
    adversary = lower_bound_adversary(budget_param, d)
    config = policy if isinstance(policy, PolicyConfig) else lower_bound_policy(policy, pair, K)

    a0 = run_episode(pair.a0, AdversaryState(NoCorruption()), config, K, seed, snapshot_interval)
    a1 = run_episode(pair.a1, adversary, config, K, seed, snapshot_interval)

    actions_a0, actions_a1 = a0.actions, a1.actions
    differing = np.flatnonzero(actions_a0 != actions_a1)
    divergence = int(differing[0]) + 1 if differing.size else None

    first_declined = a1.corruption.first_declined_round
    agree_until = first_declined if first_declined is not None else K + 1
    observed_a0 = a0.column("observed_reward")[: agree_until - 1]
    observed_a1 = a1.column("observed_reward")[: agree_until - 1]
    same_observations = bool(np.array_equal(observed_a0, observed_a1))
    same_actions = divergence is None or (first_declined is not None and divergence > first_declined)

    budget = adversary.budget
    bound = 0.125 * (K - 4.0 * budget)
    applicable = not a1.corruption.exhausted
    report = LowerBoundReport(
        d=d,
        budget_param=float(budget_param),
        budget=budget,
        horizon=K,
        seed=seed,
        policy=config.name,
        regret_a0=a0.total_regret,
        regret_a1=a1.total_regret,
        divergence_round=divergence,
        first_declined_round=first_declined,
        C_realized=a1.corruption.C_realized,
        rounds_corrupted=a1.corruption.rounds_corrupted,
        regret_bound=bound,
        bound_applicable=applicable,
        bound_holds=a1.total_regret >= bound,
        indistinguishable=same_observations and same_actions,
        theta_a0=tuple(float(v) for v in pair.a0.theta_star),
        theta_a1=tuple(float(v) for v in pair.a1.theta_star),
        a0_result=a0,
        a1_result=a1,
    )
    logger.info(
        f"Lower-bound pair d={d} budget={budget:g}: regret A0={report.regret_a0:.6g}, "
        f"A1={report.regret_a1:.6g}, divergence={divergence}, first declined={first_declined}"
    )
    return report


def confidence_violation_rate(results: Sequence[EpisodeResult]) -> float:
    """Fraction of episodes with at least one round where ``est_error > beta``."""
    if not results:
        return math.nan
    violated = sum(1 for r in results if any(not rec.confidence_ok for rec in r.records))
    return violated / len(results)
