"""Numerical checks of the inequalities the regret analysis rests on.

Hard checks must hold on every single run (they are deterministic consequences of the update
rules). Rate checks are probabilistic statements; they are measured as the fraction of seeds
violating them and compared with delta.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from .harness import EpisodeResult, EpisodeSnapshot
from .policies import misspecification_corruption_level

logger = logging.getLogger(__name__)

POTENTIAL_TOLERANCE = 1e-6
CORRUPTION_TOLERANCE = 1e-9
WEIGHT_TOLERANCE = 1e-12
MONOTONE_TOLERANCE = 1e-10
NUM_DIRECTIONS = 8


@dataclass(frozen=True)
class CheckResult:
    """One inequality ``value <= bound`` evaluated on one run."""

    name: str
    policy: str
    seed: int
    value: float
    bound: float
    passed: bool
    hard: bool = True

    @property
    def margin(self) -> float:
        return self.bound - self.value


@dataclass(frozen=True)
class RateCheck:
    """Cross-seed violation rate of a probabilistic event."""

    name: str
    policy: str
    violations: int
    runs: int
    delta: float

    @property
    def rate(self) -> float:
        return self.violations / self.runs if self.runs else math.nan

    @property
    def slack(self) -> float:
        """Three binomial standard deviations at rate delta."""
        if not self.runs:
            return math.nan
        return 3.0 * math.sqrt(self.delta * (1.0 - self.delta) / self.runs)

    @property
    def within_delta(self) -> bool:
        return self.rate <= self.delta + self.slack


@dataclass
class DiagnosticReport:
    checks: List[CheckResult] = field(default_factory=list)
    rates: List[RateCheck] = field(default_factory=list)

    @property
    def hard_failures(self) -> List[CheckResult]:
        return [c for c in self.checks if c.hard and not c.passed]

    @property
    def all_hard_passed(self) -> bool:
        return not self.hard_failures

    def extend(self, other: "DiagnosticReport") -> None:
        self.checks.extend(other.checks)
        self.rates.extend(other.rates)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "check": c.name,
                "policy": c.policy,
                "seed": c.seed,
                "value": c.value,
                "bound": c.bound,
                "margin": c.margin,
                "passed": int(c.passed),
                "hard": int(c.hard),
            }
            for c in self.checks
        ]
        return pd.DataFrame(rows, columns=["check", "policy", "seed", "value", "bound", "margin", "passed", "hard"])

    def rates_frame(self) -> pd.DataFrame:
        rows = [
            {
                "check": r.name,
                "policy": r.policy,
                "violations": r.violations,
                "runs": r.runs,
                "rate": r.rate,
                "delta": r.delta,
                "within_delta": int(r.within_delta),
            }
            for r in self.rates
        ]
        return pd.DataFrame(rows, columns=["check", "policy", "violations", "runs", "rate", "delta", "within_delta"])


def _inverse_norm(cov: np.ndarray, v: np.ndarray) -> float:
    return math.sqrt(max(float(v @ np.linalg.solve(cov, v)), 0.0))


def potential_check(result: EpisodeResult) -> CheckResult:
    """``sum min(1, w_k bonus_k^2) <= 2 (log det Sigma_K - d log lambda)``.

    The right side uses a dense log-determinant of the final design, independent of the
    incrementally maintained one.
    """
    total = float(np.sum(result.potential_terms()))
    final = result.snapshots[-1]
    _, logdet = np.linalg.slogdet(final.cov)
    bound = 2.0 * (float(logdet) - result.dim * math.log(result.lam))
    return CheckResult("potential", result.policy_name, result.seed, total, bound, total <= bound + POTENTIAL_TOLERANCE)


def corruption_term_checks(result: EpisodeResult) -> List[CheckResult]:
    """``||sum w_i e_i x_i||_{Sigma_k^{-1}} <= alpha * sum |e_i|`` on each snapshot, plus the per-round form.

    ``e_i = c_i + m_i`` is everything that separates the observation from the linear model
    plus noise: the adversary's corruption and the misspecification of the instance. Uncapped
    runs that saw either have no finite bound and are skipped.
    """
    alpha = result.alpha
    checks: List[CheckResult] = []
    worst_value, worst_gap, worst_bound = 0.0, -math.inf, 0.0
    for snap in result.snapshots:
        value = _inverse_norm(snap.cov, snap.corruption_sum + snap.misspec_sum)
        if snap.effective_spent == 0.0:
            bound = 0.0
        elif math.isinf(alpha):
            return checks
        else:
            bound = alpha * snap.effective_spent
        if value - bound > worst_gap:
            worst_value, worst_gap, worst_bound = value, value - bound, bound
    checks.append(
        CheckResult(
            "corruption_term",
            result.policy_name,
            result.seed,
            worst_value,
            worst_bound,
            worst_value <= worst_bound + CORRUPTION_TOLERANCE,
        )
    )

    deviation = np.abs(result.column("c_k") + result.column("misspec"))
    weighted = float(np.sum(deviation * result.column("weight") * result.column("bonus")))
    spent = float(np.sum(deviation))
    bound = 0.0 if spent == 0.0 else alpha * spent
    checks.append(
        CheckResult(
            "corruption_weighted_bonus",
            result.policy_name,
            result.seed,
            weighted,
            bound,
            weighted <= bound + CORRUPTION_TOLERANCE,
        )
    )
    return checks


def misspecification_level_check(result: EpisodeResult) -> CheckResult:
    """The realized ``sum |m_k|`` stays within the equivalent corruption level ``K * eps``."""
    total = float(np.sum(np.abs(result.column("misspec"))))
    bound = misspecification_corruption_level(result.misspec_epsilon, result.horizon)
    passed = total <= bound + CORRUPTION_TOLERANCE * max(1.0, bound)
    return CheckResult("misspecification_level", result.policy_name, result.seed, total, bound, passed)


def regularization_check(result: EpisodeResult) -> CheckResult:
    """``lambda ||theta*||_{Sigma_k^{-1}} <= sqrt(lambda) ||theta*||`` on every snapshot."""
    bound = math.sqrt(result.lam) * float(np.linalg.norm(result.theta_star))
    value = max(result.lam * _inverse_norm(s.cov, result.theta_star) for s in result.snapshots)
    return CheckResult(
        "regularization", result.policy_name, result.seed, value, bound, value <= bound * (1.0 + 1e-12) + 1e-15
    )


def weight_cap_check(result: EpisodeResult) -> CheckResult:
    """Weights lie in (0, 1] and ``w_k bonus_k <= alpha``; all ones once ``alpha >= L / sqrt(lambda)``."""
    weights = result.column("weight")
    bonuses = result.column("bonus")
    in_range = bool(np.all((weights > 0.0) & (weights <= 1.0)))
    if math.isinf(result.alpha):
        value, bound = float(np.max(np.abs(weights - 1.0))), 0.0
        return CheckResult("weight_cap", result.policy_name, result.seed, value, bound, in_range and value == 0.0)

    value = float(np.max(weights * bonuses))
    passed = in_range and value <= result.alpha + WEIGHT_TOLERANCE
    if result.alpha >= result.bounds.L / math.sqrt(result.lam):
        passed = passed and bool(np.all(weights >= 1.0 - WEIGHT_TOLERANCE))
    return CheckResult("weight_cap", result.policy_name, result.seed, value, result.alpha, passed)


def budget_ledger_check(result: EpisodeResult) -> CheckResult:
    """The logged ``sum |c_k|`` equals the adversary's total and stays within its budget."""
    logged = float(result.cumulative_corruption()[-1])
    report = result.corruption
    passed = logged == report.C_realized and report.C_realized <= report.budget
    return CheckResult("budget_ledger", result.policy_name, result.seed, logged, report.budget, passed)


def monotone_inverse_check(result: EpisodeResult) -> CheckResult:
    """Later designs dominate earlier ones, so ``x^T Sigma^{-1} x`` never grows between snapshots."""
    rng = np.random.Generator(np.random.Philox(0))
    directions = np.vstack([np.eye(result.dim), rng.standard_normal((NUM_DIRECTIONS, result.dim))])
    worst = 0.0
    previous = np.eye(result.dim) * result.lam
    for snap in result.snapshots:
        before = np.einsum("ij,ij->i", directions, np.linalg.solve(previous, directions.T).T)
        after = np.einsum("ij,ij->i", directions, np.linalg.solve(snap.cov, directions.T).T)
        worst = max(worst, float(np.max((after - before) / np.maximum(before, 1e-300))))
        previous = snap.cov
    return CheckResult(
        "monotone_inverse", result.policy_name, result.seed, worst, MONOTONE_TOLERANCE, worst <= MONOTONE_TOLERANCE
    )


def self_normalized_violated(result: EpisodeResult, snapshot: EpisodeSnapshot) -> bool:
    """``||sum w eta x||^2_{Sigma^{-1}} > 2 R^2 (1/2 (log det Sigma - d log lambda) + log(1/delta))``."""
    R = result.bounds.R
    value = _inverse_norm(snapshot.cov, snapshot.noise_sum) ** 2
    _, logdet = np.linalg.slogdet(snapshot.cov)
    bound = 2.0 * R**2 * (0.5 * (float(logdet) - result.dim * math.log(result.lam)) + math.log(1.0 / result.delta))
    return value > bound


def run_checks(result: EpisodeResult) -> List[CheckResult]:
    """All per-run hard checks of one episode."""
    checks = [potential_check(result)]
    checks.extend(corruption_term_checks(result))
    checks.append(regularization_check(result))
    checks.append(weight_cap_check(result))
    checks.append(budget_ledger_check(result))
    checks.append(misspecification_level_check(result))
    checks.append(monotone_inverse_check(result))
    for check in checks:
        if not check.passed:
            logger.warning(
                f"Check {check.name} failed for {check.policy} seed {check.seed}: "
                f"value {check.value:.6g} vs bound {check.bound:.6g}"
            )
    return checks


def diagnostic_lemma_checks(results: Sequence[EpisodeResult]) -> DiagnosticReport:
    """Run every hard check on each episode and the rate checks across seeds, per policy.

    Args:
        results: Episodes (any mix of policies and seeds)

    Returns:
        DiagnosticReport
    """
    report = DiagnosticReport()
    by_policy: Dict[str, List[EpisodeResult]] = {}
    for result in sorted(results, key=lambda r: (r.policy_name, r.seed)):
        report.checks.extend(run_checks(result))
        by_policy.setdefault(result.policy_name, []).append(result)

    for name, group in by_policy.items():
        delta = group[0].delta
        confidence = sum(1 for r in group if any(not rec.confidence_ok for rec in r.records))
        self_normalized = sum(1 for r in group if any(self_normalized_violated(r, s) for s in r.snapshots))
        report.rates.append(RateCheck("confidence", name, confidence, len(group), delta))
        report.rates.append(RateCheck("self_normalized", name, self_normalized, len(group), delta))
        for rate in report.rates[-2:]:
            if not rate.within_delta:
                logger.warning(f"{rate.name} violation rate {rate.rate:.4f} above delta {delta:g} for {name}")
    return report
