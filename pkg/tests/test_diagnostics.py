"""Tests for the per-run inequality checks and the cross-seed rates."""

import dataclasses
import math

import numpy as np
import pytest

from robust_linear_bandits.adversary import AdversaryState, NoCorruption, OptimalActionSuppression
from robust_linear_bandits.diagnostics import (
    RateCheck,
    budget_ledger_check,
    corruption_term_checks,
    diagnostic_lemma_checks,
    misspecification_level_check,
    monotone_inverse_check,
    potential_check,
    regularization_check,
    run_checks,
    weight_cap_check,
)
from robust_linear_bandits.environment import BanditInstance, Bounds, FreshSphereSample
from robust_linear_bandits.harness import run_episode
from robust_linear_bandits.policies import build_policy_config

K = 300


@pytest.fixture(scope="module")
def instance():
    return BanditInstance(np.array([0.5, 0.2, -0.4]), Bounds(R=0.3), FreshSphereSample(8), name="sphere")


def _run(instance, kind="cw_oful", budget=5.0, seed=0):
    adversary = AdversaryState(OptimalActionSuppression(shift=0.5), budget=budget)
    policy = build_policy_config(kind, kind, instance.dim, K, instance.bounds, corruption_level=budget)
    return run_episode(instance, adversary, policy, K, seed, snapshot_interval=25)


@pytest.fixture(scope="module")
def corrupted_run(instance):
    return _run(instance)


def test_all_hard_checks_pass_on_corrupted_run(corrupted_run):
    checks = run_checks(corrupted_run)
    assert {c.name for c in checks} == {
        "potential",
        "corruption_term",
        "corruption_weighted_bonus",
        "regularization",
        "weight_cap",
        "budget_ledger",
        "misspecification_level",
        "monotone_inverse",
    }
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]


def test_potential_inequality(corrupted_run):
    check = potential_check(corrupted_run)
    assert check.passed
    assert 0.0 < check.value <= check.bound
    assert check.margin >= 0.0


def test_corruption_term_vanishes_without_corruption(instance):
    result = _run(instance, budget=0.0)
    for check in corruption_term_checks(result):
        assert check.value == 0.0
        assert check.passed


def test_corruption_term_within_alpha_budget(corrupted_run):
    assert corrupted_run.corruption.C_realized > 0.0
    for check in corruption_term_checks(corrupted_run):
        assert check.value <= check.bound + 1e-9


def test_uncapped_corrupted_run_skips_corruption_term(instance):
    result = _run(instance, kind="oful")
    assert math.isinf(result.alpha)
    assert corruption_term_checks(result) == []


def test_regularization_and_monotonicity(corrupted_run):
    assert regularization_check(corrupted_run).passed
    assert monotone_inverse_check(corrupted_run).passed


def test_weight_cap(corrupted_run):
    check = weight_cap_check(corrupted_run)
    assert check.passed
    assert check.value <= corrupted_run.alpha + 1e-12


def test_ledger_mismatch_is_reported(instance):
    result = _run(instance)
    assert budget_ledger_check(result).passed
    result.corruption = dataclasses.replace(result.corruption, C_realized=result.corruption.C_realized + 0.25)
    assert not budget_ledger_check(result).passed


def test_report_over_policies_and_seeds(instance):
    results = [_run(instance, kind, seed=s) for kind in ("cw_oful", "oful") for s in range(3)]
    report = diagnostic_lemma_checks(results)
    assert report.all_hard_passed
    assert {(r.name, r.policy) for r in report.rates} == {
        ("confidence", "cw_oful"),
        ("self_normalized", "cw_oful"),
        ("confidence", "oful"),
        ("self_normalized", "oful"),
    }
    assert all(r.runs == 3 for r in report.rates)

    frame = report.to_frame()
    assert set(frame["policy"]) == {"cw_oful", "oful"}
    assert list(report.rates_frame().columns) == ["check", "policy", "violations", "runs", "rate", "delta", "within_delta"]


def test_rate_check_slack():
    rate = RateCheck("confidence", "p", violations=1, runs=10, delta=0.05)
    assert rate.rate == pytest.approx(0.1)
    assert rate.slack == pytest.approx(3.0 * math.sqrt(0.05 * 0.95 / 10))
    assert rate.within_delta
    assert not RateCheck("confidence", "p", violations=8, runs=10, delta=0.05).within_delta


@pytest.fixture(scope="module")
def misspecified_run():
    epsilon = 0.05
    instance = BanditInstance(
        np.array([0.5, 0.2, -0.4]), Bounds(R=0.3), FreshSphereSample(8), misspec_epsilon=epsilon, name="misspec"
    )
    policy = build_policy_config("cw_oful", "cw_oful", 3, K, instance.bounds, corruption_level=K * epsilon)
    return run_episode(instance, AdversaryState(NoCorruption()), policy, K, 0, snapshot_interval=25)


def test_misspecification_counts_as_corruption(misspecified_run):
    assert misspecified_run.corruption.C_realized == 0.0
    assert np.all(np.abs(misspecified_run.column("misspec")) <= 0.05)
    assert misspecified_run.snapshots[-1].effective_spent > 0.0

    checks = corruption_term_checks(misspecified_run)
    assert [c.name for c in checks] == ["corruption_term", "corruption_weighted_bonus"]
    for check in checks:
        assert check.value > 0.0
        assert check.bound > 0.0
        assert check.passed


def test_misspecification_level(misspecified_run):
    check = misspecification_level_check(misspecified_run)
    assert check.passed
    assert check.bound == pytest.approx(K * 0.05)
    assert 0.0 < check.value <= check.bound + 1e-9
    assert all(c.passed for c in run_checks(misspecified_run))
