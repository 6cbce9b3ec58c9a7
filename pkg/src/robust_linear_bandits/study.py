"""Study orchestration: expand a configuration into episodes, run them, write the outputs."""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .adversary import AdversaryState
from .config import CellPlan, ExperimentConfig
from .diagnostics import DiagnosticReport, diagnostic_lemma_checks
from .environment import PRNG_FAMILY, BanditInstance, FixedFinite, BasisArms, minimal_gap
from .exceptions import EpisodeError
from .harness import (
    EpisodeResult,
    LowerBoundReport,
    RegretCurve,
    aggregate,
    fit_affine,
    fit_loglog_slope,
    instance_dependent_ratio,
    late_horizon_slope,
    run_episode,
)
from .policies import PolicyConfig
from .storage import ResultStore

logger = logging.getLogger(__name__)

TOOL_NAME = "robust-linear-bandits"


@dataclass(frozen=True, eq=False)
class EpisodeTask:
    """One (cell, policy, seed) unit of work; picklable for worker processes."""

    cell_index: int
    policy_index: int
    cell_name: str
    instance: BanditInstance
    adversary: AdversaryState
    policy: PolicyConfig
    horizon: int
    seed: int
    snapshot_interval: int

    @property
    def order(self) -> Tuple[int, int, int]:
        return (self.cell_index, self.policy_index, self.seed)


def run_task(task: EpisodeTask) -> Tuple[Tuple[int, int, int], EpisodeResult]:
    result = run_episode(task.instance, task.adversary, task.policy, task.horizon, task.seed, task.snapshot_interval)
    return task.order, result


@dataclass(eq=False)
class CellResults:
    plan: CellPlan
    episodes: Dict[str, List[EpisodeResult]]

    def curve(self, policy_name: str) -> RegretCurve:
        return aggregate([RegretCurve.from_episode(r) for r in self.episodes[policy_name]])


@dataclass(eq=False)
class ScalingTable:
    cells: pd.DataFrame
    fits: pd.DataFrame


class ExperimentRunner:
    """Runs every (grid cell x policy x seed) episode of a configuration."""

    def __init__(self, config: ExperimentConfig, jobs: Optional[int] = None) -> None:
        """Initialize the runner.

        Args:
            config: Validated experiment configuration
            jobs: Worker processes; defaults to the configured value, then the CPU count
        """
        self.config = config
        self.jobs = jobs or config.experiment.jobs or os.cpu_count() or 1
        self.plans: List[CellPlan] = [config.materialize(cell) for cell in config.cells()]

    def tasks(self) -> List[EpisodeTask]:
        exp = self.config.experiment
        tasks = []
        for cell_index, plan in enumerate(self.plans):
            for policy_index, policy in enumerate(plan.policies):
                for seed in exp.seeds:
                    tasks.append(
                        EpisodeTask(
                            cell_index=cell_index,
                            policy_index=policy_index,
                            cell_name=plan.cell.name,
                            instance=plan.instance,
                            adversary=plan.adversary,
                            policy=policy,
                            horizon=plan.cell.horizon,
                            seed=seed,
                            snapshot_interval=exp.snapshot_interval,
                        )
                    )
        return tasks

    def run_episodes(self) -> List[CellResults]:
        """Execute all episodes and group them by cell and policy, ordered by seed.

        Raises:
            EpisodeError: For the first episode that fails
        """
        tasks = self.tasks()
        logger.info(f"Running {len(tasks)} episodes on {min(self.jobs, len(tasks))} worker(s)")
        outcomes: List[Tuple[Tuple[int, int, int], EpisodeResult]] = []

        if self.jobs == 1 or len(tasks) == 1:
            for task in tasks:
                outcomes.append(run_task(task))
        else:
            with ProcessPoolExecutor(max_workers=self.jobs) as executor:
                futures = {executor.submit(run_task, task): task for task in tasks}
                try:
                    for future in as_completed(futures):
                        outcomes.append(future.result())
                except Exception:
                    for pending in futures:
                        pending.cancel()
                    raise

        outcomes.sort(key=lambda item: item[0])
        grouped = [CellResults(plan, {p.name: [] for p in plan.policies}) for plan in self.plans]
        for (cell_index, policy_index, _), result in outcomes:
            plan = self.plans[cell_index]
            grouped[cell_index].episodes[plan.policies[policy_index].name].append(result)
        logger.info(f"Finished {len(outcomes)} episodes")
        return grouped

    def run(self, store: ResultStore) -> List[CellResults]:
        """Run the study and write logs, aggregates and metadata.

        Raises:
            EpisodeError: If an episode fails (the store is left marked incomplete)
            FileSystemError: If outputs cannot be written
        """
        store.begin()
        try:
            cells = self.run_episodes()
            self.write_results(store, cells)
        except Exception as e:
            store.fail(failure_report(e))
            raise
        store.write_yaml(self.metadata(cells, "complete"), "metadata.yaml")
        store.complete()
        return cells

    def check(self, store: ResultStore) -> Tuple[List[CellResults], DiagnosticReport]:
        """Run the study and the diagnostic checks, writing ``diagnostics.csv`` as well."""
        store.begin()
        try:
            cells = self.run_episodes()
            self.write_results(store, cells)
        except Exception as e:
            store.fail(failure_report(e))
            raise

        report = DiagnosticReport()
        check_rows = []
        rate_rows = []
        for cell in cells:
            cell_report = diagnostic_lemma_checks([r for group in cell.episodes.values() for r in group])
            report.extend(cell_report)
            frame = cell_report.to_frame()
            frame.insert(0, "cell", cell.plan.cell.name)
            check_rows.append(frame)
            rates = cell_report.rates_frame()
            rates.insert(0, "cell", cell.plan.cell.name)
            rate_rows.append(rates)
        store.write_frame(pd.concat(check_rows, ignore_index=True), "diagnostics.csv")
        store.write_frame(pd.concat(rate_rows, ignore_index=True), "diagnostic_rates.csv")
        status = "complete" if report.all_hard_passed else "checks_failed"
        store.write_yaml(self.metadata(cells, status), "metadata.yaml")
        store.complete()
        return cells, report

    def write_results(self, store: ResultStore, cells: List[CellResults]) -> None:
        for cell in cells:
            name = cell.plan.cell.name
            for policy_name, episodes in cell.episodes.items():
                for result in episodes:
                    store.write_frame(result.to_frame(), name, policy_name, f"rounds_seed{result.seed}.csv")
                curve = cell.curve(policy_name)
                store.write_frame(curve.summary_frame("cumulative_regret"), name, policy_name, "cumulative_regret.csv")
                store.write_frame(
                    curve.summary_frame("cumulative_corruption"), name, policy_name, "cumulative_corruption.csv"
                )
                store.write_frame(curve.summary_frame("potential"), name, policy_name, "potential.csv")
        if self.config.grid is not None:
            table = summarize_scaling(cells)
            store.write_frame(table.cells, "scaling.csv")
            store.write_frame(table.fits, "scaling_fits.csv")

    def metadata(self, cells: List[CellResults], status: str) -> Dict[str, Any]:
        derived: Dict[str, Dict[str, Any]] = {}
        for cell in cells:
            entry = {}
            for policy_name, episodes in cell.episodes.items():
                if episodes:
                    entry[policy_name] = {k: _plain(v) for k, v in episodes[0].derived.items()}
            derived[cell.plan.cell.name] = entry
        return {
            "tool": {"name": TOOL_NAME, "version": __version__},
            "prng": {"family": PRNG_FAMILY},
            "config": self.config.to_dict(),
            "derived": derived,
            "status": status,
        }


def failure_report(error: Exception) -> Dict[str, Any]:
    if isinstance(error, EpisodeError):
        return error.to_dict()
    return {"error_type": type(error).__name__, "message": str(error)}


def _plain(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def summarize_scaling(cells: List[CellResults]) -> ScalingTable:
    """Mean regret per (cell, policy) and the scaling fits across cells.

    Fits: log-log slope of regret against K over uncorrupted cells, and the affine slope of
    regret against C at fixed K. Fixed-arm instances also get ``regret / (d^2/gap + d C)``.
    """
    rows = []
    for cell in cells:
        plan = cell.plan
        level = plan.adversary.budget if math.isfinite(plan.adversary.budget) else math.nan
        gap = None
        if isinstance(plan.instance.decision_set, (FixedFinite, BasisArms)):
            gap = minimal_gap(plan.instance)
        for policy_name, episodes in cell.episodes.items():
            curve = cell.curve(policy_name)
            mean = curve.mean
            row: Dict[str, Any] = {
                "cell": plan.cell.name,
                "policy": policy_name,
                "K": plan.cell.horizon,
                "C": level,
                "d": plan.cell.dim,
                "num_seeds": curve.num_seeds,
                "mean_regret": float(mean[-1]),
                "std_regret": float(curve.std[-1]),
                "mean_C_realized": float(np.mean([r.corruption.C_realized for r in episodes])),
                "late_slope": late_horizon_slope(mean) if plan.cell.horizon >= 2 else math.nan,
                "gap": gap if gap is not None else math.nan,
                "gap_ratio": math.nan,
            }
            if gap is not None:
                row["gap_ratio"] = instance_dependent_ratio(row["mean_regret"], plan.cell.dim, gap, row["mean_C_realized"])
            rows.append(row)
    table = pd.DataFrame(rows)

    fits = []
    for (policy, d), group in table.groupby(["policy", "d"], sort=True):
        clean = group[(group["mean_C_realized"] == 0.0) & (group["mean_regret"] > 0)].sort_values("K")
        if clean["K"].nunique() >= 2:
            fits.append(
                {"policy": policy, "d": d, "fit": "loglog_regret_vs_K", "K": math.nan,
                 "slope": fit_loglog_slope(clean["K"], clean["mean_regret"]), "intercept": math.nan}
            )
        for K, at_k in group.groupby("K", sort=True):
            if at_k["C"].nunique() >= 2:
                slope, intercept = fit_affine(at_k["C"], at_k["mean_regret"])
                fits.append(
                    {"policy": policy, "d": d, "fit": "affine_regret_vs_C", "K": K, "slope": slope,
                     "intercept": intercept}
                )
    fit_frame = pd.DataFrame(fits, columns=["policy", "d", "fit", "K", "slope", "intercept"])
    return ScalingTable(cells=table, fits=fit_frame)


def scaling_study(config: ExperimentConfig, jobs: Optional[int] = 1) -> ScalingTable:
    """Run every grid cell of a configuration and summarize regret against K, C and d."""
    runner = ExperimentRunner(config, jobs)
    return summarize_scaling(runner.run_episodes())


def write_lower_bound(store: ResultStore, report: LowerBoundReport) -> None:
    """Per-round logs of both runs and the paired report."""
    store.begin()
    assert report.a0_result is not None and report.a1_result is not None
    store.write_frame(report.a0_result.to_frame(), "lowerbound", "A0_rounds.csv")
    store.write_frame(report.a1_result.to_frame(), "lowerbound", "A1_rounds.csv")
    store.write_yaml(
        {
            "tool": {"name": TOOL_NAME, "version": __version__},
            "prng": {"family": PRNG_FAMILY},
            "report": {k: _plain(v) for k, v in report.to_dict().items()},
        },
        "lowerbound_report.yaml",
    )
    store.complete()
