"""Experiment configuration: YAML parsing, validation and resolution into runnable objects.

A configuration file has the sections ``experiment``, ``instance``, ``adversary``, ``policies``
and optionally ``grid``. Validation errors name the dotted field and the line it came from.
"""

import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from .adversary import (
    AdversaryState,
    BudgetedTargetFlip,
    Misspecification,
    NoCorruption,
    OptimalActionSuppression,
    PreActionWorstCase,
    nominal_corruption_level,
)
from .environment import (
    BanditInstance,
    BasisArms,
    Bounds,
    DecisionSetSpec,
    FixedFinite,
    FreshSphereSample,
    NoiseKind,
    random_theta,
)
from .exceptions import ConfigurationError, FileSystemError
from .policies import UNCAPPED, BetaModeKind, PolicyConfig, PolicyKind, TieBreak, build_policy_config

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "ROBUST_BANDITS_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "results"
DEFAULT_SNAPSHOT_INTERVAL = 50

ADVERSARY_KINDS = ("none", "target_flip", "suppression", "misspecification", "pre_action")
DECISION_SET_KINDS = ("fixed", "fresh_sphere", "basis")

_MISSING = object()


@dataclass(frozen=True)
class ExperimentSettings:
    name: str
    horizon: int
    seeds: Tuple[int, ...]
    output_dir: Optional[str] = None
    snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL
    jobs: Optional[int] = None


@dataclass(frozen=True)
class InstanceSpec:
    """Instance section; ``theta_star`` is a tuple or the string ``random``."""

    dim: int
    theta_star: Union[Tuple[float, ...], str]
    bounds: Bounds
    decision_set: DecisionSetSpec
    noise: NoiseKind = NoiseKind.GAUSSIAN
    misspec_epsilon: float = 0.0
    instance_seed: int = 0
    theta_norm: Optional[float] = None


@dataclass(frozen=True)
class AdversarySpec:
    kind: str = "none"
    budget: float = 0.0
    target_arm: Optional[int] = None
    flip_to: Optional[float] = None
    magnitude: Optional[float] = None
    shift: Optional[float] = None
    table: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class PolicySpec:
    """One entry of ``policies``; ``auto`` / ``uncapped`` stay symbolic until resolution."""

    name: str
    kind: PolicyKind
    beta_mode: BetaModeKind = BetaModeKind.KNOWN_C
    corruption_level: Union[float, str] = "auto"
    corruption_estimate: Optional[float] = None
    alpha: Union[float, str] = "auto"
    lam: Union[float, str] = "auto"
    beta: Optional[float] = None
    delta: float = 0.05
    tie_break: TieBreak = TieBreak.FIRST


@dataclass(frozen=True)
class GridSpec:
    horizon: Tuple[int, ...] = ()
    corruption: Tuple[float, ...] = ()
    dim: Tuple[int, ...] = ()


@dataclass(frozen=True)
class GridCell:
    """One point of the study grid; ``budget`` is None when the adversary budget is not varied."""

    name: str
    horizon: int
    dim: int
    budget: Optional[float] = None


@dataclass(eq=False)
class CellPlan:
    cell: GridCell
    instance: BanditInstance
    adversary: AdversaryState
    policies: List[PolicyConfig]


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentSettings
    instance: InstanceSpec
    adversary: AdversarySpec
    policies: Tuple[PolicySpec, ...]
    grid: Optional[GridSpec] = None
    lines: Dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def cells(self) -> List[GridCell]:
        """Grid cells in a fixed order (horizon, corruption, dim)."""
        base_k, base_d = self.experiment.horizon, self.instance.dim
        if self.grid is None:
            return [GridCell("main", base_k, base_d)]
        horizons = self.grid.horizon or (base_k,)
        budgets: Tuple[Optional[float], ...] = self.grid.corruption or (None,)
        dims = self.grid.dim or (base_d,)
        cells = []
        for K in horizons:
            for budget in budgets:
                for d in dims:
                    level = self.adversary.budget if budget is None else budget
                    cells.append(GridCell(f"K{K}_C{level:g}_d{d}", K, d, budget))
        return cells

    def materialize(self, cell: GridCell) -> CellPlan:
        """Build the instance, adversary and resolved policies of one cell."""
        instance = build_instance(self.instance, cell.dim)
        adversary = build_adversary(self.adversary, cell.budget)
        policies = []
        for i, spec in enumerate(self.policies):
            try:
                policies.append(resolve_policy(spec, instance, adversary, cell.horizon))
            except ConfigurationError as e:
                suffix = e.field.split(".", 1)[1] if e.field and "." in e.field else (e.field or "")
                key = f"policies[{i}].{suffix}" if suffix else f"policies[{i}]"
                raise ConfigurationError(e.message, key, e.value, self.lines.get(key, self.lines.get(f"policies[{i}]"))) from e
        return CellPlan(cell=cell, instance=instance, adversary=adversary, policies=policies)

    def output_dir(self, override: Optional[str] = None) -> Path:
        """``override``, else ``experiment.output_dir``, else ``<env root or ./results>/<name>``."""
        if override:
            return Path(override)
        if self.experiment.output_dir:
            return Path(self.experiment.output_dir)
        return Path(os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT) / self.experiment.name

    def with_overrides(
        self,
        seeds: Optional[Tuple[int, ...]] = None,
        snapshot_interval: Optional[int] = None,
        jobs: Optional[int] = None,
    ) -> "ExperimentConfig":
        experiment = self.experiment
        changes: Dict[str, Any] = {}
        if seeds is not None:
            if not seeds:
                raise ConfigurationError("Seed list must not be empty", "seeds")
            changes["seeds"] = tuple(seeds)
        if snapshot_interval is not None:
            if snapshot_interval < 1:
                raise ConfigurationError("Snapshot interval must be positive", "snapshot_interval", snapshot_interval)
            changes["snapshot_interval"] = snapshot_interval
        if jobs is not None:
            if jobs < 1:
                raise ConfigurationError("jobs must be positive", "jobs", jobs)
            changes["jobs"] = jobs
        if not changes:
            return self
        return ExperimentConfig(
            experiment=replace(experiment, **changes),
            instance=self.instance,
            adversary=self.adversary,
            policies=self.policies,
            grid=self.grid,
            lines=self.lines,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Canonical plain-data form; ``parse_config`` of it gives an equal config."""
        exp = self.experiment
        experiment: Dict[str, Any] = {
            "name": exp.name,
            "horizon": exp.horizon,
            "seeds": list(exp.seeds),
            "snapshot_interval": exp.snapshot_interval,
        }
        if exp.output_dir is not None:
            experiment["output_dir"] = exp.output_dir
        if exp.jobs is not None:
            experiment["jobs"] = exp.jobs

        inst = self.instance
        decision_set: Dict[str, Any]
        if isinstance(inst.decision_set, FixedFinite):
            decision_set = {"kind": "fixed", "arms": [list(a) for a in inst.decision_set.arms]}
        elif isinstance(inst.decision_set, FreshSphereSample):
            decision_set = {"kind": "fresh_sphere", "num_arms": inst.decision_set.num_arms}
        else:
            decision_set = {"kind": "basis"}
        instance: Dict[str, Any] = {
            "dim": inst.dim,
            "theta_star": inst.theta_star if isinstance(inst.theta_star, str) else list(inst.theta_star),
            "instance_seed": inst.instance_seed,
            "bounds": {"L": inst.bounds.L, "S": inst.bounds.S, "R": inst.bounds.R},
            "decision_set": decision_set,
            "noise": inst.noise.value,
            "misspec_epsilon": inst.misspec_epsilon,
        }
        if inst.theta_norm is not None:
            instance["theta_norm"] = inst.theta_norm

        adv = self.adversary
        adversary: Dict[str, Any] = {"kind": adv.kind, "budget": adv.budget}
        for name in ("target_arm", "flip_to", "magnitude", "shift"):
            value = getattr(adv, name)
            if value is not None:
                adversary[name] = value
        if adv.table is not None:
            adversary["table"] = list(adv.table)

        policies = []
        for p in self.policies:
            entry: Dict[str, Any] = {
                "name": p.name,
                "kind": p.kind.value,
                "beta_mode": p.beta_mode.value,
                "corruption_level": p.corruption_level,
                "alpha": p.alpha,
                "lambda": p.lam,
                "delta": p.delta,
                "tie_break": p.tie_break.value,
            }
            if p.corruption_estimate is not None:
                entry["corruption_estimate"] = p.corruption_estimate
            if p.beta is not None:
                entry["beta"] = p.beta
            policies.append(entry)

        data: Dict[str, Any] = {
            "experiment": experiment,
            "instance": instance,
            "adversary": adversary,
            "policies": policies,
        }
        if self.grid is not None:
            grid = {}
            for name in ("horizon", "corruption", "dim"):
                values = getattr(self.grid, name)
                if values:
                    grid[name] = list(values)
            data["grid"] = grid
        return data


def build_instance(spec: InstanceSpec, dim: Optional[int] = None) -> BanditInstance:
    """Bandit instance of a configuration section, optionally at another dimension.

    A ``random`` parameter is drawn from the instance seed, so every episode seed sees the
    same instance.
    """
    d = spec.dim if dim is None else dim
    if isinstance(spec.theta_star, str):
        norm = spec.bounds.S if spec.theta_norm is None else spec.theta_norm
        theta = random_theta(d, norm, spec.instance_seed)
    else:
        theta = spec.theta_star
        if len(theta) != d:
            raise ConfigurationError(f"theta_star has {len(theta)} entries for dim {d}", "theta_star")
    return BanditInstance(
        theta_star=theta,
        bounds=spec.bounds,
        decision_set=spec.decision_set,
        noise=spec.noise,
        misspec_epsilon=spec.misspec_epsilon,
        instance_seed=spec.instance_seed,
        name=f"d{d}",
    )


def build_adversary(spec: AdversarySpec, budget: Optional[float] = None) -> AdversaryState:
    """Adversary template of a configuration section, optionally with another budget."""
    budget = spec.budget if budget is None else budget
    if spec.kind == "none":
        return AdversaryState(NoCorruption(), budget=0.0)
    if spec.kind == "target_flip":
        strategy = BudgetedTargetFlip(
            target_arm=spec.target_arm if spec.target_arm is not None else 0,
            flip_to=spec.flip_to,
            magnitude=spec.magnitude if spec.magnitude is not None else 0.25,
        )
        return AdversaryState(strategy, budget=budget)
    if spec.kind == "suppression":
        return AdversaryState(OptimalActionSuppression(shift=spec.shift or 0.0), budget=budget)
    if spec.kind == "misspecification":
        return AdversaryState(Misspecification())
    return AdversaryState(PreActionWorstCase(table=spec.table, magnitude=spec.magnitude or 0.0), budget=budget)


def resolve_policy(spec: PolicySpec, instance: BanditInstance, adversary: AdversaryState, horizon: int) -> PolicyConfig:
    """Turn a policy entry into a PolicyConfig for one instance, adversary and horizon."""
    if spec.corruption_level == "auto":
        level = nominal_corruption_level(adversary, instance, horizon)
    else:
        level = float(spec.corruption_level)
    if math.isinf(level) and spec.beta_mode is BetaModeKind.KNOWN_C:
        raise ConfigurationError("Known-C mode needs a finite corruption level", f"{spec.name}.corruption_level")

    alpha: Optional[float]
    if spec.alpha == "auto":
        alpha = None
    elif spec.alpha == "uncapped":
        alpha = UNCAPPED
    else:
        alpha = float(spec.alpha)
    return build_policy_config(
        spec.name,
        spec.kind,
        instance.dim,
        horizon,
        instance.bounds,
        beta_mode=spec.beta_mode,
        corruption_level=level,
        corruption_estimate=spec.corruption_estimate,
        alpha=alpha,
        lam=None if spec.lam == "auto" else float(spec.lam),
        beta=spec.beta,
        delta=spec.delta,
        tie_break=spec.tie_break,
    )


class _Reader:
    """Typed access to one mapping of the YAML document, with line-aware errors."""

    def __init__(self, data: Any, path: str, lines: Dict[str, int]) -> None:
        if not isinstance(data, dict):
            raise ConfigurationError("Expected a mapping", path or "<root>", line=lines.get(path))
        self.data = data
        self.path = path
        self.lines = lines

    def key(self, name: str) -> str:
        return f"{self.path}.{name}" if self.path else name

    def error(self, message: str, name: Optional[str] = None, value: Any = None) -> ConfigurationError:
        key = self.key(name) if name else self.path
        return ConfigurationError(message, key, value, self.lines.get(key, self.lines.get(self.path)))

    def check_keys(self, allowed: Tuple[str, ...]) -> None:
        for name in self.data:
            if name not in allowed:
                raise self.error(f"Unknown field '{name}'", str(name))

    def has(self, name: str) -> bool:
        return name in self.data and self.data[name] is not None

    def raw(self, name: str, default: Any = _MISSING) -> Any:
        if not self.has(name):
            if default is _MISSING:
                raise self.error("Missing required field", name)
            return default
        return self.data[name]

    def integer(self, name: str, default: Any = _MISSING, minimum: Optional[int] = None) -> Any:
        value = self.raw(name, default)
        if value is default and default is not _MISSING:
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error("Expected an integer", name, value)
        if minimum is not None and value < minimum:
            raise self.error(f"Must be at least {minimum}", name, value)
        return value

    def number(self, name: str, default: Any = _MISSING, positive: bool = False, nonnegative: bool = False) -> Any:
        value = self.raw(name, default)
        if value is default and default is not _MISSING:
            return value
        value = _as_float(value)
        if value is None:
            raise self.error("Expected a number", name, self.data.get(name))
        if positive and not value > 0:
            raise self.error("Must be positive", name, value)
        if nonnegative and not value >= 0:
            raise self.error("Must be nonnegative", name, value)
        return value

    def choice(self, name: str, options: Tuple[str, ...], default: Any = _MISSING) -> Any:
        value = self.raw(name, default)
        if value not in options:
            raise self.error(f"Expected one of {', '.join(options)}", name, value)
        return value

    def section(self, name: str) -> "_Reader":
        if not self.has(name):
            raise self.error("Missing required section", name)
        return _Reader(self.data[name], self.key(name), self.lines)

    def optional_section(self, name: str) -> Optional["_Reader"]:
        return self.section(name) if self.has(name) else None

    def numbers(self, name: str, kind: type = float) -> Tuple[Any, ...]:
        values = self.raw(name)
        if not isinstance(values, list) or not values:
            raise self.error("Expected a non-empty list", name, values)
        out = []
        for i, item in enumerate(values):
            if kind is int:
                if isinstance(item, bool) or not isinstance(item, int):
                    raise self.error("Expected a list of integers", f"{name}[{i}]", item)
                out.append(item)
            else:
                converted = _as_float(item)
                if converted is None:
                    raise self.error("Expected a list of numbers", f"{name}[{i}]", item)
                out.append(converted)
        return tuple(out)


def _as_float(value: Any) -> Optional[float]:
    # YAML 1.1 reads exponents without a dot (1e-3) as strings.
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return None
    return None


def _collect_lines(node: Optional[yaml.Node], path: str, lines: Dict[str, int]) -> None:
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key = f"{path}.{key_node.value}" if path else str(key_node.value)
            lines[key] = key_node.start_mark.line + 1
            _collect_lines(value_node, key, lines)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            key = f"{path}[{i}]"
            lines[key] = item.start_mark.line + 1
            _collect_lines(item, key, lines)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate a YAML experiment configuration.

    Raises:
        FileSystemError: If the file cannot be read
        ConfigurationError: On YAML syntax errors or invalid values
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise FileSystemError(f"Cannot read configuration: {e}", str(path), "read") from e
    return parse_config_text(text)


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigurationError(f"Invalid YAML: {e}", line=mark.line + 1 if mark is not None else None) from e
    lines: Dict[str, int] = {}
    _collect_lines(node, "", lines)
    return parse_config(data, lines)


def parse_config(data: Any, lines: Optional[Dict[str, int]] = None) -> ExperimentConfig:
    """Validate plain configuration data (as loaded from YAML or produced by ``to_dict``).

    Args:
        data: The configuration mapping
        lines: Line numbers of dotted field paths, for diagnostics

    Returns:
        The validated ExperimentConfig

    Raises:
        ConfigurationError: Naming the field (and line) of the first problem found
    """
    lines = lines or {}
    root = _Reader(data if data is not None else {}, "", lines)
    root.check_keys(("experiment", "instance", "adversary", "policies", "grid"))

    experiment = _parse_experiment(root.section("experiment"))
    instance = _parse_instance(root.section("instance"))
    adv_reader = root.optional_section("adversary")
    adversary = _parse_adversary(adv_reader) if adv_reader is not None else AdversarySpec()

    raw_policies = root.raw("policies")
    if not isinstance(raw_policies, list) or not raw_policies:
        raise root.error("At least one policy is required", "policies", raw_policies)
    policies = tuple(_parse_policy(_Reader(p, f"policies[{i}]", lines), i) for i, p in enumerate(raw_policies))
    names = [p.name for p in policies]
    if len(set(names)) != len(names):
        raise root.error("Policy names must be unique", "policies", names)

    grid_reader = root.optional_section("grid")
    grid = _parse_grid(grid_reader, instance, adversary) if grid_reader is not None else None
    _check_target_arm(instance, adversary, grid, lines)

    config = ExperimentConfig(experiment, instance, adversary, policies, grid, lines)
    for cell in config.cells():
        try:
            config.materialize(cell)
        except ConfigurationError as e:
            if e.line is not None or not e.field:
                raise
            external = e.field.startswith(("policies", "adversary"))
            key = e.field if external else f"instance.{e.field}"
            raise ConfigurationError(e.message, key, e.value, lines.get(key, lines.get("instance"))) from e
    return config


def _parse_experiment(r: _Reader) -> ExperimentSettings:
    r.check_keys(("name", "horizon", "seeds", "seed0", "num_seeds", "output_dir", "snapshot_interval", "jobs"))
    name = str(r.raw("name", "experiment"))
    horizon = r.integer("horizon", minimum=1)
    if r.has("seeds"):
        seeds = r.numbers("seeds", int)
        if any(s < 0 for s in seeds):
            raise r.error("Seeds must be nonnegative", "seeds", list(seeds))
    else:
        seed0 = r.integer("seed0", 0, minimum=0)
        num_seeds = r.integer("num_seeds", 1, minimum=1)
        seeds = tuple(range(seed0, seed0 + num_seeds))
    output_dir = r.raw("output_dir", None)
    return ExperimentSettings(
        name=name,
        horizon=horizon,
        seeds=seeds,
        output_dir=str(output_dir) if output_dir is not None else None,
        snapshot_interval=r.integer("snapshot_interval", DEFAULT_SNAPSHOT_INTERVAL, minimum=1),
        jobs=r.integer("jobs", None, minimum=1),
    )


def _parse_instance(r: _Reader) -> InstanceSpec:
    r.check_keys(
        ("dim", "theta_star", "theta_norm", "instance_seed", "bounds", "decision_set", "noise", "misspec_epsilon")
    )
    dim = r.integer("dim", minimum=1)

    b = r.optional_section("bounds")
    if b is not None:
        b.check_keys(("L", "S", "R"))
        bounds = Bounds(L=b.number("L", 1.0, positive=True), S=b.number("S", 1.0, positive=True), R=b.number("R", 1.0, positive=True))
    else:
        bounds = Bounds()

    theta_raw = r.raw("theta_star", "random")
    theta: Union[Tuple[float, ...], str]
    if theta_raw == "random":
        theta = "random"
    else:
        theta = r.numbers("theta_star")
        if len(theta) != dim:
            raise r.error(f"Expected {dim} entries", "theta_star", list(theta))

    ds = r.section("decision_set")
    kind = ds.choice("kind", DECISION_SET_KINDS)
    decision_set: DecisionSetSpec
    if kind == "fixed":
        ds.check_keys(("kind", "arms"))
        arms = ds.raw("arms")
        if not isinstance(arms, list) or not arms:
            raise ds.error("Expected a non-empty list of arms", "arms", arms)
        rows = tuple(_Reader({"arm": a}, ds.key(f"arms[{i}]"), r.lines).numbers("arm") for i, a in enumerate(arms))
        decision_set = FixedFinite(rows)
    elif kind == "fresh_sphere":
        ds.check_keys(("kind", "num_arms"))
        decision_set = FreshSphereSample(ds.integer("num_arms", minimum=1))
    else:
        ds.check_keys(("kind",))
        decision_set = BasisArms()

    return InstanceSpec(
        dim=dim,
        theta_star=theta,
        bounds=bounds,
        decision_set=decision_set,
        noise=NoiseKind(r.choice("noise", tuple(k.value for k in NoiseKind), "gaussian")),
        misspec_epsilon=r.number("misspec_epsilon", 0.0, nonnegative=True),
        instance_seed=r.integer("instance_seed", 0, minimum=0),
        theta_norm=r.number("theta_norm", None, nonnegative=True),
    )


def _parse_adversary(r: _Reader) -> AdversarySpec:
    r.check_keys(("kind", "budget", "target_arm", "flip_to", "magnitude", "shift", "table"))
    kind = r.choice("kind", ADVERSARY_KINDS, "none")
    table = r.numbers("table") if r.has("table") else None
    spec = AdversarySpec(
        kind=kind,
        budget=r.number("budget", 0.0, nonnegative=True),
        target_arm=r.integer("target_arm", None, minimum=0),
        flip_to=r.number("flip_to", None),
        magnitude=r.number("magnitude", None, nonnegative=True),
        shift=r.number("shift", None, nonnegative=True),
        table=table,
    )
    if kind == "target_flip" and spec.target_arm is None:
        raise r.error("A target_flip adversary needs target_arm", "target_arm")
    if kind == "suppression" and spec.shift is None:
        raise r.error("A suppression adversary needs shift", "shift")
    if kind == "pre_action" and spec.table is None and spec.magnitude is None:
        raise r.error("A pre_action adversary needs a table or a magnitude", "table")
    return spec


def _parse_policy(r: _Reader, index: int) -> PolicySpec:
    r.check_keys(
        (
            "name",
            "kind",
            "beta_mode",
            "corruption_level",
            "corruption_estimate",
            "alpha",
            "lambda",
            "beta",
            "delta",
            "tie_break",
        )
    )
    kind = PolicyKind(r.choice("kind", tuple(k.value for k in PolicyKind)))
    default_mode = BetaModeKind.KNOWN_C.value
    beta_mode = BetaModeKind(r.choice("beta_mode", tuple(m.value for m in BetaModeKind), default_mode))
    if kind is PolicyKind.ENLARGED_BETA_OFUL and beta_mode is not BetaModeKind.KNOWN_C:
        raise r.error("enlarged_beta_oful needs beta_mode known_c", "beta_mode", beta_mode.value)

    level: Union[float, str] = "auto"
    if r.has("corruption_level") and r.raw("corruption_level") != "auto":
        level = r.number("corruption_level", nonnegative=True)

    alpha: Union[float, str] = "auto"
    if r.has("alpha") and r.raw("alpha") not in ("auto", "uncapped"):
        alpha = r.number("alpha", positive=True)
    elif r.has("alpha"):
        alpha = r.raw("alpha")

    lam: Union[float, str] = "auto"
    if r.has("lambda") and r.raw("lambda") != "auto":
        lam = r.number("lambda", positive=True)

    beta = r.number("beta", None, positive=True)
    if beta_mode is BetaModeKind.FIXED and beta is None:
        raise r.error("beta_mode fixed needs beta", "beta")

    delta = r.number("delta", 0.05)
    if not 0.0 < delta < 1.0:
        raise r.error("delta must lie in (0, 1)", "delta", delta)

    return PolicySpec(
        name=str(r.raw("name", f"{kind.value}_{index}")),
        kind=kind,
        beta_mode=beta_mode,
        corruption_level=level,
        corruption_estimate=r.number("corruption_estimate", None, positive=True),
        alpha=alpha,
        lam=lam,
        beta=beta,
        delta=delta,
        tie_break=TieBreak(r.choice("tie_break", tuple(t.value for t in TieBreak), "first")),
    )


def _parse_grid(r: _Reader, instance: InstanceSpec, adversary: AdversarySpec) -> GridSpec:
    r.check_keys(("horizon", "corruption", "dim"))
    horizon = r.numbers("horizon", int) if r.has("horizon") else ()
    corruption = r.numbers("corruption") if r.has("corruption") else ()
    dims = r.numbers("dim", int) if r.has("dim") else ()
    if any(k < 1 for k in horizon):
        raise r.error("Horizons must be at least 1", "horizon", list(horizon))
    if any(c < 0 for c in corruption):
        raise r.error("Corruption budgets must be nonnegative", "corruption", list(corruption))
    if corruption and adversary.kind in ("none", "misspecification"):
        raise r.error(f"A corruption grid needs a budgeted adversary, not '{adversary.kind}'", "corruption")
    if dims:
        if any(d < 1 for d in dims):
            raise r.error("Dimensions must be at least 1", "dim", list(dims))
        if not isinstance(instance.theta_star, str) or isinstance(instance.decision_set, FixedFinite):
            raise r.error("A dimension grid needs theta_star: random and a non-fixed decision set", "dim")
    if not (horizon or corruption or dims):
        raise r.error("Grid must vary at least one of horizon, corruption, dim")
    return GridSpec(horizon=horizon, corruption=corruption, dim=dims)


def _check_target_arm(
    instance: InstanceSpec, adversary: AdversarySpec, grid: Optional[GridSpec], lines: Dict[str, int]
) -> None:
    if adversary.kind != "target_flip" or adversary.target_arm is None:
        return
    if isinstance(instance.decision_set, FixedFinite):
        num_arms = len(instance.decision_set.arms)
    elif isinstance(instance.decision_set, BasisArms):
        num_arms = min((grid.dim if grid and grid.dim else (instance.dim,)))
    else:
        num_arms = instance.decision_set.num_arms
    if adversary.target_arm >= num_arms:
        raise ConfigurationError(
            f"target_arm must be below the number of arms ({num_arms})",
            "adversary.target_arm",
            adversary.target_arm,
            lines.get("adversary.target_arm"),
        )


def parse_seeds(text: str) -> Tuple[int, ...]:
    """Seeds from ``0,1,5`` or ``start:count``."""
    text = text.strip()
    try:
        if ":" in text:
            start, count = (int(part) for part in text.split(":", 1))
            if count < 1 or start < 0:
                raise ValueError(text)
            return tuple(range(start, start + count))
        seeds = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise ConfigurationError("Seeds must look like 0,1,5 or start:count", "seeds", text) from e
    if not seeds or any(s < 0 for s in seeds):
        raise ConfigurationError("Seeds must be a non-empty list of nonnegative integers", "seeds", text)
    return seeds


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
