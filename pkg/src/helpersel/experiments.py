"""Scenario files, replicated runs, CSV traces and summary reports."""
from __future__ import annotations

import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .benchmark import StateSpace, solve_centralized
from .environment import (CapacityChain, DemandModel, MetricsTrace, SimulationConfig,
                          min_bandwidth_deficit, run_simulation, slow_transition,
                          stationary_distribution)
from .game import (ContractError, EmpiricalJointDistribution, check_correlated_equilibrium,
                   deviation_gains, jain_fairness, mean_utility)
from .learning import STRATEGIES, LearningParams

METRICS = ("regret", "welfare", "loads", "rates", "server")
CE_PROFILE_LIMIT = 4096


class ScenarioError(ContractError):
    """Scenario file is malformed or violates the schema."""


class InstanceTooLargeError(ContractError):
    pass


_number = {"type": "number"}
_levels = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}
_matrix = {"type": "array", "items": {"type": "array", "items": _number}}
_chain = {
    "type": "object", "additionalProperties": False,
    "properties": {"levels": _levels, "transition": _matrix,
                   "self_loop": {"type": "number", "minimum": 0, "maximum": 1}},
}
_strategy = {"type": "string", "enum": sorted(STRATEGIES)}

SCHEMA = {
    "type": "object", "additionalProperties": False,
    "properties": {
        "simulation": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "peers": {"type": "integer", "minimum": 1},
                "helpers": {"type": "integer", "minimum": 1},
                "horizon": {"type": "integer", "minimum": 1},
                "strategy": {"oneOf": [_strategy, {"type": "array", "items": _strategy}]},
                "seed": {"type": "integer", "minimum": 0},
                "initial_profile": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "server_load": {"enum": ["per-peer", "aggregate"]},
            },
        },
        "learning": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "mu": {"type": "number", "exclusiveMinimum": 0},
                "recursive_decay": {"type": "boolean"},
            },
        },
        "capacity": {
            "type": "object", "additionalProperties": False,
            "properties": {
                **_chain["properties"],
                "initial_levels": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "helper": {"type": "array", "items": _chain},
            },
        },
        "demand": {
            "type": "object", "additionalProperties": False,
            "properties": {"rate": {"oneOf": [{"type": "number", "exclusiveMinimum": 0},
                                              {"type": "array", "items": {"type": "number",
                                                                          "exclusiveMinimum": 0}}]}},
        },
        "run": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "replications": {"type": "integer", "minimum": 1},
                "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                "out": {"type": "string"},
                "burn_in": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "metrics": {"type": "array", "items": {"enum": list(METRICS)}, "uniqueItems": True},
                "benchmark": {"enum": ["auto", "enumerate"]},
                "jobs": {"type": "integer", "minimum": 1},
            },
        },
        "compare": {
            "type": "object", "additionalProperties": False,
            "properties": {"strategies": {"type": "array", "items": _strategy, "minItems": 1}},
        },
        "ce_check": {
            "type": "object", "additionalProperties": False,
            "properties": {"enabled": {"type": "boolean"},
                           "tolerance": {"type": "number", "minimum": 0}},
        },
    },
}


@dataclass(frozen=True)
class Scenario:
    """A validated scenario file: the simulation plus how to run and report it."""
    config: SimulationConfig
    replications: int = 10
    seeds: tuple | None = None
    out: str | None = None
    burn_in: float = 0.2
    metrics: tuple = METRICS
    benchmark: str = "auto"
    jobs: int = 1
    strategies: tuple = ("rths", "r2hs", "best-response")
    ce_enabled: bool = False
    ce_tolerance: float = 0.01

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.config.seed + k for k in range(self.replications)]

    def burn_in_stages(self) -> int:
        return int(self.burn_in * self.config.horizon)


def _chain_from(spec: dict, defaults: dict) -> CapacityChain:
    levels = tuple(spec.get("levels", defaults.get("levels", (700.0, 800.0, 900.0))))
    if "transition" in spec:
        P = np.array(spec["transition"], dtype=float)
    elif "self_loop" in spec:
        P = slow_transition(len(levels), spec["self_loop"])
    elif "transition" in defaults and "levels" not in spec:
        P = np.array(defaults["transition"], dtype=float)
    else:
        P = slow_transition(len(levels), defaults.get("self_loop", 0.98))
    return CapacityChain(levels, P)


def parse_scenario(data: dict) -> Scenario:
    """Validate a scenario mapping against :data:`SCHEMA` and build a :class:`Scenario`."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"scenario invalid at {where}: {exc.message}") from None

    sim = data.get("simulation", {})
    learn = data.get("learning", {})
    cap = data.get("capacity", {})
    run = data.get("run", {})
    n_helpers = sim.get("helpers", 4)
    per_helper = cap.get("helper")
    try:
        if per_helper is not None:
            if len(per_helper) != n_helpers:
                raise ScenarioError(f"capacity.helper lists {len(per_helper)} chains for {n_helpers} helpers")
            chains = tuple(_chain_from(h, cap) for h in per_helper)
        else:
            chains = (_chain_from({}, cap),) * n_helpers
        strategy = sim.get("strategy", "r2hs")
        rate = data.get("demand", {}).get("rate", 350.0)
        config = SimulationConfig(
            n_peers=sim.get("peers", 10), n_helpers=n_helpers, horizon=sim.get("horizon", 10_000),
            params=LearningParams(**learn), chains=chains,
            demand=DemandModel(tuple(rate) if isinstance(rate, list) else rate),
            strategy=strategy if isinstance(strategy, str) else tuple(strategy),
            seed=sim.get("seed", 0),
            initial_profile=tuple(sim["initial_profile"]) if "initial_profile" in sim else None,
            initial_levels=tuple(cap["initial_levels"]) if "initial_levels" in cap else None,
            server_mode=sim.get("server_load", "per-peer"),
        )
    except ScenarioError:
        raise
    except ContractError as exc:
        raise ScenarioError(f"scenario invalid: {exc}") from None
    ce = data.get("ce_check", {})
    return Scenario(
        config=config, replications=run.get("replications", 10),
        seeds=tuple(run["seeds"]) if "seeds" in run else None, out=run.get("out"),
        burn_in=run.get("burn_in", 0.2), metrics=tuple(run.get("metrics", METRICS)),
        benchmark=run.get("benchmark", "auto"), jobs=run.get("jobs", 1),
        strategies=tuple(data.get("compare", {}).get("strategies", ("rths", "r2hs", "best-response"))),
        ce_enabled=ce.get("enabled", False), ce_tolerance=ce.get("tolerance", 0.01),
    )


def load_scenario(path) -> Scenario:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    return parse_scenario(data)


@dataclass
class ReplicationSummary:
    seed: int
    final_worst_regret: float
    final_worst_regret_rel: float
    mean_utility: float
    mean_welfare: float
    optimum: float
    welfare_ratio: float
    path_optimum: float
    welfare_ratio_path: float
    jain_peers: float
    jain_helpers: float
    mean_server_load: float
    min_bandwidth_deficit: float
    switching_rate: float
    ce_max_gain: float | None = None
    ce_passed: bool | None = None


@dataclass
class SummaryReport:
    strategy: str
    replications: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)

    server_mode: str = "per-peer"

    def to_json(self) -> str:
        return json.dumps({"strategy": self.strategy, "server_load_mode": self.server_mode,
                           "replications": [asdict(r) for r in self.replications],
                           "aggregate": self.aggregate}, indent=2, sort_keys=True) + "\n"


def stationary_optimum(scenario: Scenario) -> float:
    cfg = scenario.config
    _, r_star = solve_centralized(StateSpace.from_chains(cfg.helper_chains()), cfg.n_peers,
                                  method=scenario.benchmark)
    return r_star


def expected_capacities(config: SimulationConfig) -> np.ndarray:
    return np.array([stationary_distribution(c) @ np.array(c.levels) for c in config.helper_chains()])


def empirical_distribution(trace: MetricsTrace, burn_in: int, n_helpers: int) -> EmpiricalJointDistribution:
    return EmpiricalJointDistribution.from_profiles(trace.actions[burn_in:], n_helpers)


def summarize(trace: MetricsTrace, scenario: Scenario, seed: int, optimum: float) -> ReplicationSummary:
    cfg = scenario.config
    b = scenario.burn_in_stages()
    if b >= trace.horizon:
        b = 0
    mean_rates = trace.rates[b:].mean(axis=0)
    mean_u = float(trace.rates[b:].mean())
    welfare = float(trace.welfare[b:].mean())
    _, path_opt = solve_centralized(StateSpace.from_samples(trace.capacities[b:]), cfg.n_peers)
    worst = float(trace.worst_regret[-1])
    s = ReplicationSummary(
        seed=seed, final_worst_regret=worst, final_worst_regret_rel=worst / mean_u,
        mean_utility=mean_u, mean_welfare=welfare, optimum=optimum, welfare_ratio=welfare / optimum,
        path_optimum=path_opt, welfare_ratio_path=welfare / path_opt,
        jain_peers=jain_fairness(mean_rates), jain_helpers=jain_fairness(trace.loads[b:].mean(axis=0)),
        mean_server_load=float(trace.server_load[b:].mean()),
        min_bandwidth_deficit=min_bandwidth_deficit(cfg), switching_rate=trace.switching_rate(b),
    )
    if scenario.ce_enabled:
        verdict = _ce_verdict(trace, scenario)
        s.ce_max_gain, s.ce_passed = verdict.max_gain, verdict.passed
    return s


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_traces(trace: MetricsTrace, scenario: Scenario, optimum: float, outdir: Path) -> None:
    """One plot-ready CSV per traced quantity."""
    outdir.mkdir(parents=True, exist_ok=True)
    T, N = trace.rates.shape
    H = trace.loads.shape[1]
    stages = range(T)
    if "regret" in scenario.metrics:
        _write_csv(outdir / "regret.csv",
                   ["stage", *(f"regret_peer{i}" for i in range(N)), "worst_regret",
                    "worst_tracking_regret", "worst_learner_regret"],
                   ([t, *trace.regret[t], trace.regret[t].max(), trace.tracking_regret[t].max(),
                     trace.learner_regret[t].max()] for t in stages))
    if "welfare" in scenario.metrics:
        _write_csv(outdir / "welfare.csv", ["stage", "welfare", "optimum"],
                   ([t, trace.welfare[t], optimum] for t in stages))
    if "loads" in scenario.metrics:
        _write_csv(outdir / "loads.csv", ["stage", *(f"load_helper{j}" for j in range(H))],
                   ([t, *trace.loads[t]] for t in stages))
    if "rates" in scenario.metrics:
        _write_csv(outdir / "rates.csv", ["stage", *(f"rate_peer{i}" for i in range(N))],
                   ([t, *trace.rates[t]] for t in stages))
    if "server" in scenario.metrics:
        deficit = min_bandwidth_deficit(scenario.config)
        _write_csv(outdir / "server.csv",
                   ["stage", f"server_load_{scenario.config.server_mode.replace('-', '_')}",
                    "min_bandwidth_deficit"],
                   ([t, trace.server_load[t], deficit] for t in stages))


def _replicate(args):
    scenario, seed, optimum, outdir = args
    trace = run_simulation(replace(scenario.config, seed=seed))
    if outdir is not None:
        write_traces(trace, scenario, optimum, Path(outdir))
    return summarize(trace, scenario, seed, optimum)


def _aggregate(reps: list[ReplicationSummary]) -> dict:
    keys = [k for k, v in asdict(reps[0]).items() if isinstance(v, float) and k != "seed"]
    agg = {}
    for k in keys:
        vals = np.array([getattr(r, k) for r in reps], dtype=float)
        agg[k] = {"mean": float(vals.mean()), "median": float(np.median(vals)),
                  "min": float(vals.min()), "max": float(vals.max())}
    if reps[0].ce_passed is not None:
        agg["ce_passed_fraction"] = sum(bool(r.ce_passed) for r in reps) / len(reps)
    agg["replications"] = len(reps)
    return agg


def run_scenario(scenario: Scenario, out=None, write: bool = True) -> SummaryReport:
    """Run every replication, write per-replication CSVs and ``summary.json``.

    Replication ``k`` writes into ``<out>/rep_<seed>/``. ``write=False`` or no
    output directory skips all file output.
    """
    out = out if out is not None else scenario.out
    outdir = Path(out) if (out is not None and write) else None
    if outdir is not None:
        try:
            outdir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {outdir}: {exc.strerror}") from exc
        if not os.access(outdir, os.W_OK):
            raise OSError(f"output directory {outdir} is not writable")
    optimum = stationary_optimum(scenario)
    jobs = [(scenario, seed, optimum, None if outdir is None else outdir / f"rep_{seed:04d}")
            for seed in scenario.seed_list()]
    if scenario.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(scenario.jobs) as pool:
            reps = list(pool.map(_replicate, jobs))
    else:
        reps = [_replicate(j) for j in jobs]
    strategy = scenario.config.strategy
    report = SummaryReport(strategy if isinstance(strategy, str) else ",".join(strategy),
                           reps, _aggregate(reps), scenario.config.server_mode)
    if outdir is not None:
        (outdir / "summary.json").write_text(report.to_json())
    return report


def compare_strategies(scenario: Scenario, strategies=None, out=None) -> list[dict]:
    """One row per strategy over the same seeds and capacity paths."""
    strategies = tuple(strategies or scenario.strategies)
    rows = []
    for name in strategies:
        sc = replace(scenario, config=replace(scenario.config, strategy=name))
        agg = run_scenario(sc, write=False).aggregate
        rows.append({
            "strategy": name,
            "welfare_ratio": agg["welfare_ratio"]["mean"],
            "switching_rate": agg["switching_rate"]["mean"],
            "final_worst_regret": agg["final_worst_regret"]["mean"],
            "final_worst_regret_rel": agg["final_worst_regret_rel"]["mean"],
            "jain_peers": agg["jain_peers"]["mean"],
            "jain_helpers": agg["jain_helpers"]["mean"],
            "mean_server_load": agg["mean_server_load"]["mean"],
        })
    out = out if out is not None else scenario.out
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        header = list(rows[0])
        _write_csv(Path(out) / "comparison.csv", header, ([r[k] for k in header] for r in rows))
    return rows


@dataclass
class CEVerdict:
    passed: bool
    max_gain: float
    tolerance: float
    violations: list
    support: int


def _ce_verdict(trace: MetricsTrace, scenario: Scenario) -> CEVerdict:
    cfg = scenario.config
    if cfg.n_helpers ** cfg.n_peers > CE_PROFILE_LIMIT:
        raise InstanceTooLargeError(
            f"CE certification enumerates {cfg.n_helpers}^{cfg.n_peers} profiles; "
            f"the limit is {CE_PROFILE_LIMIT} (reduce peers or helpers)")
    b = scenario.burn_in_stages()
    dist = empirical_distribution(trace, b if b < trace.horizon else 0, cfg.n_helpers)
    caps = expected_capacities(cfg)
    tol = scenario.ce_tolerance * mean_utility(dist, caps)
    violations = check_correlated_equilibrium(dist, caps, tol=tol, max_profiles=CE_PROFILE_LIMIT)
    gains = deviation_gains(dist, caps)
    off = ~np.eye(cfg.n_helpers, dtype=bool)
    max_gain = float(gains[:, off].max()) if cfg.n_helpers > 1 else 0.0
    return CEVerdict(not violations, max_gain, tol, violations, len(dist))


def certify_ce(scenario: Scenario, trace: MetricsTrace | None = None) -> CEVerdict:
    """Check the post-burn-in empirical joint play of the first seed for CE."""
    cfg = scenario.config
    if cfg.n_helpers ** cfg.n_peers > CE_PROFILE_LIMIT:
        raise InstanceTooLargeError(
            f"CE certification enumerates {cfg.n_helpers}^{cfg.n_peers} profiles; "
            f"the limit is {CE_PROFILE_LIMIT} (reduce peers or helpers)")
    if trace is None:
        trace = run_simulation(replace(cfg, seed=scenario.seed_list()[0]))
    return _ce_verdict(trace, scenario)
