"""Config-driven experiment runner.

Subcommands:

* ``simulate <config.json>`` -- run every (sweep value, policy, seed)
  combination and write one CSV row per run (or per checkpoint).
* ``bounds <config.json>`` -- solve the optima and emit the bound report as
  JSON.
* ``preset <name>`` -- materialize a shipped scenario (config + CSV).
* ``diagnose <config.json>`` -- run the exact pathwise identity checks and
  inequality diagnostics for every configured policy and print a table.

Exit codes: 0 success, 1 diagnostics failure, 2 config error, 3 infeasible
instance, 4 solver non-convergence.

The JSON config schema is documented in the README; unknown keys are
rejected everywhere (fail fast). Re-running the same config byte-reproduces
the CSV.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .model import ConflictGraph, ExplicitSets, KofN, Network
from .optimizer import (
    ConvergenceError,
    SolverSettings,
    UnschedulableLinkError,
    build_bound_report,
    optimal_stationary_mixture,
    solve_aware_peak,
    virtual_queue_peak_bound,
)
from .policies import (
    AgeBasedPolicy,
    PriorityPolicy,
    SetMixture,
    StationaryPolicy,
    VirtualQueuePolicy,
)
from .simulator import diagnose as run_diagnostics
from .simulator import run, run_with_checkpoints

__all__ = ["main", "load_config", "run_experiment", "solve_bounds", "PRESETS", "ConfigError"]


class ConfigError(ValueError):
    """Malformed experiment configuration."""


CSV_COLUMNS = [
    "sweep_variable",
    "sweep_value",
    "policy",
    "seed",
    "t",
    "peak_age",
    "avg_age",
    "peak_age_per_link",
    "avg_age_per_link",
    "zero_success_links",
    "blind_peak_optimum",
    "avg_age_lower_bound",
    "virtual_queue_peak_bound",
]

SWEEP_VARIABLES = ("k", "theta", "v", "beta", "none")
POLICY_NAMES = ("virtual_queue", "age_based", "stationary_optimal", "stationary", "priority")


def _expect_keys(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    missing = sorted(set(required) - set(obj))
    if missing:
        raise ConfigError(f"{path}: missing keys {missing}")


def _number(obj, path, minimum=None):
    if not isinstance(obj, (int, float)) or isinstance(obj, bool):
        raise ConfigError(f"{path}: expected a number")
    if minimum is not None and obj < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}")
    return float(obj)


def _int(obj, path, minimum=None):
    if not isinstance(obj, int) or isinstance(obj, bool):
        raise ConfigError(f"{path}: expected an integer")
    if minimum is not None and obj < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}")
    return obj


@dataclasses.dataclass
class ExperimentConfig:
    n_links: int
    weights: list[float]
    gamma: list[float] | None          # explicit per-link probabilities
    gamma_good: float | None           # or the two-tier template
    gamma_bad: float | None
    n_bad: int | None
    interference: dict
    policies: list[dict]
    horizon: int
    seeds: list[int]
    sweep_variable: str
    sweep_values: list[float]
    checkpoints: list[int] | None
    output: str | None
    solver: SolverSettings
    note: str | None

    @property
    def uses_template(self) -> bool:
        return self.gamma is None


def load_config(source) -> ExperimentConfig:
    """Parse and validate a config (path, JSON string, or dict)."""
    if isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    _expect_keys(
        raw,
        "config",
        required=("network", "interference", "policies", "horizon", "seeds"),
        optional=("sweep", "checkpoints", "output", "solver", "note"),
    )

    net = raw["network"]
    _expect_keys(
        net,
        "network",
        required=("n_links",),
        optional=("weights", "gamma", "gamma_good", "gamma_bad", "n_bad"),
    )
    n = _int(net["n_links"], "network.n_links", 1)
    if "weights" in net:
        wspec = net["weights"]
        if isinstance(wspec, list):
            if len(wspec) != n:
                raise ConfigError(f"network.weights: expected {n} entries")
            weights = [_number(x, "network.weights[]", 0.0) for x in wspec]
        else:
            weights = [_number(wspec, "network.weights")] * n
    else:
        weights = [1.0] * n

    template_keys = {"gamma_good", "gamma_bad", "n_bad"} & set(net)
    if "gamma" in net and template_keys:
        raise ConfigError("network: give either gamma or the good/bad template, not both")
    gamma = gamma_good = gamma_bad = n_bad = None
    if "gamma" in net:
        gspec = net["gamma"]
        if isinstance(gspec, list):
            if len(gspec) != n:
                raise ConfigError(f"network.gamma: expected {n} entries")
            gamma = [_number(x, "network.gamma[]") for x in gspec]
        else:
            gamma = [_number(gspec, "network.gamma")] * n
    elif template_keys == {"gamma_good", "gamma_bad", "n_bad"}:
        gamma_good = _number(net["gamma_good"], "network.gamma_good")
        gamma_bad = _number(net["gamma_bad"], "network.gamma_bad")
        n_bad = _int(net["n_bad"], "network.n_bad", 0)
        if n_bad > n:
            raise ConfigError(f"network.n_bad: {n_bad} exceeds n_links {n}")
    else:
        raise ConfigError("network: requires gamma or all of gamma_good/gamma_bad/n_bad")

    interference = raw["interference"]
    _expect_keys(interference, "interference", required=("variant",), optional=("k", "edges", "sets"))
    variant = interference["variant"]
    if variant == "k_of_n":
        _expect_keys(interference, "interference", required=("variant", "k"))
        _int(interference["k"], "interference.k", 1)
    elif variant == "conflict_graph":
        _expect_keys(interference, "interference", required=("variant", "edges"))
        if not isinstance(interference["edges"], list):
            raise ConfigError("interference.edges: expected a list of pairs")
    elif variant == "explicit_sets":
        _expect_keys(interference, "interference", required=("variant", "sets"))
        if not isinstance(interference["sets"], list):
            raise ConfigError("interference.sets: expected a list of link lists")
    else:
        raise ConfigError(
            f"interference.variant: {variant!r} is not one of k_of_n/conflict_graph/explicit_sets"
        )

    raw_policies = raw["policies"]
    if not isinstance(raw_policies, list) or not raw_policies:
        raise ConfigError("policies: expected a non-empty list")
    policies = []
    for i, spec in enumerate(raw_policies):
        path = f"policies[{i}]"
        _expect_keys(spec, path, required=("name",), optional=("v", "beta", "mixture", "order"))
        name = spec["name"]
        if name not in POLICY_NAMES:
            raise ConfigError(f"{path}.name: {name!r} is not one of {POLICY_NAMES}")
        allowed = {
            "virtual_queue": {"v"},
            "age_based": {"beta"},
            "stationary_optimal": set(),
            "stationary": {"mixture"},
            "priority": {"order"},
        }[name]
        extra = sorted(set(spec) - {"name"} - allowed)
        if extra:
            raise ConfigError(f"{path}: keys {extra} are not valid for policy {name!r}")
        if name == "virtual_queue" and "v" in spec:
            _number(spec["v"], f"{path}.v")
        if name == "age_based" and "beta" in spec:
            _number(spec["beta"], f"{path}.beta")
        if name == "stationary":
            if "mixture" not in spec or not isinstance(spec["mixture"], list):
                raise ConfigError(f"{path}.mixture: expected [[links, probability], ...]")
        policies.append(dict(spec))

    horizon = _int(raw["horizon"], "horizon", 1)
    seeds = raw["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds: expected a non-empty list of integers")
    seeds = [_int(s, "seeds[]", 0) for s in seeds]

    sweep_variable, sweep_values = "none", [None]
    if "sweep" in raw:
        sweep = raw["sweep"]
        _expect_keys(sweep, "sweep", required=("variable",), optional=("values",))
        sweep_variable = sweep["variable"]
        if sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep.variable: must be one of {SWEEP_VARIABLES}")
        if sweep_variable != "none":
            values = sweep.get("values")
            if not isinstance(values, list) or not values:
                raise ConfigError("sweep.values: expected a non-empty list")
            sweep_values = [_number(x, "sweep.values[]") for x in values]

    checkpoints = None
    if "checkpoints" in raw:
        cps = raw["checkpoints"]
        if not isinstance(cps, list) or not cps:
            raise ConfigError("checkpoints: expected a non-empty list of slot counts")
        checkpoints = [_int(t, "checkpoints[]", 1) for t in cps]
        if max(checkpoints) > horizon:
            raise ConfigError("checkpoints: values must not exceed the horizon")

    solver = SolverSettings()
    if "solver" in raw:
        _expect_keys(raw["solver"], "solver", required=(),
                     optional=("max_iterations", "gap_tolerance", "state_cap"))
        kwargs = {}
        if "max_iterations" in raw["solver"]:
            kwargs["max_iterations"] = _int(raw["solver"]["max_iterations"], "solver.max_iterations", 1)
        if "gap_tolerance" in raw["solver"]:
            kwargs["gap_tolerance"] = _number(raw["solver"]["gap_tolerance"], "solver.gap_tolerance")
        if "state_cap" in raw["solver"]:
            kwargs["state_cap"] = _int(raw["solver"]["state_cap"], "solver.state_cap", 1)
        solver = SolverSettings(**kwargs)

    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output: expected a string path")
    note = raw.get("note")

    cfg = ExperimentConfig(
        n_links=n,
        weights=weights,
        gamma=gamma,
        gamma_good=gamma_good,
        gamma_bad=gamma_bad,
        n_bad=n_bad,
        interference=dict(interference),
        policies=policies,
        horizon=horizon,
        seeds=seeds,
        sweep_variable=sweep_variable,
        sweep_values=sweep_values,
        checkpoints=checkpoints,
        output=output,
        solver=solver,
        note=note,
    )
    _validate_sweep(cfg)
    return cfg


def _validate_sweep(cfg: ExperimentConfig):
    var = cfg.sweep_variable
    if var == "k":
        if cfg.interference["variant"] != "k_of_n":
            raise ConfigError("sweep.variable=k requires k_of_n interference")
        for x in cfg.sweep_values:
            if x != int(x) or not 1 <= int(x) <= cfg.n_links:
                raise ConfigError(f"sweep.values: k={x} must be an integer in [1, {cfg.n_links}]")
    elif var == "theta":
        if not cfg.uses_template:
            raise ConfigError("sweep.variable=theta requires the gamma_good/gamma_bad template")
        for x in cfg.sweep_values:
            if not 0.0 <= x <= 1.0:
                raise ConfigError(f"sweep.values: theta={x} must lie in [0, 1]")
    elif var == "v":
        if not any(p["name"] == "virtual_queue" for p in cfg.policies):
            raise ConfigError("sweep.variable=v requires a virtual_queue policy")
        for x in cfg.sweep_values:
            if x <= 0:
                raise ConfigError("sweep.values: v must be > 0")
    elif var == "beta":
        if not any(p["name"] == "age_based" for p in cfg.policies):
            raise ConfigError("sweep.variable=beta requires an age_based policy")


def _build_instance(cfg: ExperimentConfig, sweep_value):
    """Materialize (network, interference, [(label, policy factory)]) for one sweep point."""
    n = cfg.n_links
    if cfg.uses_template:
        n_bad = cfg.n_bad
        if cfg.sweep_variable == "theta":
            n_bad = int(round(sweep_value * n))
        gamma = [cfg.gamma_good] * (n - n_bad) + [cfg.gamma_bad] * n_bad
    else:
        gamma = cfg.gamma
    network = Network(cfg.weights, gamma)

    spec = cfg.interference
    if spec["variant"] == "k_of_n":
        k = int(sweep_value) if cfg.sweep_variable == "k" else int(spec["k"])
        interference = KofN(n, k)
    elif spec["variant"] == "conflict_graph":
        interference = ConflictGraph(n, spec["edges"])
    else:
        interference = ExplicitSets(n, spec["sets"])

    blind = optimal_stationary_mixture(network, interference, cfg.solver)
    factories = []
    counts: dict[str, int] = {}
    for p in cfg.policies:
        name = p["name"]
        counts[name] = counts.get(name, 0) + 1
        label = name if counts[name] == 1 else f"{name}#{counts[name]}"
        if name == "virtual_queue":
            v = sweep_value if cfg.sweep_variable == "v" else p.get("v", 1.0)
            factories.append((label, lambda v=v: VirtualQueuePolicy(v=v)))
        elif name == "age_based":
            beta = sweep_value if cfg.sweep_variable == "beta" else p.get("beta", 1.0)
            factories.append((label, lambda b=beta: AgeBasedPolicy(beta=b)))
        elif name == "stationary_optimal":
            mixture = blind.mixture
            factories.append((label, lambda m=mixture: StationaryPolicy(m)))
        elif name == "stationary":
            try:
                mixture = SetMixture([(m, prob) for m, prob in p["mixture"]])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"policy {label}: bad mixture ({exc})") from exc
            factories.append((label, lambda m=mixture: StationaryPolicy(m)))
        elif name == "priority":
            order = p.get("order")
            factories.append((label, lambda o=order: PriorityPolicy(o)))
    return network, interference, blind, factories


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return format(x, ".6g")
    return str(x)


def run_experiment(cfg: ExperimentConfig, out_path=None):
    """Execute the configured runs; returns (rows, csv_path or None)."""
    rows = []
    for sweep_value in cfg.sweep_values:
        network, interference, blind, factories = _build_instance(cfg, sweep_value)
        alpha_blind = network.gamma * blind.marginals
        lower_bound = float(0.5 * np.sum(network.weights / alpha_blind) + 0.5 * network.weights.sum())
        aware_value = None
        if network.n_links <= cfg.solver.state_cap:
            aware_value = solve_aware_peak(network, interference, cfg.solver).value
        n = network.n_links
        for label, factory in factories:
            probe = factory()
            vq_bound = None
            if aware_value is not None and isinstance(probe, VirtualQueuePolicy):
                vq_bound = virtual_queue_peak_bound(aware_value, network.weights, probe.v)
            for seed in cfg.seeds:
                if cfg.checkpoints:
                    _, reports = run_with_checkpoints(
                        network, interference, factory(), cfg.horizon, seed, cfg.checkpoints
                    )
                else:
                    _, metrics = run(network, interference, factory(), cfg.horizon, seed)
                    reports = [(cfg.horizon, metrics)]
                for t, metrics in reports:
                    rows.append({
                        "sweep_variable": cfg.sweep_variable,
                        "sweep_value": "" if sweep_value is None else sweep_value,
                        "policy": label,
                        "seed": seed,
                        "t": t,
                        "peak_age": metrics.peak_age,
                        "avg_age": metrics.avg_age,
                        "peak_age_per_link": metrics.peak_age / n,
                        "avg_age_per_link": metrics.avg_age / n,
                        "zero_success_links": int(metrics.zero_success_links.sum()),
                        "blind_peak_optimum": blind.value,
                        "avg_age_lower_bound": lower_bound,
                        "virtual_queue_peak_bound": vq_bound,
                    })
    rows.sort(key=lambda r: (
        (r["sweep_value"] is not None and r["sweep_value"] != "", r["sweep_value"] or 0.0),
        r["policy"], r["seed"], r["t"],
    ))

    path = out_path or cfg.output
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in rows:
                writer.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return rows, path


def solve_bounds(cfg: ExperimentConfig) -> dict:
    """Bound report for the base instance (the sweep, if any, is ignored)."""
    cfg = dataclasses.replace(cfg, sweep_variable="none", sweep_values=[None])
    network, interference, _, _ = _build_instance(cfg, None)
    v = next((p.get("v", 1.0) for p in cfg.policies if p["name"] == "virtual_queue"), 1.0)
    beta = next((p.get("beta", 1.0) for p in cfg.policies if p["name"] == "age_based"), 1.0)
    report = build_bound_report(network, interference, cfg.solver, v=v, beta=beta)
    return dataclasses.asdict(report)


def run_diagnose(cfg: ExperimentConfig):
    """Identity and inequality diagnostics for every (policy, seed); returns (lines, ok)."""
    cfg = dataclasses.replace(cfg, sweep_variable="none", sweep_values=[None])
    network, interference, _, factories = _build_instance(cfg, None)
    lines = []
    all_ok = True
    header = (
        f"{'policy':<24}{'seed':>6}  {'conservation':>13}{'squared':>9}"
        f"{'gap_err':>10}{'slack':>10}  result"
    )
    lines.append(header)
    for label, factory in factories:
        for seed in cfg.seeds:
            trajectory, metrics = run(network, interference, factory(), cfg.horizon, seed)
            report = run_diagnostics(trajectory, metrics, network, beta=1.0)
            gap_err = float(np.abs(report.identity_gap - report.identity_gap_expected).max())
            ok = report.passed
            all_ok &= ok
            lines.append(
                f"{label:<24}{seed:>6}  "
                f"{int(np.abs(report.conservation).max()):>13}"
                f"{int(np.abs(report.squared).max()):>9}"
                f"{gap_err:>10.2e}"
                f"{report.slack:>10.3f}  {'pass' if ok else 'FAIL'}"
            )
    return lines, all_ok


# ---------------------------------------------------------------------------
# Shipped scenarios
# ---------------------------------------------------------------------------

def _base_preset(seeds, horizon):
    return {
        "network": {"n_links": 20, "gamma_good": 0.9, "gamma_bad": 0.1, "n_bad": 5},
        "interference": {"variant": "k_of_n", "k": 5},
        "horizon": horizon,
        "seeds": list(range(seeds)),
    }


def preset_config(name: str, seeds: int = 10, horizon: int = 100_000) -> dict:
    """Config dict for a shipped scenario; see PRESETS for the catalogue."""
    base = _base_preset(seeds, horizon)
    if name == "k-sweep":
        base["policies"] = [
            {"name": "virtual_queue", "v": 1.0},
            {"name": "age_based", "beta": 1.0},
            {"name": "stationary_optimal"},
        ]
        base["sweep"] = {"variable": "k", "values": [1, 2, 3, 5, 10, 20]}
        base["note"] = (
            "Peak/average age vs simultaneous-activation capacity; 20 links, 5 bad "
            "(the bad-link count matches the parameter-study default)."
        )
    elif name == "theta-sweep":
        base["policies"] = [
            {"name": "virtual_queue", "v": 1.0},
            {"name": "age_based", "beta": 1.0},
            {"name": "stationary_optimal"},
        ]
        base["sweep"] = {"variable": "theta", "values": [0.0, 0.25, 0.5, 0.75, 1.0]}
        base["note"] = "Age vs fraction of bad-channel links at capacity 5."
    elif name == "v-convergence":
        base["policies"] = [{"name": "virtual_queue"}]
        base["sweep"] = {"variable": "v", "values": [0.1, 100.0]}
        base["checkpoints"] = sorted({t for t in (100, 1000, 10_000, horizon) if t <= horizon})
        base["note"] = (
            "Running peak age of the virtual-queue policy for small and large v; "
            "the long-run value is insensitive to v."
        )
    elif name == "beta-sweep":
        base["policies"] = [{"name": "age_based"}]
        base["sweep"] = {"variable": "beta", "values": [-10.0, -5.0, -2.0, 0.0, 1.0, 2.0, 5.0]}
        base["note"] = (
            "Age-based policy across the score-shift parameter; the grid spans the "
            "degradation regime at negative beta."
        )
    else:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return base


PRESETS = {
    "k-sweep": "age vs activation capacity K (three policies)",
    "theta-sweep": "age vs fraction of bad links at K=5",
    "v-convergence": "running peak age of the virtual-queue policy for v in {0.1, 100}",
    "beta-sweep": "age-based policy across beta, including the negative range",
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    rows, path = run_experiment(cfg, out_path=args.out)
    if path is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    else:
        print(f"wrote {len(rows)} rows to {path}")
    return 0


def _cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    report = solve_bounds(cfg)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote bound report to {args.out}")
    else:
        print(text)
    return 0


def _cmd_preset(args) -> int:
    cfg_dict = preset_config(args.name, seeds=args.seeds, horizon=args.horizon)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_dict["output"] = str(out_dir / f"{args.name}.csv")
    config_path = out_dir / f"{args.name}.json"
    config_path.write_text(json.dumps(cfg_dict, indent=2) + "\n")
    rows, path = run_experiment(load_config(cfg_dict))
    print(f"wrote {config_path}")
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def _cmd_diagnose(args) -> int:
    cfg = load_config(args.config)
    lines, ok = run_diagnose(cfg)
    print("\n".join(lines))
    print("all checks passed" if ok else "DIAGNOSTICS FAILED")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="aoisched",
        description="Age-of-information scheduling experiments: simulate, solve bounds, diagnose.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a config and write the results CSV")
    p.add_argument("config")
    p.add_argument("--out", help="override the CSV output path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bounds", help="solve optima and print the bound report as JSON")
    p.add_argument("config")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("preset", help="materialize and run a shipped scenario")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--out", default="presets", help="output directory (default: ./presets)")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds (default 10)")
    p.add_argument("--horizon", type=int, default=100_000,
                   help="slots per run (default 100000; lower for quick looks)")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("diagnose", help="run exact identity checks for every policy")
    p.add_argument("config")
    p.set_defaults(func=_cmd_diagnose)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UnschedulableLinkError as exc:
        print(f"infeasible instance: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"solver failed to converge: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
