"""Command-line entry point: batch experiments to plot-ready CSV/JSON.

Commands: stationary, sweep, pareto, map, uncertainty, oracle-check.
Every run writes manifest.json first (config echo, versions, timestamps,
seed, declared outputs with row counts), then the referenced tables.
Floats are printed with 17 significant digits so reruns with identical
config, seed, and any --threads value are byte-identical.

Exit codes: 0 ok, 1 invalid configuration or infeasible request, 2 I/O
error, 3 solver failure, 4 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import platform
import sys

import numpy as np
import scipy

from . import __version__
from .domain import (ModelConfig, ProviderPopulation, State, UserPopulation,
                     ValidationError, config_from_json, state_from_index)
from .dynamics import SolverError, stationary, transition_matrix
from .metrics import evaluate
from .oracle import simulate_selection, simulate_utility
from .recsel import RatingConfiguration, choice_table
from .payoff import utility
from .sweep import (InfeasibleError, UncertaintySpec, kg_dpr_map,
                    optimize_under_uncertainty, pareto_front, sweep_epsilon,
                    sweep_gamma, sweep_kg, sweep_km)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_SOLVER = 3
EXIT_ORACLE = 4

DEFAULT_SEED = 12345
DEFAULT_BATTERY_CONFIGS = 20
DEFAULT_BATTERY_EPISODES = 1_000_000


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("PLATFORM_EGT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError([f"PLATFORM_EGT_THREADS must be an integer, got {env!r}"])
    return 1


def _load_config(path: str) -> ModelConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IOError(f"cannot read config {path}: {exc}") from exc
    return config_from_json(text)


class _Bundle:
    """Collects tables in memory, then writes manifest first."""

    def __init__(self, out_dir: str, command: str, config: ModelConfig | None,
                 seed: int | None, threads: int):
        self.out_dir = out_dir
        self.command = command
        self.config = config
        self.seed = seed
        self.threads = threads
        self.tables: list[tuple[str, list[str], list[list]]] = []
        self.json_docs: list[tuple[str, dict]] = []

    def add_table(self, name: str, header: list[str], rows: list[list]) -> None:
        self.tables.append((name, header, rows))

    def add_json(self, name: str, doc: dict) -> None:
        self.json_docs.append((name, doc))

    def write(self) -> None:
        try:
            os.makedirs(self.out_dir, exist_ok=True)
            manifest = {
                "command": self.command,
                "config": self.config.flat() if self.config else None,
                "seed": self.seed,
                "threads": self.threads,
                "versions": {
                    "platform_egt": __version__,
                    "python": platform.python_version(),
                    "numpy": np.__version__,
                    "scipy": scipy.__version__,
                },
                "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
                "outputs": (
                    [{"file": n, "rows": len(rows)} for n, _, rows in self.tables]
                    + [{"file": n, "rows": None} for n, _ in self.json_docs]
                ),
            }
            with open(os.path.join(self.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, indent=2)
                fh.write("\n")
            for name, doc in self.json_docs:
                with open(os.path.join(self.out_dir, name), "w", encoding="utf-8") as fh:
                    json.dump(doc, fh, indent=2, default=_json_default)
                    fh.write("\n")
            for name, header, rows in self.tables:
                with open(os.path.join(self.out_dir, name), "w", encoding="utf-8", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(header)
                    for row in rows:
                        writer.writerow([_fmt(v) for v in row])
        except OSError as exc:
            raise IOError(f"cannot write outputs to {self.out_dir}: {exc}") from exc


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _parse_range(text: str, integral: bool) -> list:
    """lo:hi[:step], inclusive endpoints."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ValidationError([f"range must be lo:hi[:step], got {text!r}"])
    try:
        lo = float(parts[0])
        hi = float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 1.0
    except ValueError:
        raise ValidationError([f"range endpoints must be numeric, got {text!r}"])
    if step <= 0:
        raise ValidationError(["range step must be positive"])
    if hi < lo:
        raise ValidationError(["range upper bound below lower bound"])
    values = []
    i = 0
    while True:
        v = lo + i * step
        if v > hi + 1e-12:
            break
        values.append(v)
        i += 1
    if integral:
        out = []
        for v in values:
            if abs(v - round(v)) > 1e-9:
                raise ValidationError([f"integer axis requires integer range values, got {v}"])
            out.append(int(round(v)))
        return out
    return [round(v, 12) for v in values]


def cmd_stationary(args) -> int:
    config = _load_config(args.config)
    threads = _resolve_threads(args.threads)
    grids_tm = transition_matrix(config)
    result = stationary(grids_tm)
    report = evaluate(config, result=result)
    pop = config.population
    h = result.distribution
    bundle = _Bundle(args.out, "stationary", config, args.seed, threads)
    st_rows = []
    for idx, prob in enumerate(h):
        state = state_from_index(idx, pop)
        st_rows.append([state.h_m, state.h_d, float(prob)])
    bundle.add_table("stationary.csv", ["h_m", "h_d", "prob"], st_rows)
    drift_rows = []
    for idx in range(h.size):
        state = state_from_index(idx, pop)
        drift_rows.append([state.h_m, state.h_d,
                           float(result.drift_m[state.h_m, state.h_d]),
                           float(result.drift_d[state.h_m, state.h_d])])
    bundle.add_table("drift.csv", ["h_m", "h_d", "d_m", "d_d"], drift_rows)
    doc = report.as_dict()
    doc["solver"] = {"method": result.method, "iterations": result.iterations,
                     "residual": result.residual}
    bundle.add_json("metrics.json", doc)
    bundle.write()
    return EXIT_OK


_SWEEP_FUNCS = {
    "kg": (sweep_kg, True),
    "km": (sweep_km, True),
    "eps": (sweep_epsilon, False),
    "gamma": (sweep_gamma, False),
}


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    threads = _resolve_threads(args.threads)
    if args.axis not in _SWEEP_FUNCS:
        raise ValidationError([f"unknown axis {args.axis!r}"])
    func, integral = _SWEEP_FUNCS[args.axis]
    values = _parse_range(args.range, integral)
    result = func(config, values, threads=threads)
    rows = []
    for row in result.rows:
        r = row.report
        rows.append([row.axis_value, r.ux, r.dpr, r.coop_mass_m, r.coop_mass_d,
                     r.u_bar_m, r.u_bar_d, r.regime])
    bundle = _Bundle(args.out, "sweep", config, args.seed, threads)
    bundle.add_table("sweep.csv",
                     ["axis_value", "ux", "dpr", "coop_m", "coop_d",
                      "u_bar_m", "u_bar_d", "regime"], rows)
    bundle.write()
    return EXIT_OK


def cmd_pareto(args) -> int:
    config = _load_config(args.config)
    threads = _resolve_threads(args.threads)
    kg_values = _parse_range(args.kg, True) if args.kg else list(range(config.users.k + 1))
    km_values = _parse_range(args.km, True) if args.km else [0]
    candidates = [(kg, km) for kg in kg_values for km in km_values if km <= kg]
    if not candidates:
        raise ValidationError(["empty (k_g, k_m) candidate set"])
    front = pareto_front(config, candidates, threads=threads)
    points = front.points
    if args.regime_c_only:
        kept = [p for p in points if p.report.regime == "C"]
        if kept:
            front = pareto_front(config, [(p.k_g, p.k_m) for p in kept], threads=threads)
            points = front.points
        else:
            points = []
    rows = [[p.k_g, p.k_m, p.report.ux, p.report.dpr, p.on_front] for p in points]
    bundle = _Bundle(args.out, "pareto", config, args.seed, threads)
    bundle.add_table("pareto.csv", ["k_g", "k_m", "ux", "dpr", "on_front"], rows)
    bundle.write()
    return EXIT_OK


def cmd_map(args) -> int:
    config = _load_config(args.config)
    threads = _resolve_threads(args.threads)
    eps_values = [(i + 1) / (args.eps_points + 1) for i in range(args.eps_points)]
    gamma_values = [(i + 1) / (args.gamma_points + 1) for i in range(args.gamma_points)]
    cells = kg_dpr_map(config, eps_values, gamma_values, threads=threads)
    rows = [[c.epsilon, c.gamma, c.kg_dpr if c.feasible else "", c.feasible]
            for c in cells]
    bundle = _Bundle(args.out, "map", config, args.seed, threads)
    bundle.add_table("map.csv", ["epsilon", "gamma", "kg_dpr", "feasible"], rows)
    bundle.write()
    return EXIT_OK


def cmd_uncertainty(args) -> int:
    config = _load_config(args.config)
    threads = _resolve_threads(args.threads)
    eps_true = config.users.epsilon
    if args.widths:
        widths = _parse_range(args.widths, False)
    else:
        wmax = 2.0 * min(eps_true, 1.0 - eps_true)
        widths = [round(wmax * i / 8.0, 12) for i in range(9)]
    objectives = ["expected_dpr", "maximin_dpr"] if args.objective == "both" else [args.objective]
    candidates = [(kg, km) for kg in range(config.users.k + 1) for km in range(kg + 1)]
    rows = []
    for width in widths:
        lo, hi = eps_true - width / 2.0, eps_true + width / 2.0
        if lo < -1e-12 or hi > 1.0 + 1e-12:
            raise ValidationError(
                [f"width {width} puts the belief interval outside [0, 1]"])
        for objective in objectives:
            spec = UncertaintySpec(epsilon_min=max(lo, 0.0), epsilon_max=min(hi, 1.0),
                                   points=args.belief_points, objective=objective,
                                   feasibility=args.feasibility)
            result = optimize_under_uncertainty(spec, config, candidates, threads=threads)
            baseline_worst = result.baseline.worst_dpr if result.baseline else ""
            rows.append([width, objective, result.chosen.k_g, result.chosen.k_m,
                         result.chosen.worst_dpr, result.chosen.average_dpr,
                         baseline_worst])
    bundle = _Bundle(args.out, "uncertainty", config, args.seed, threads)
    bundle.add_table("uncertainty.csv",
                     ["width", "objective", "k_g", "k_m", "worst_dpr",
                      "avg_dpr", "baseline_worst_dpr"], rows)
    bundle.write()
    return EXIT_OK


def battery_configs(seed: int, count: int) -> list[dict]:
    """Deterministic battery of small scenarios for the oracle check."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    out = []
    for i in range(count):
        z_d = int(rng.integers(2, 7))
        z_m = int(rng.integers(2, 7))
        while z_d + z_m > 12:
            z_d = int(rng.integers(2, 7))
            z_m = int(rng.integers(2, 7))
        z = z_d + z_m
        k = int(rng.integers(1, z + 1))
        k_g = int(rng.integers(0, k + 1))
        k_m = int(rng.integers(0, k_g + 1))
        epsilon = float(np.round(rng.uniform(0.0, 1.0), 3))
        gamma = float(np.round(rng.uniform(0.0, 0.95), 3))
        z_gd = int(rng.integers(0, z_d + 1))
        z_gm = int(rng.integers(0, z_m + 1))
        h_m = int(rng.integers(1, z_m))
        h_d = int(rng.integers(1, z_d))
        out.append(dict(z_d=z_d, z_m=z_m, k=k, k_g=k_g, k_m=k_m, epsilon=epsilon,
                        gamma=gamma, z_gd=z_gd, z_gm=z_gm, h_m=h_m, h_d=h_d,
                        tag=f"cfg{i:02d}"))
    return out


def run_oracle_battery(seed: int, episodes: int, count: int,
                       threads: int = 1) -> tuple[list[list], bool]:
    """(oracle.csv rows, all_within_4_sigma)."""
    rows = []
    ok = True
    for scenario in battery_configs(seed, count):
        tag = scenario["tag"]
        users = UserPopulation(epsilon=scenario["epsilon"], gamma=scenario["gamma"],
                               k=scenario["k"])
        from .domain import EconomicParams, EvolutionParams, PlatformPolicy
        policy = PlatformPolicy(k_g=scenario["k_g"], k_m=scenario["k_m"])
        cfg = RatingConfiguration(z_gd=scenario["z_gd"], z_gm=scenario["z_gm"],
                                  z_d=scenario["z_d"], z_m=scenario["z_m"])
        table = choice_table(cfg, users, policy)
        run = simulate_selection(cfg, users, policy, episodes, seed + 1000, threads=threads)
        for cat in (("M", "G"), ("M", "B"), ("D", "G"), ("D", "B")):
            exact = table.probability(*cat)
            if exact is None:
                continue
            count_cat = cfg.count(*cat)
            expected = count_cat * exact
            emp = run.chosen_freq[cat]
            se = run.chosen_se[cat]
            if se == 0.0:
                z = 0.0 if abs(emp - expected) < 1e-12 else float("inf")
            else:
                z = (emp - expected) / se
            ok &= abs(z) <= 4.0
            rows.append([f"{tag}/choice/{cat[0]}{cat[1]}", expected, emp, se, z])

        model = ModelConfig(
            population=ProviderPopulation(z_d=scenario["z_d"], z_m=scenario["z_m"]),
            users=users, policy=policy, economics=EconomicParams(),
            evolution=EvolutionParams(),
        )
        state = State(h_m=scenario["h_m"], h_d=scenario["h_d"])
        for group in ("M", "D"):
            for strategy in ("H", "L"):
                exact_u = utility(group, strategy, state, model)
                run_u = simulate_utility(state, group, strategy, model, episodes,
                                         seed + 2000, threads=threads)
                se = run_u.payoff_se
                if se == 0.0:
                    z = 0.0 if abs(run_u.payoff_mean - exact_u) < 1e-12 else float("inf")
                else:
                    z = (run_u.payoff_mean - exact_u) / se
                ok &= abs(z) <= 4.0
                rows.append([f"{tag}/utility/{group}{strategy}", exact_u,
                             run_u.payoff_mean, se, z])
    return rows, ok


def cmd_oracle_check(args) -> int:
    threads = _resolve_threads(args.threads)
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    rows, ok = run_oracle_battery(seed, args.episodes, args.configs, threads=threads)
    bundle = _Bundle(args.out, "oracle-check", None, seed, threads)
    bundle.add_table("oracle.csv", ["category", "exact", "empirical", "stderr", "z_score"], rows)
    bundle.write()
    return EXIT_OK if ok else EXIT_ORACLE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platform-egt",
        description="Exact evolutionary-dynamics engine for two-group service platforms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="path to the JSON configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: PLATFORM_EGT_THREADS or 1)")
        p.add_argument("--seed", type=int, default=None, help="random seed (oracle runs)")

    p = sub.add_parser("stationary", help="stationary distribution, drift field, metrics")
    common(p)
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("sweep", help="metrics along one parameter axis")
    common(p)
    p.add_argument("--axis", required=True, choices=sorted(_SWEEP_FUNCS))
    p.add_argument("--range", required=True, help="lo:hi[:step], inclusive")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pareto", help="(UX, DPR) nondomination over (k_g, k_m) candidates")
    common(p)
    p.add_argument("--kg", default=None, help="k_g range lo:hi[:step] (default 0:k)")
    p.add_argument("--km", default=None, help="k_m range lo:hi[:step] (default 0:0)")
    p.add_argument("--regime-c-only", action="store_true",
                   help="restrict candidates to regime-C rows before filtering")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("map", help="DPR-maximizing k_g over an (epsilon, gamma) grid")
    common(p)
    p.add_argument("--eps-points", type=int, default=9)
    p.add_argument("--gamma-points", type=int, default=9)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("uncertainty", help="policy choice under epsilon uncertainty")
    common(p)
    p.add_argument("--widths", default=None, help="width range lo:hi:step (default 9 steps)")
    p.add_argument("--belief-points", type=int, default=15)
    p.add_argument("--objective", choices=["expected_dpr", "maximin_dpr", "both"],
                   default="both")
    p.add_argument("--feasibility", choices=["every", "midpoint"], default="every")
    p.set_defaults(func=cmd_uncertainty)

    p = sub.add_parser("oracle-check", help="Monte Carlo validation battery")
    common(p, needs_config=False)
    p.add_argument("--episodes", type=int, default=DEFAULT_BATTERY_EPISODES)
    p.add_argument("--configs", type=int, default=DEFAULT_BATTERY_CONFIGS)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
