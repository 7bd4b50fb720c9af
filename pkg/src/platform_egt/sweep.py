"""Experiment drivers: parameter sweeps, Pareto fronts, policy search.

Every driver reduces to evaluating the exact pipeline (utilities ->
transition matrix -> stationary distribution -> metrics) on a grid of
configurations. Grid points are independent pure computations, so they are
memoized on the full configuration and may be mapped over a thread pool;
results are always assembled in task-index order, which makes sweep output
independent of the worker count, bit for bit.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .domain import ModelConfig, ValidationError, validate
from .metrics import MetricsReport, evaluate

_CACHE: dict[ModelConfig, MetricsReport] = {}
_CACHE_LOCK = threading.Lock()
_CACHE_LIMIT = 200_000


class InfeasibleError(ValueError):
    """No candidate policy satisfies the feasibility constraint."""


def evaluate_cached(config: ModelConfig) -> MetricsReport:
    report = _CACHE.get(config)
    if report is None:
        report = evaluate(config)
        with _CACHE_LOCK:
            if len(_CACHE) >= _CACHE_LIMIT:
                _CACHE.clear()
            _CACHE[config] = report
    return report


def evaluate_many(configs: list[ModelConfig], threads: int = 1) -> list[MetricsReport]:
    """Pipeline reports for each config, in input order."""
    if threads <= 1 or len(configs) <= 1:
        return [evaluate_cached(c) for c in configs]
    out: list = [None] * len(configs)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(evaluate_cached, c): i for i, c in enumerate(configs)}
        for fut, i in futures.items():
            out[i] = fut.result()
    return out


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    config: ModelConfig
    report: MetricsReport


@dataclass(frozen=True)
class SweepResult:
    axis: str
    rows: tuple[SweepRow, ...]
    changepoints: tuple[float, ...]   # axis values where the regime switches


def _sweep(base: ModelConfig, axis: str, values, threads: int) -> SweepResult:
    validate(base)
    configs = [base.with_params(**{axis: v}) for v in values]
    for cfg in configs:
        validate(cfg)
    reports = evaluate_many(configs, threads=threads)
    rows = tuple(SweepRow(axis_value=v, config=c, report=r)
                 for v, c, r in zip(values, configs, reports))
    changepoints = tuple(rows[i].axis_value for i in range(1, len(rows))
                         if rows[i].report.regime != rows[i - 1].report.regime)
    return SweepResult(axis=axis, rows=rows, changepoints=changepoints)


def sweep_kg(base: ModelConfig, kg_values, threads: int = 1) -> SweepResult:
    kg_values = list(kg_values)
    for kg in kg_values:
        if not 0 <= kg <= base.users.k:
            raise ValidationError([f"k_g={kg} outside 0..k"])
    return _sweep(base, "k_g", kg_values, threads)


def sweep_km(base: ModelConfig, km_values, threads: int = 1) -> SweepResult:
    km_values = list(km_values)
    for km in km_values:
        if not 0 <= km <= base.policy.k_g:
            raise ValidationError([f"k_m={km} outside 0..k_g"])
    return _sweep(base, "k_m", km_values, threads)


def sweep_epsilon(base: ModelConfig, values, threads: int = 1) -> SweepResult:
    return _sweep(base, "epsilon", list(values), threads)


def sweep_gamma(base: ModelConfig, values, threads: int = 1) -> SweepResult:
    return _sweep(base, "gamma", list(values), threads)


def select_kg_for_km_scan(base: ModelConfig, threads: int = 1) -> int:
    """The k_G maximizing UX * DPR subject to k_M = 0 (smallest on ties)."""
    result = sweep_kg(base.with_params(k_m=0), range(base.users.k + 1), threads=threads)
    best_kg, best = None, -1.0
    for row in result.rows:
        v = row.report.ux * row.report.dpr
        if v > best:
            best_kg, best = int(row.axis_value), v
    return best_kg


@dataclass(frozen=True)
class ParetoPoint:
    k_g: int
    k_m: int
    report: MetricsReport
    on_front: bool


@dataclass(frozen=True)
class ParetoFront:
    points: tuple[ParetoPoint, ...]

    @property
    def front(self) -> tuple[ParetoPoint, ...]:
        return tuple(p for p in self.points if p.on_front)


def pareto_front(base: ModelConfig, candidates, threads: int = 1) -> ParetoFront:
    """Nondomination filter on (UX, DPR) over (k_g, k_m) candidates.

    A point is dominated when another candidate is at least as good on both
    metrics and strictly better on one; ties are kept.
    """
    candidates = [(int(kg), int(km)) for kg, km in candidates]
    if not candidates:
        raise ValidationError(["candidate set must be nonempty"])
    configs = [base.with_params(k_g=kg, k_m=km) for kg, km in candidates]
    reports = evaluate_many(configs, threads=threads)
    metrics = [(r.ux, r.dpr) for r in reports]
    points = []
    for i, (kg, km) in enumerate(candidates):
        ux_i, dpr_i = metrics[i]
        dominated = any(
            (ux_j >= ux_i and dpr_j >= dpr_i) and (ux_j > ux_i or dpr_j > dpr_i)
            for j, (ux_j, dpr_j) in enumerate(metrics) if j != i
        )
        points.append(ParetoPoint(k_g=kg, k_m=km, report=reports[i],
                                  on_front=not dominated))
    return ParetoFront(points=tuple(points))


@dataclass(frozen=True)
class MapCell:
    epsilon: float
    gamma: float
    kg_dpr: int | None
    feasible: bool


def kg_dpr_map(base: ModelConfig, eps_values, gamma_values,
               threads: int = 1) -> list[MapCell]:
    """Per (epsilon, gamma): the k_G maximizing DPR subject to regime C.

    k_M stays at the base config's value (0 in the published experiment).
    Ties break toward smaller k_G; cells with no regime-C k_G are marked
    infeasible.
    """
    eps_values = list(eps_values)
    gamma_values = list(gamma_values)
    for v in eps_values + gamma_values:
        if not 0.0 < v < 1.0:
            raise ValidationError(["map grids must lie strictly inside (0, 1)"])
    k = base.users.k
    configs = []
    for eps in eps_values:
        for gam in gamma_values:
            for kg in range(k + 1):
                configs.append(base.with_params(epsilon=eps, gamma=gam, k_g=kg))
    reports = evaluate_many(configs, threads=threads)
    cells = []
    i = 0
    for eps in eps_values:
        for gam in gamma_values:
            best_kg, best_dpr = None, -1.0
            for kg in range(k + 1):
                rep = reports[i]
                i += 1
                if rep.regime == "C" and rep.dpr > best_dpr:
                    best_kg, best_dpr = kg, rep.dpr
            cells.append(MapCell(epsilon=eps, gamma=gam, kg_dpr=best_kg,
                                 feasible=best_kg is not None))
    return cells


@dataclass(frozen=True)
class UncertaintySpec:
    """Uniform belief over [epsilon_min, epsilon_max] plus the objective.

    objective: "expected_dpr" averages DPR over the belief grid,
    "maximin_dpr" takes the worst case. feasibility: "every" requires regime
    C at every grid epsilon, "midpoint" only at the interval midpoint.
    """

    epsilon_min: float
    epsilon_max: float
    points: int = 15
    objective: str = "expected_dpr"
    feasibility: str = "every"

    def problems(self) -> list[str]:
        out = []
        if not 0.0 <= self.epsilon_min <= self.epsilon_max <= 1.0:
            out.append("belief interval must satisfy 0 <= min <= max <= 1")
        if self.epsilon_max > self.epsilon_min and self.points < 2:
            out.append("belief grid needs at least 2 points when width > 0")
        if self.points < 1:
            out.append("belief grid needs at least 1 point")
        if self.objective not in ("expected_dpr", "maximin_dpr"):
            out.append("objective must be expected_dpr or maximin_dpr")
        if self.feasibility not in ("every", "midpoint"):
            out.append("feasibility must be 'every' or 'midpoint'")
        return out

    def grid(self) -> list[float]:
        if self.epsilon_max == self.epsilon_min:
            return [self.epsilon_min]
        n = self.points
        w = self.epsilon_max - self.epsilon_min
        return [self.epsilon_min + w * i / (n - 1) for i in range(n)]


@dataclass(frozen=True)
class PolicyProfile:
    k_g: int
    k_m: int
    dpr_by_epsilon: tuple[float, ...]
    worst_dpr: float
    average_dpr: float
    objective_value: float


@dataclass(frozen=True)
class UncertaintyResult:
    spec: UncertaintySpec
    chosen: PolicyProfile
    baseline: PolicyProfile | None   # best k_M = 0 policy, None if none feasible
    feasible_count: int


def optimize_under_uncertainty(spec: UncertaintySpec, base: ModelConfig,
                               candidates, threads: int = 1) -> UncertaintyResult:
    """Pick the candidate (k_g, k_m) maximizing the belief objective.

    Every candidate's DPR profile is evaluated on the belief grid;
    infeasible candidates (regime C violated per spec.feasibility) are
    dropped. Ties break toward smaller k_g, then smaller k_m. The k_M = 0
    baseline is optimized under the same objective and feasibility rule.
    """
    bad = spec.problems()
    if bad:
        raise ValidationError(bad)
    candidates = [(int(kg), int(km)) for kg, km in candidates]
    if not candidates:
        raise ValidationError(["candidate set must be nonempty"])
    grid = spec.grid()
    midpoint = 0.5 * (spec.epsilon_min + spec.epsilon_max)

    configs = []
    for kg, km in candidates:
        for eps in grid:
            configs.append(base.with_params(k_g=kg, k_m=km, epsilon=eps))
        if spec.feasibility == "midpoint":
            configs.append(base.with_params(k_g=kg, k_m=km, epsilon=midpoint))
    reports = evaluate_many(configs, threads=threads)

    stride = len(grid) + (1 if spec.feasibility == "midpoint" else 0)
    profiles: list[PolicyProfile] = []
    for idx, (kg, km) in enumerate(candidates):
        block = reports[idx * stride:(idx + 1) * stride]
        on_grid = block[: len(grid)]
        if spec.feasibility == "every":
            feasible = all(r.regime == "C" for r in on_grid)
        else:
            feasible = block[-1].regime == "C"
        if not feasible:
            continue
        dprs = tuple(r.dpr for r in on_grid)
        worst = min(dprs)
        avg = sum(dprs) / len(dprs)
        objective = avg if spec.objective == "expected_dpr" else worst
        profiles.append(PolicyProfile(k_g=kg, k_m=km, dpr_by_epsilon=dprs,
                                      worst_dpr=worst, average_dpr=avg,
                                      objective_value=objective))

    if not profiles:
        raise InfeasibleError(
            f"no candidate keeps regime C over the belief interval "
            f"[{spec.epsilon_min}, {spec.epsilon_max}] (feasibility={spec.feasibility!r})"
        )

    def best_of(pool: list[PolicyProfile]) -> PolicyProfile | None:
        if not pool:
            return None
        return max(pool, key=lambda p: (p.objective_value, -p.k_g, -p.k_m))

    chosen = best_of(profiles)
    baseline = best_of([p for p in profiles if p.k_m == 0])
    return UncertaintyResult(spec=spec, chosen=chosen, baseline=baseline,
                             feasible_count=len(profiles))


def clear_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()
