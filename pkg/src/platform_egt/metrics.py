"""Evaluation metrics over the stationary distribution.

A group is "mostly cooperative" when more than half of the stationary mass
sits on its full-cooperation edge; regimes classify which groups qualify.
UX is the stationary expected share of H-players weighted by group size, and
DPR the ratio of the worse-off group's stationary average utility to the
better-off group's.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .domain import ModelConfig, ProviderPopulation, validate
from .dynamics import StationaryResult, stationary, transition_matrix
from .payoff import utility_grids

REGIMES = ("A", "B", "C", "B'")


@dataclass(frozen=True)
class MetricsReport:
    coop_mass_m: float
    coop_mass_d: float
    mostly_cooperative_m: bool
    mostly_cooperative_d: bool
    regime: str
    regime_anomalous: bool
    sigma_star_m: float
    sigma_star_d: float
    ux: float
    u_bar_m: float
    u_bar_d: float
    dpr: float
    dpr_degenerate: bool

    def as_dict(self) -> dict:
        return asdict(self)


def cooperation_mass(h_star: np.ndarray, population: ProviderPopulation,
                     group: str) -> float:
    """Stationary mass on the h_g = Z_g edge."""
    h = h_star.reshape(population.z_m + 1, population.z_d + 1)
    if group == "M":
        return float(h[population.z_m, :].sum())
    return float(h[:, population.z_d].sum())


def regime(mostly_m: bool, mostly_d: bool) -> str:
    """A: neither group mostly cooperative, B: dominant only, C: both.

    The anomalous marginalised-only combination is labeled B'.
    """
    if mostly_m and mostly_d:
        return "C"
    if mostly_d:
        return "B"
    if mostly_m:
        return "B'"
    return "A"


def user_experience(h_star: np.ndarray, population: ProviderPopulation
                    ) -> tuple[float, float, float]:
    """(sigma*_M, sigma*_D, UX): expected H-share per group and platform-wide."""
    z_m, z_d = population.z_m, population.z_d
    h = h_star.reshape(z_m + 1, z_d + 1)
    share_m = np.arange(z_m + 1)[:, None] / z_m
    share_d = np.arange(z_d + 1)[None, :] / z_d
    sigma_m = float((h * share_m).sum())
    sigma_d = float((h * share_d).sum())
    ux = (sigma_m * z_m + sigma_d * z_d) / population.z
    return sigma_m, sigma_d, ux


def group_average_utility(grids: dict, population: ProviderPopulation,
                          group: str) -> np.ndarray:
    """Strategy-share-weighted average utility of one group at each state."""
    z_m, z_d = population.z_m, population.z_d
    if group == "M":
        share = np.arange(z_m + 1)[:, None] / z_m
        return grids["ML"] * (1.0 - share) + grids["MH"] * share
    share = np.arange(z_d + 1)[None, :] / z_d
    return grids["DL"] * (1.0 - share) + grids["DH"] * share


def demographic_parity_ratio(h_star: np.ndarray, grids: dict,
                             population: ProviderPopulation
                             ) -> tuple[float, float, float, bool]:
    """(u_bar_M, u_bar_D, DPR, degenerate_flag)."""
    h = h_star.reshape(population.z_m + 1, population.z_d + 1)
    u_bar_m = float((h * group_average_utility(grids, population, "M")).sum())
    u_bar_d = float((h * group_average_utility(grids, population, "D")).sum())
    if u_bar_m < 0.0 or u_bar_d < 0.0:
        raise RuntimeError("negative group utility violates payoff invariants")
    hi = max(u_bar_m, u_bar_d)
    if hi == 0.0:
        return u_bar_m, u_bar_d, 1.0, True
    return u_bar_m, u_bar_d, min(u_bar_m, u_bar_d) / hi, False


def evaluate(config: ModelConfig,
             result: StationaryResult | None = None) -> MetricsReport:
    """Full pipeline for one configuration: utilities, chain, stationary,
    report."""
    validate(config)
    grids = utility_grids(config)
    if result is None:
        result = stationary(transition_matrix(config, grids=grids))
    h = result.distribution
    pop = config.population
    mass_m = cooperation_mass(h, pop, "M")
    mass_d = cooperation_mass(h, pop, "D")
    mostly_m = mass_m > 0.5
    mostly_d = mass_d > 0.5
    label = regime(mostly_m, mostly_d)
    sigma_m, sigma_d, ux = user_experience(h, pop)
    u_bar_m, u_bar_d, dpr, degenerate = demographic_parity_ratio(h, grids, pop)
    return MetricsReport(
        coop_mass_m=mass_m,
        coop_mass_d=mass_d,
        mostly_cooperative_m=mostly_m,
        mostly_cooperative_d=mostly_d,
        regime=label,
        regime_anomalous=label == "B'",
        sigma_star_m=sigma_m,
        sigma_star_d=sigma_d,
        ux=ux,
        u_bar_m=u_bar_m,
        u_bar_d=u_bar_d,
        dpr=dpr,
        dpr_degenerate=degenerate,
    )
