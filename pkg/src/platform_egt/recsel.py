"""Exact probability that a provider is recommended and then chosen.

The recommendation list of size k is built in three uniform
without-replacement stages:

  stage 1: k_hat_m slots from the Good-rated marginalised providers,
  stage 2: k_hat_g - k_hat_m slots from the remaining Good-rated providers
           of either group,
  stage 3: k_r = k - k_hat_g slots from every provider not yet shown,
           regardless of rating,

with k_hat_m = min(k_m, Z_GM) and k_hat_g = min(k_g, Z_G). The user then
picks one shown provider with probability proportional to weight 1 (rating
Good) or 1 - gamma (rating Bad); if every shown weight is zero (possible
only at gamma = 1 with no Good-rated provider shown) the pick is uniform.

Stages 1 and 2 contribute exactly k_hat_g Good-rated members, so the only
random part of the list composition is the hypergeometric count of
Good-rated providers among the stage-3 draws. Every probability below is an
exact expectation over that count and the focal's inclusion stage — no
sampling anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import PlatformPolicy, UserPopulation, ValidationError
from .exactprob import hypergeometric_pmf, log_binomial_coeff

GROUPS = ("M", "D")
RATINGS = ("G", "B")


@dataclass(frozen=True)
class RatingConfiguration:
    """Counts of Good-rated providers per group, within fixed group sizes."""

    z_gd: int
    z_gm: int
    z_d: int
    z_m: int

    @property
    def z(self) -> int:
        return self.z_d + self.z_m

    @property
    def z_g(self) -> int:
        return self.z_gd + self.z_gm

    @property
    def z_b(self) -> int:
        return self.z - self.z_g

    def problems(self) -> list[str]:
        out = []
        if not 0 <= self.z_gd <= self.z_d:
            out.append("z_gd must lie in 0..z_d")
        if not 0 <= self.z_gm <= self.z_m:
            out.append("z_gm must lie in 0..z_m")
        return out

    def count(self, group: str, rating: str) -> int:
        if group == "M":
            return self.z_gm if rating == "G" else self.z_m - self.z_gm
        return self.z_gd if rating == "G" else self.z_d - self.z_gd


@dataclass(frozen=True)
class FocalDescriptor:
    group: str
    rating: str


@dataclass(frozen=True)
class EffectivePolicy:
    """Feasibility-clipped slot counts for one rating configuration."""

    k_hat_m: int
    k_hat_g: int
    k_r: int


@dataclass(frozen=True)
class InclusionProbability:
    """Per-stage inclusion terms; stages 2 and 3 are conditional on missing
    the earlier stages."""

    stage1: float
    stage2: float
    stage3: float

    @property
    def total(self) -> float:
        return 1.0 - (1.0 - self.stage1) * (1.0 - self.stage2) * (1.0 - self.stage3)


@dataclass(frozen=True)
class ChoiceProbabilityTable:
    """Choice probability per (group, rating); None marks absent categories."""

    probabilities: dict
    inclusions: dict
    configuration: RatingConfiguration

    def probability(self, group: str, rating: str) -> float | None:
        return self.probabilities[(group, rating)]


def effective_policy(cfg: RatingConfiguration, users: UserPopulation,
                     policy: PlatformPolicy) -> EffectivePolicy:
    k_hat_m = min(policy.k_m, cfg.z_gm)
    k_hat_g = min(policy.k_g, cfg.z_g)
    return EffectivePolicy(k_hat_m=k_hat_m, k_hat_g=k_hat_g, k_r=users.k - k_hat_g)


def _check_focal(focal: FocalDescriptor, cfg: RatingConfiguration) -> None:
    if focal.group not in GROUPS or focal.rating not in RATINGS:
        raise ValidationError([f"invalid focal descriptor {focal}"])
    if cfg.count(focal.group, focal.rating) < 1:
        raise ValidationError(
            [f"focal ({focal.group}, {focal.rating}) has no member in the configuration"]
        )


def inclusion_probability(focal: FocalDescriptor, cfg: RatingConfiguration,
                          pol: EffectivePolicy) -> InclusionProbability:
    """Stagewise probability that the focal provider appears in the list.

    Uniform sampling without replacement makes each stage's marginal simply
    draws / pool-size for every member of the stage pool.
    """
    _check_focal(focal, cfg)
    bad = cfg.problems()
    if bad:
        raise ValidationError(bad)

    stage1 = stage2 = stage3 = 0.0
    if focal.rating == "G":
        if focal.group == "M" and pol.k_hat_m > 0:
            stage1 = pol.k_hat_m / cfg.z_gm
        stage2_draws = pol.k_hat_g - pol.k_hat_m
        if stage2_draws > 0:
            stage2 = stage2_draws / (cfg.z_g - pol.k_hat_m)
    if pol.k_r > 0:
        stage3 = pol.k_r / (cfg.z - pol.k_hat_g)
    return InclusionProbability(stage1=stage1, stage2=stage2, stage3=stage3)


def _list_weight(n_good: int, n_bad: int, gamma: float) -> float:
    return n_good + n_bad * (1.0 - gamma)


def choice_probability(focal: FocalDescriptor, cfg: RatingConfiguration,
                       users: UserPopulation, policy: PlatformPolicy) -> float:
    """Exact P(focal is shown and then chosen), marginalized over the draw.

    Conditions on the focal's inclusion stage; the list total weight W is a
    function of the hypergeometric count of Good-rated providers among the
    stage-3 draws only. Scalar reference implementation; choice_grids is the
    vectorized equivalent.
    """
    _check_focal(focal, cfg)
    if users.k > cfg.z:
        raise ValidationError(["k exceeds the provider population size Z"])
    pol = effective_policy(cfg, users, policy)
    inc = inclusion_probability(focal, cfg, pol)
    k = users.k
    gamma = users.gamma
    khg, kr = pol.k_hat_g, pol.k_r
    t = cfg.z - khg          # stage-3 pool size
    g3 = cfg.z_g - khg       # Good-rated providers in the stage-3 pool

    # Focal shown during stages 1-2 (Good-rated focals only): weight 1,
    # composition count X ~ Hypergeom(t, g3, kr) independent of the focal.
    p_in12 = inc.stage1 + (1.0 - inc.stage1) * inc.stage2
    terms = []
    if p_in12 > 0.0:
        for x in range(max(0, kr - (t - g3)), min(kr, g3) + 1):
            w = _list_weight(khg + x, kr - x, gamma)
            inv = 1.0 / w if w > 0.0 else 1.0 / k
            terms.append(p_in12 * hypergeometric_pmf(t, g3, kr, x) * inv)

    # Focal shown at stage 3: condition on its slot, the other kr - 1 draws
    # come from the remaining t - 1 providers.
    p_not12 = (1.0 - inc.stage1) * (1.0 - inc.stage2)
    if p_not12 > 0.0 and inc.stage3 > 0.0:
        pref = p_not12 * inc.stage3
        if focal.rating == "G":
            marked = g3 - 1
            for y in range(max(0, (kr - 1) - (t - 1 - marked)), min(kr - 1, marked) + 1):
                w = _list_weight(khg + 1 + y, kr - 1 - y, gamma)
                terms.append(pref * hypergeometric_pmf(t - 1, marked, kr - 1, y) * (1.0 / w))
        else:
            for y in range(max(0, (kr - 1) - (t - 1 - g3)), min(kr - 1, g3) + 1):
                w = _list_weight(khg + y, kr - y, gamma)
                num = (1.0 - gamma) / w if w > 0.0 else 1.0 / k
                terms.append(pref * hypergeometric_pmf(t - 1, g3, kr - 1, y) * num)

    return math.fsum(terms)


def choice_table(cfg: RatingConfiguration, users: UserPopulation,
                 policy: PlatformPolicy) -> ChoiceProbabilityTable:
    """choice_probability for every present (group, rating) category.

    Absent categories map to None, never to a silent zero.
    """
    bad = cfg.problems()
    if bad:
        raise ValidationError(bad)
    probs: dict = {}
    incs: dict = {}
    pol = effective_policy(cfg, users, policy)
    for group in GROUPS:
        for rating in RATINGS:
            if cfg.count(group, rating) < 1:
                probs[(group, rating)] = None
                incs[(group, rating)] = None
                continue
            focal = FocalDescriptor(group=group, rating=rating)
            probs[(group, rating)] = choice_probability(focal, cfg, users, policy)
            incs[(group, rating)] = inclusion_probability(focal, cfg, pol)
    return ChoiceProbabilityTable(probabilities=probs, inclusions=incs, configuration=cfg)


def choice_grids(z_d: int, z_m: int, users: UserPopulation,
                 policy: PlatformPolicy) -> dict[str, np.ndarray]:
    """Choice probabilities for every rating configuration at once.

    Returns arrays of shape (z_d + 1, z_m + 1) indexed [Z_GD, Z_GM] under
    keys "MG", "DG", "B" (Bad-rated providers of either group share one
    value: they enter only through stage 3 with identical weight). Every
    cell is mechanically defined, including cells whose category is empty;
    consumers decide which cells are meaningful.
    """
    z = z_d + z_m
    k = users.k
    gamma = users.gamma
    if k > z:
        raise ValidationError(["k exceeds the provider population size Z"])

    zgd = np.arange(z_d + 1)[:, None]
    zgm = np.arange(z_m + 1)[None, :]
    zg = zgd + zgm
    khm = np.minimum(policy.k_m, zgm) * np.ones_like(zg)
    khg = np.minimum(policy.k_g, zg)
    kr = k - khg
    t = z - khg
    g3 = zg - khg

    with np.errstate(divide="ignore", invalid="ignore"):
        p1 = np.where(zgm > 0, khm / np.maximum(zgm, 1), 0.0)
        s2_draws = khg - khm
        s2_pool = zg - khm
        p2 = np.where(s2_draws > 0, s2_draws / np.maximum(s2_pool, 1), 0.0)
        p3 = np.where(kr > 0, kr / np.maximum(t, 1), 0.0)

    x = np.arange(k + 1)[None, None, :]
    krx = kr[:, :, None]
    tx = t[:, :, None]
    g3x = g3[:, :, None]
    uniform = 1.0 / k

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):

        def _pmf3(pool, marked, draws):
            logp = (
                log_binomial_coeff(marked, x)
                + log_binomial_coeff(pool - marked, draws - x)
                - log_binomial_coeff(pool, draws)
            )
            return np.where(np.isfinite(logp), np.exp(np.minimum(logp, 0.0)), 0.0)

        # Composition seen by a Good-rated focal shown during stages 1-2.
        pmf12 = _pmf3(tx, g3x, krx)
        w12 = khg[:, :, None] + x + (krx - x) * (1.0 - gamma)
        inv12 = np.where(w12 > 0, 1.0 / np.maximum(w12, 1e-300), uniform)
        e_in12 = np.einsum("ijx,ijx->ij", pmf12, inv12)

        # Good-rated focal drawn at stage 3 occupies one Good slot itself.
        valid_g3 = (krx >= 1) & (g3x >= 1)
        pmf_g = np.where(valid_g3, _pmf3(tx - 1, g3x - 1, krx - 1), 0.0)
        w_g = khg[:, :, None] + 1 + x + (krx - 1 - x) * (1.0 - gamma)
        inv_g = np.where(w_g > 0, 1.0 / np.maximum(w_g, 1e-300), 0.0)
        e_g3 = np.einsum("ijx,ijx->ij", pmf_g, inv_g)

        # Bad-rated focal drawn at stage 3 occupies one Bad slot itself.
        valid_b3 = krx >= 1
        pmf_b = np.where(valid_b3, _pmf3(tx - 1, g3x, krx - 1), 0.0)
        w_b = khg[:, :, None] + x + (krx - x) * (1.0 - gamma)
        num_b = np.where(w_b > 0, (1.0 - gamma) / np.maximum(w_b, 1e-300), uniform)
        e_b3 = np.einsum("ijx,ijx->ij", pmf_b, num_b)

    pin12_m = p1 + (1.0 - p1) * p2
    not12_m = (1.0 - p1) * (1.0 - p2)
    p_mg = pin12_m * e_in12 + not12_m * p3 * e_g3
    p_dg = p2 * e_in12 + (1.0 - p2) * p3 * e_g3
    p_b = p3 * e_b3
    return {"MG": p_mg, "DG": p_dg, "B": p_b}
