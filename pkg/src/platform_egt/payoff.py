"""Expected per-provider utility: payoff times exact choice probability.

A provider's utility is pi(s) = b - c*1{s=H} multiplied by the probability
of being the chosen provider for an interaction opportunity, averaged over
the randomness of the ratings: dominant providers are rated by their action
(H -> Good, L -> Bad) while each marginalised H-player is rated Good only
with probability 1 - epsilon, so the Good-rated marginalised count is a
binomial mixture.

Focal conditioning modes:

  exact  (default) the focal's own rating is drawn first and counted into
         the rating configuration, and the binomial runs over the *other*
         marginalised H-players ("one partner is already accounted for").
  naive  the binomial runs over all h_M marginalised H-players regardless of
         the focal, exactly as the utility expression types out; mixture
         terms whose configuration cannot contain the focal contribute zero.

At boundary states where a (group, strategy) category is empty, utilities
are still defined through the displacement convention: the focal
hypothetically takes the place of one opposite-strategy member of its own
group. Those values feed the imitation rule but are always multiplied by
zero in the transition matrix.
"""

from __future__ import annotations

import math

import numpy as np

from .domain import ModelConfig, State, ValidationError
from .exactprob import binomial_pmf, binomial_pmf_table
from .recsel import (FocalDescriptor, RatingConfiguration, choice_grids,
                     choice_probability)

STRATEGIES = ("H", "L")


def rating_probability(group: str, strategy: str, epsilon: float) -> float:
    """Probability of being rated Good after an interaction."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError(["epsilon must lie in [0, 1]"])
    if strategy == "L":
        return 0.0
    if strategy == "H":
        return 1.0 - epsilon if group == "M" else 1.0
    raise ValidationError([f"invalid strategy {strategy!r}"])


def gm_mixture(state: State, focal: tuple, epsilon: float,
               z_m: int, mode: str = "exact") -> np.ndarray:
    """Mass over the Good-rated marginalised count, indexed 0..z_m.

    focal is a (group, strategy, rating) triple consistent with the state;
    in exact mode a marginalised focal is removed from (and, when rated
    Good, re-added to) the binomial.
    """
    group, strategy, rating = focal
    if rating == "G" and strategy == "L":
        raise ValidationError(["an L-player cannot be rated Good"])
    if not 0 <= state.h_m <= z_m:
        raise ValidationError(["state outside the lattice"])
    count_needed = state.h_m if strategy == "H" else z_m - state.h_m
    if group == "M" and count_needed < 1:
        raise ValidationError(
            [f"focal (M, {strategy}) has no member at state h_m={state.h_m}"]
        )
    out = np.zeros(z_m + 1)
    if mode == "naive" or group == "D":
        out[: state.h_m + 1] = binomial_pmf(state.h_m, 1.0 - epsilon, np.arange(state.h_m + 1))
        return out
    if mode != "exact":
        raise ValidationError([f"unknown focal conditioning mode {mode!r}"])
    if strategy == "H":
        others = state.h_m - 1
        pmf = binomial_pmf(others, 1.0 - epsilon, np.arange(others + 1))
        if rating == "G":
            out[1: others + 2] = pmf
        else:
            out[: others + 1] = pmf
    else:
        out[: state.h_m + 1] = binomial_pmf(state.h_m, 1.0 - epsilon, np.arange(state.h_m + 1))
    return out


def _focal_plan(group: str, strategy: str, state: State, config: ModelConfig):
    """(other_mh, z_gd) under the displacement convention."""
    z_m, z_d = config.population.z_m, config.population.z_d
    if group == "M":
        other_mh = max(state.h_m - 1, 0) if strategy == "H" else min(state.h_m, z_m - 1)
        z_gd = state.h_d
    else:
        other_mh = state.h_m
        z_gd = max(state.h_d, 1) if strategy == "H" else min(state.h_d, z_d - 1)
    return other_mh, z_gd


def utility(group: str, strategy: str, state: State, config: ModelConfig) -> float:
    """Expected utility of one provider at one state. Scalar reference path;
    utility_grids is the vectorized equivalent used by the dynamics."""
    if group not in ("M", "D") or strategy not in STRATEGIES:
        raise ValidationError([f"invalid focal ({group}, {strategy})"])
    pop = config.population
    if not (0 <= state.h_m <= pop.z_m and 0 <= state.h_d <= pop.z_d):
        raise ValidationError(["state outside the lattice"])
    users = config.users
    policy = config.policy
    eps = users.epsilon
    pi = config.economics.b - (config.economics.c if strategy == "H" else 0.0)

    def p_cat(focal_rating: str, z_gd: int, z_gm: int) -> float:
        cfg = RatingConfiguration(z_gd=z_gd, z_gm=z_gm, z_d=pop.z_d, z_m=pop.z_m)
        return choice_probability(FocalDescriptor(group, focal_rating), cfg, users, policy)

    if config.focal_conditioning == "naive":
        # Mixture terms whose configuration cannot contain the focal
        # contribute zero (the literal expression is partial there).
        def p_cat_or_zero(focal_rating: str, z_gd: int, z_gm: int) -> float:
            cfg = RatingConfiguration(z_gd=z_gd, z_gm=z_gm, z_d=pop.z_d, z_m=pop.z_m)
            if cfg.count(group, focal_rating) < 1:
                return 0.0
            return choice_probability(FocalDescriptor(group, focal_rating), cfg, users, policy)

        weights = binomial_pmf(state.h_m, 1.0 - eps, np.arange(state.h_m + 1))
        p_good = rating_probability(group, strategy, eps)
        total = 0.0
        for z, w in enumerate(weights):
            if w == 0.0:
                continue
            term = 0.0
            if p_good > 0.0:
                term += p_good * p_cat_or_zero("G", state.h_d, z)
            if p_good < 1.0:
                term += (1.0 - p_good) * p_cat_or_zero("B", state.h_d, z)
            total += w * term
        return pi * total

    other_mh, z_gd = _focal_plan(group, strategy, state, config)
    weights = binomial_pmf(other_mh, 1.0 - eps, np.arange(other_mh + 1))
    terms = []
    if group == "M" and strategy == "H":
        for z, w in enumerate(weights):
            if w == 0.0:
                continue
            if eps < 1.0:
                terms.append(w * (1.0 - eps) * p_cat("G", z_gd, z + 1))
            if eps > 0.0:
                terms.append(w * eps * p_cat("B", z_gd, z))
    elif group == "M":
        for z, w in enumerate(weights):
            if w > 0.0:
                terms.append(w * p_cat("B", z_gd, z))
    elif strategy == "H":
        for z, w in enumerate(weights):
            if w > 0.0:
                terms.append(w * p_cat("G", z_gd, z))
    else:
        for z, w in enumerate(weights):
            if w > 0.0:
                terms.append(w * p_cat("B", z_gd, z))
    return pi * math.fsum(terms)


def utility_grids(config: ModelConfig) -> dict[str, np.ndarray]:
    """u(g, s) for every lattice state, keyed "MH", "ML", "DH", "DL".

    Arrays are shaped (Z_M + 1, Z_D + 1) and indexed [h_m, h_d].
    """
    pop = config.population
    users = config.users
    z_m, z_d = pop.z_m, pop.z_d
    eps = users.epsilon
    b, c = config.economics.b, config.economics.c

    grids = choice_grids(z_d, z_m, users, config.policy)
    p_mg, p_dg, p_b = grids["MG"], grids["DG"], grids["B"]
    bn = binomial_pmf_table(z_m, 1.0 - eps)   # rows m, cols z

    h_m = np.arange(z_m + 1)
    h_d = np.arange(z_d + 1)

    if config.focal_conditioning == "naive":
        # Zero out cells whose category cannot contain the focal.
        p_mg_n = p_mg.copy()
        p_mg_n[:, 0] = 0.0
        p_dg_n = p_dg.copy()
        p_dg_n[0, :] = 0.0
        p_b_m = p_b.copy()
        p_b_m[:, z_m] = 0.0
        p_b_d = p_b.copy()
        p_b_d[z_d, :] = 0.0
        u_mh = (b - c) * ((1.0 - eps) * (bn @ p_mg_n.T) + eps * (bn @ p_b_m.T))
        u_ml = b * (bn @ p_b_m.T)
        u_dh = (b - c) * (bn @ p_dg_n.T)
        u_dl = b * (bn @ p_b_d.T)
        return {"MH": u_mh, "ML": u_ml, "DH": u_dh, "DL": u_dl}

    # (M, H): binomial over the other h_m - 1 H-players; the focal's own
    # rating shifts the Good-rated count by one on the Good branch.
    bm = bn[np.maximum(h_m - 1, 0)]
    good_part = bm[:, :z_m] @ p_mg[:, 1:].T
    bad_part = bm @ p_b.T
    u_mh = (b - c) * ((1.0 - eps) * good_part + eps * bad_part)

    bl = bn[np.minimum(h_m, z_m - 1)]
    u_ml = b * (bl @ p_b.T)

    u_dh = (b - c) * (bn @ p_dg[np.maximum(h_d, 1)].T)
    u_dl = b * (bn @ p_b[np.minimum(h_d, z_d - 1)].T)
    return {"MH": u_mh, "ML": u_ml, "DH": u_dh, "DL": u_dl}
