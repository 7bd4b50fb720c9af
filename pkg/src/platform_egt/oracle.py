"""Seeded Monte Carlo simulator of the concrete four-step interaction.

Ground truth for the exact selection and utility engines: materializes a
provider roster, executes the three staged uniform draws without
replacement, applies the weighted choice, and tallies outcomes per episode.

Randomness contract: a counter-based generator (Philox) keyed by the run
seed, with episode chunk i consuming the counter window i << 128. Chunk
results are merged in index order, so any parallel schedule reproduces the
serial run bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import ModelConfig, PlatformPolicy, State, UserPopulation, ValidationError
from .recsel import GROUPS, RATINGS, RatingConfiguration

CHUNK_EPISODES = 1 << 15

_CATEGORIES = (("M", "G"), ("M", "B"), ("D", "G"), ("D", "B"))


@dataclass(frozen=True)
class OracleRun:
    """Tallies of one seeded simulation run.

    chosen_freq holds, per (group, rating), the fraction of episodes in which
    a member of that category was the chosen provider (they sum to 1 whenever
    a choice always occurs); shown_mean the mean number of members shown per
    episode. payoff_mean/payoff_se are filled by utility runs only.
    """

    seed: int
    episodes: int
    chosen_freq: dict = field(default_factory=dict)
    chosen_se: dict = field(default_factory=dict)
    shown_mean: dict = field(default_factory=dict)
    shown_se: dict = field(default_factory=dict)
    payoff_mean: float | None = None
    payoff_se: float | None = None


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=chunk << 128))


def _chunks(episodes: int) -> list[tuple[int, int]]:
    out = []
    start = 0
    idx = 0
    while start < episodes:
        n = min(CHUNK_EPISODES, episodes - start)
        out.append((idx, n))
        start += n
        idx += 1
    return out


def _map_chunks(worker, episodes: int, threads: int) -> list:
    chunks = _chunks(episodes)
    if threads <= 1 or len(chunks) == 1:
        return [worker(idx, n) for idx, n in chunks]
    results = [None] * len(chunks)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(worker, idx, n): i for i, (idx, n) in enumerate(chunks)}
        for fut, i in futures.items():
            results[i] = fut.result()
    return results


def _ranked_pick(keys: np.ndarray, take: np.ndarray) -> np.ndarray:
    """Boolean mask of the `take` smallest keys per row (take may vary)."""
    order = np.argsort(keys, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.broadcast_to(np.arange(keys.shape[1]), keys.shape), axis=1)
    return ranks < np.asarray(take).reshape(-1, 1)


def _weighted_choice(shown: np.ndarray, weights: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
    """Index of the chosen provider per episode; uniform fallback at W=0."""
    w = shown * weights
    totals = w.sum(axis=1)
    eff = np.where(totals[:, None] > 0.0, w, shown.astype(float))
    cum = np.cumsum(eff, axis=1)
    u = rng.random(eff.shape[0]) * cum[:, -1]
    return (cum > u[:, None]).argmax(axis=1)


def simulate_selection(cfg: RatingConfiguration, users: UserPopulation,
                       policy: PlatformPolicy, episodes: int, seed: int,
                       threads: int = 1) -> OracleRun:
    """Empirical choice/shown frequencies for a fixed rating configuration."""
    if episodes < 1:
        raise ValidationError(["episodes must be at least 1"])
    bad = cfg.problems()
    if bad:
        raise ValidationError(bad)
    if users.k > cfg.z:
        raise ValidationError(["k exceeds the provider population size Z"])

    z = cfg.z
    # Roster layout: [MG | MB | DG | DB], ratings fixed for the whole run.
    counts = {c: cfg.count(*c) for c in _CATEGORIES}
    cat_id = np.repeat(np.arange(4), [counts[c] for c in _CATEGORIES])
    good = np.zeros(z, dtype=bool)
    good[: counts[("M", "G")]] = True
    good[cfg.z_m: cfg.z_m + counts[("D", "G")]] = True
    good_idx = np.flatnonzero(good)
    weights = np.where(good, 1.0, 1.0 - users.gamma)

    k_hat_m = min(policy.k_m, cfg.z_gm)
    k_hat_g = min(policy.k_g, cfg.z_g)
    k_r = users.k - k_hat_g

    def worker(chunk_idx: int, n: int):
        rng = _chunk_rng(seed, chunk_idx)
        shown = np.zeros((n, z), dtype=bool)
        if cfg.z_gm > 0:
            keys1 = rng.random((n, cfg.z_gm))
            if k_hat_m > 0:
                shown[:, : cfg.z_gm] = _ranked_pick(keys1, np.full(n, k_hat_m))
        if good_idx.size > 0:
            keys2 = rng.random((n, good_idx.size)) + 2.0 * shown[:, good_idx]
            if k_hat_g - k_hat_m > 0:
                picks = _ranked_pick(keys2, np.full(n, k_hat_g - k_hat_m))
                rows, cols = np.nonzero(picks)
                shown[rows, good_idx[cols]] = True
        keys3 = rng.random((n, z)) + 2.0 * shown
        if k_r > 0:
            shown |= _ranked_pick(keys3, np.full(n, k_r))
        chosen = _weighted_choice(shown, weights, rng)
        chosen_counts = np.bincount(cat_id[chosen], minlength=4)
        shown_by_cat = np.stack([shown[:, cat_id == c].sum(axis=1) for c in range(4)])
        return chosen_counts, shown_by_cat.sum(axis=1), (shown_by_cat.astype(np.float64) ** 2).sum(axis=1)

    parts = _map_chunks(worker, episodes, threads)
    chosen_tot = np.zeros(4, dtype=np.int64)
    shown_s1 = np.zeros(4)
    shown_s2 = np.zeros(4)
    for cc, s1, s2 in parts:
        chosen_tot += cc
        shown_s1 += s1
        shown_s2 += s2

    chosen_freq, chosen_se, shown_mean, shown_se = {}, {}, {}, {}
    for c, cat in enumerate(_CATEGORIES):
        if counts[cat] == 0:
            chosen_freq[cat] = chosen_se[cat] = None
            shown_mean[cat] = shown_se[cat] = None
            continue
        p = chosen_tot[c] / episodes
        chosen_freq[cat] = p
        chosen_se[cat] = math.sqrt(max(p * (1.0 - p), 0.0) / episodes)
        m = shown_s1[c] / episodes
        var = max(shown_s2[c] / episodes - m * m, 0.0)
        shown_mean[cat] = m
        shown_se[cat] = math.sqrt(var / episodes)
    return OracleRun(seed=seed, episodes=episodes, chosen_freq=chosen_freq,
                     chosen_se=chosen_se, shown_mean=shown_mean, shown_se=shown_se)


def simulate_utility(state: State, group: str, strategy: str, config: ModelConfig,
                     episodes: int, seed: int, threads: int = 1) -> OracleRun:
    """Empirical mean payoff per interaction-opportunity for one focal.

    Simulates the physical process: draw each marginalised H-player's rating
    (Good with probability 1 - epsilon), build the list, choose, award
    b - c (H) or b (L) to the focal if chosen. Only the exact conditioning
    mode has event-level semantics; naive mode is rejected.
    """
    if episodes < 1:
        raise ValidationError(["episodes must be at least 1"])
    if config.focal_conditioning != "exact":
        raise ValidationError(
            ["simulate_utility requires focal_conditioning='exact'; the naive "
             "mode has no coherent event-level semantics"]
        )
    if group not in GROUPS or strategy not in ("H", "L"):
        raise ValidationError([f"invalid focal ({group}, {strategy})"])
    z_m, z_d = config.population.z_m, config.population.z_d
    if not (0 <= state.h_m <= z_m and 0 <= state.h_d <= z_d):
        raise ValidationError(["state outside the lattice"])

    users = config.users
    policy = config.policy
    z = z_m + z_d
    k = users.k
    payoff = config.economics.b - (config.economics.c if strategy == "H" else 0.0)

    # Roster layout: [M-segment | D-segment]. An empty focal category at a
    # boundary state is simulated by the displacement convention: the focal
    # takes the place of one opposite-strategy member of its own group.
    if group == "M":
        other_mh = max(state.h_m - 1, 0) if strategy == "H" else min(state.h_m, z_m - 1)
        focal_idx = 0 if strategy == "H" else other_mh
        z_gd = state.h_d
    else:
        other_mh = state.h_m
        if strategy == "H":
            good_d = max(state.h_d, 1)         # focal included, rated Good
            focal_idx = z_m
        else:
            good_d = min(state.h_d, z_d - 1)   # focal displaces one H-player
            focal_idx = z_m + good_d
        z_gd = good_d

    good_fixed = np.zeros(z, dtype=bool)
    good_fixed[z_m: z_m + z_gd] = True
    # Columns of the per-episode rating draw: Good with probability 1-eps.
    # M-segment layout puts H-players first (the focal leads when (M, H)).
    if group == "M" and strategy == "H":
        m_random = np.arange(other_mh + 1, dtype=np.int64)
    else:
        m_random = np.arange(other_mh, dtype=np.int64)

    def worker(chunk_idx: int, n: int):
        rng = _chunk_rng(seed, chunk_idx)
        good = np.broadcast_to(good_fixed, (n, z)).copy()
        if m_random.size > 0:
            flags = rng.random((n, m_random.size)) < (1.0 - users.epsilon)
            good[:, m_random] = flags
        z_gm = good[:, :z_m].sum(axis=1)
        k_hat_m = np.minimum(policy.k_m, z_gm)
        k_hat_g = np.minimum(policy.k_g, z_gm + z_gd)
        k_r = k - k_hat_g

        keys1 = rng.random((n, z)) + 2.0 * ~(good & (np.arange(z) < z_m))
        stage1 = _ranked_pick(keys1, k_hat_m)
        keys2 = rng.random((n, z)) + 2.0 * (~good | stage1)
        stage2 = _ranked_pick(keys2, k_hat_g - k_hat_m)
        shown = stage1 | stage2
        keys3 = rng.random((n, z)) + 2.0 * shown
        shown |= _ranked_pick(keys3, k_r)

        weights = np.where(good, 1.0, 1.0 - users.gamma)
        w = shown * weights
        totals = w.sum(axis=1)
        eff = np.where(totals[:, None] > 0.0, w, shown.astype(float))
        cum = np.cumsum(eff, axis=1)
        u = rng.random(n) * cum[:, -1]
        chosen = (cum > u[:, None]).argmax(axis=1)
        hits = int(np.count_nonzero(chosen == focal_idx))
        return hits

    parts = _map_chunks(worker, episodes, threads)
    hits = sum(parts)
    p = hits / episodes
    mean = payoff * p
    var = payoff * payoff * max(p * (1.0 - p), 0.0)
    return OracleRun(seed=seed, episodes=episodes, payoff_mean=mean,
                     payoff_se=math.sqrt(var / episodes))
