"""Brute-force oracles for the selection engine.

Everything here works on explicitly labeled providers and enumerates every
possible draw outcome with its probability — deliberately independent of the
conditioned hypergeometric expectations used by the engine under test.
"""

from fractions import Fraction
from itertools import combinations
from math import comb


def enumerate_choice_distribution(z_gd, z_gm, z_d, z_m, k, k_g, k_m, gamma):
    """Per-member choice probability for each (group, rating) category.

    Enumerates all (stage-1, stage-2, stage-3) subset triples of labeled
    providers, weights each by its uniform sampling probability, and applies
    the weighted-choice rule within each shown list. Returns a dict keyed by
    (group, rating) with values float or None for empty categories.
    """
    z = z_d + z_m
    categories = {}
    roster = []
    for label, count in (("MG", z_gm), ("MB", z_m - z_gm), ("DG", z_gd), ("DB", z_d - z_gd)):
        categories[label] = count
        roster.extend([label] * count)
    good = [i for i, lab in enumerate(roster) if lab.endswith("G")]
    good_m = [i for i, lab in enumerate(roster) if lab == "MG"]
    everyone = list(range(z))

    k_hat_m = min(k_m, z_gm)
    k_hat_g = min(k_g, z_gd + z_gm)
    k_r = k - k_hat_g

    chosen_mass = {lab: 0.0 for lab in categories}
    total_subsets = 0
    for s1 in combinations(good_m, k_hat_m):
        taken1 = set(s1)
        pool2 = [i for i in good if i not in taken1]
        for s2 in combinations(pool2, k_hat_g - k_hat_m):
            taken2 = taken1 | set(s2)
            pool3 = [i for i in everyone if i not in taken2]
            for s3 in combinations(pool3, k_r):
                total_subsets += 1
                shown = list(s1) + list(s2) + list(s3)
                weights = [1.0 if roster[i].endswith("G") else 1.0 - gamma for i in shown]
                total_w = sum(weights)
                for i, w in zip(shown, weights):
                    if total_w > 0.0:
                        chosen_mass[roster[i]] += w / total_w
                    else:
                        chosen_mass[roster[i]] += 1.0 / len(shown)

    prob1 = comb(z_gm, k_hat_m)
    prob2 = comb(len(good) - k_hat_m, k_hat_g - k_hat_m)
    prob3 = comb(z - k_hat_g, k_r)
    assert total_subsets == prob1 * prob2 * prob3
    n_outcomes = total_subsets

    out = {}
    for label, count in categories.items():
        key = (label[0], label[1])
        if count == 0:
            out[key] = None
        else:
            out[key] = chosen_mass[label] / n_outcomes / count
    return out


def single_stage_choice_distribution(z_gd, z_gm, z_d, z_m, k, gamma):
    """Same quantity for a plain one-stage uniform draw of k from everyone.

    Uses exact rational enumeration over list compositions; independent
    check for the degenerate k_g = k_m = 0 policy.
    """
    z = z_d + z_m
    z_g = z_gd + z_gm
    z_b = z - z_g
    gam = Fraction(gamma).limit_denominator(10**6)
    p_good = Fraction(0)
    p_bad = Fraction(0)
    denom = comb(z, k)
    for n_good in range(max(0, k - z_b), min(k, z_g) + 1):
        ways = comb(z_g, n_good) * comb(z_b, k - n_good)
        weight_total = n_good + (k - n_good) * (1 - gam)
        if weight_total > 0:
            per_good = Fraction(1) / weight_total
            per_bad = (1 - gam) / weight_total
        else:
            per_good = per_bad = Fraction(1, k)
        if z_g > 0:
            p_good += Fraction(ways, denom) * Fraction(n_good, z_g) * per_good
        if z_b > 0:
            p_bad += Fraction(ways, denom) * Fraction(k - n_good, z_b) * per_bad
    out = {}
    for group, rating, count in (("M", "G", z_gm), ("M", "B", z_m - z_gm),
                                 ("D", "G", z_gd), ("D", "B", z_d - z_gd)):
        if count == 0:
            out[(group, rating)] = None
        else:
            out[(group, rating)] = float(p_good if rating == "G" else p_bad)
    return out
