"""Imitation dynamics: Fermi rule, transition matrix, stationary solve.

One provider updates per step: with probability mu it flips strategy,
otherwise it compares utility against a random same-group provider and
imitates with the logistic Fermi probability. The resulting chain lives on
the (h_M, h_D) lattice and moves only between lattice neighbours, so the
matrix is assembled sparsely (at most four neighbours plus a self-loop per
row) and the stationary distribution comes from one sparse factorization of
the balance system with a normalization row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import expit

from .domain import ModelConfig, ValidationError, validate
from .payoff import utility_grids

STATIONARY_RESIDUAL_TOL = 1e-10
POWER_ITERATION_CAP = 10**6


class SolverError(RuntimeError):
    """Stationary solve failed or its preconditions do not hold."""


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic chain over the strategy lattice plus its move fields.

    up_*/down_* hold the per-state probabilities of the four neighbour moves,
    indexed [h_m, h_d]; matrix is the assembled CSR operator.
    """

    matrix: sp.csr_matrix
    shape: tuple[int, int]
    up_m: np.ndarray
    down_m: np.ndarray
    up_d: np.ndarray
    down_d: np.ndarray
    mu: float


@dataclass(frozen=True)
class StationaryResult:
    distribution: np.ndarray
    residual: float
    drift_m: np.ndarray
    drift_d: np.ndarray
    method: str
    iterations: int


def fermi(delta_u: float, beta: float, sign_mode: str = "standard") -> tuple[float, float]:
    """(f_plus, f_minus) for one utility gap delta_u = u_H - u_L.

    standard: the H-count rises with probability expit(beta * (u_H - u_L)),
    so better-earning strategies are imitated. literal: the opposite sign
    convention. f_plus + f_minus = 1 exactly in both modes.
    """
    if beta < 0:
        raise ValidationError(["beta must be nonnegative"])
    if sign_mode == "standard":
        arg = beta * delta_u
    elif sign_mode == "literal":
        arg = -beta * delta_u
    else:
        raise ValidationError([f"unknown fermi sign mode {sign_mode!r}"])
    f_plus = float(expit(arg))
    return f_plus, 1.0 - f_plus


def transition_matrix(config: ModelConfig, grids: dict | None = None) -> TransitionMatrix:
    """Assemble the chain for one validated configuration.

    Mutation moves scale with the group share of the whole population;
    imitation pairs are sampled within the group (normalized by Z_g and
    Z_g - 1) and accepted with the Fermi probability at the pre-move state.
    """
    validate(config)
    pop = config.population
    z_m, z_d, z = pop.z_m, pop.z_d, pop.z
    mu = config.evolution.mu
    beta = config.evolution.beta
    sign = 1.0 if config.fermi_sign == "standard" else -1.0

    if grids is None:
        grids = utility_grids(config)
    f_m_plus = expit(sign * beta * (grids["MH"] - grids["ML"]))
    f_d_plus = expit(sign * beta * (grids["DH"] - grids["DL"]))

    h_m = np.arange(z_m + 1)[:, None].astype(float)
    h_d = np.arange(z_d + 1)[None, :].astype(float)

    pair_m = (z_m - h_m) * h_m / (z_m * (z_m - 1.0))
    pair_d = (z_d - h_d) * h_d / (z_d * (z_d - 1.0))
    up_m = mu * (z_m - h_m) / z + (1.0 - mu) * pair_m * f_m_plus
    down_m = mu * h_m / z + (1.0 - mu) * pair_m * (1.0 - f_m_plus)
    up_d = mu * (z_d - h_d) / z + (1.0 - mu) * pair_d * f_d_plus
    down_d = mu * h_d / z + (1.0 - mu) * pair_d * (1.0 - f_d_plus)
    up_m = np.broadcast_to(up_m, (z_m + 1, z_d + 1))
    down_m = np.broadcast_to(down_m, (z_m + 1, z_d + 1))
    up_d = np.broadcast_to(up_d, (z_m + 1, z_d + 1))
    down_d = np.broadcast_to(down_d, (z_m + 1, z_d + 1))

    n = (z_m + 1) * (z_d + 1)
    idx = (np.arange(n)).reshape(z_m + 1, z_d + 1)
    rows, cols, vals = [], [], []

    def add(mask, src, dst, val):
        rows.append(src[mask])
        cols.append(dst[mask])
        vals.append(val[mask])

    m_up_mask = np.broadcast_to(h_m < z_m, idx.shape)
    m_dn_mask = np.broadcast_to(h_m > 0, idx.shape)
    d_up_mask = np.broadcast_to(h_d < z_d, idx.shape)
    d_dn_mask = np.broadcast_to(h_d > 0, idx.shape)
    add(m_up_mask, idx, idx + (z_d + 1), up_m)
    add(m_dn_mask, idx, idx - (z_d + 1), down_m)
    add(d_up_mask, idx, idx + 1, up_d)
    add(d_dn_mask, idx, idx - 1, down_d)

    off = up_m * m_up_mask + down_m * m_dn_mask + up_d * d_up_mask + down_d * d_dn_mask
    diag = 1.0 - off
    add(np.ones_like(idx, dtype=bool), idx, idx, diag)

    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return TransitionMatrix(matrix=matrix, shape=(z_m + 1, z_d + 1),
                            up_m=up_m * m_up_mask, down_m=down_m * m_dn_mask,
                            up_d=up_d * d_up_mask, down_d=down_d * d_dn_mask,
                            mu=mu)


def _drift(tm: TransitionMatrix) -> tuple[np.ndarray, np.ndarray]:
    return tm.up_m - tm.down_m, tm.up_d - tm.down_d


def _power_iteration(p: sp.csr_matrix) -> tuple[np.ndarray, int]:
    """Cesaro-averaged power iteration fallback."""
    n = p.shape[0]
    v = np.full(n, 1.0 / n)
    avg = v.copy()
    pt = p.T.tocsr()
    for it in range(1, POWER_ITERATION_CAP + 1):
        v = pt @ v
        s = v.sum()
        if s <= 0:
            raise SolverError("power iteration lost probability mass")
        v /= s
        new_avg = (avg * it + v) / (it + 1)
        if it % 64 == 0:
            res = float(np.abs(pt @ new_avg - new_avg).sum())
            if res < STATIONARY_RESIDUAL_TOL:
                return new_avg, it
        avg = new_avg
    raise SolverError(
        f"power iteration did not reach residual {STATIONARY_RESIDUAL_TOL} "
        f"within {POWER_ITERATION_CAP} iterations"
    )


def stationary(tm: TransitionMatrix) -> StationaryResult:
    """Stationary distribution of the chain.

    Solves (P^T - I) h = 0 with one equation replaced by the normalization
    sum(h) = 1 through a direct sparse factorization; falls back to
    Cesaro-averaged power iteration if the factorization fails or leaves a
    residual above tolerance.
    """
    if tm.mu <= 0.0:
        raise SolverError(
            "chain is reducible: mu = 0 violates the irreducibility "
            "precondition of the stationary solve"
        )
    p = tm.matrix
    n = p.shape[0]
    a = (p.T - sp.identity(n, format="csr")).tolil()
    a[n - 1, :] = 1.0
    rhs = np.zeros(n)
    rhs[n - 1] = 1.0

    method = "direct"
    iterations = 1
    try:
        h = splu(a.tocsc()).solve(rhs)
    except RuntimeError:
        h = None
    if h is None or not np.all(np.isfinite(h)) or h.min() < -1e-8:
        h, iterations = _power_iteration(p)
        method = "power"
    h = np.clip(h, 0.0, None)
    h /= h.sum()
    residual = float(np.abs(p.T @ h - h).sum())
    if residual >= STATIONARY_RESIDUAL_TOL:
        h, iterations = _power_iteration(p)
        method = "power"
        h = np.clip(h, 0.0, None)
        h /= h.sum()
        residual = float(np.abs(p.T @ h - h).sum())
        if residual >= STATIONARY_RESIDUAL_TOL:
            raise SolverError(f"stationary residual {residual:.3e} above tolerance")
    drift_m, drift_d = _drift(tm)
    return StationaryResult(distribution=h, residual=residual, drift_m=drift_m,
                            drift_d=drift_d, method=method, iterations=iterations)


def drift_field(config: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """(E[dh_M], E[dh_D]) per state, indexed [h_m, h_d]."""
    tm = transition_matrix(config)
    return _drift(tm)
