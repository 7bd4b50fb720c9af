import numpy as np
import pytest

from platform_egt.domain import (ModelConfig, PlatformPolicy,
                                 ProviderPopulation, UserPopulation)
from platform_egt.dynamics import (SolverError, drift_field, fermi,
                                   stationary, transition_matrix)
from platform_egt.exactprob import binomial_pmf


def make_config(z_d=6, z_m=6, epsilon=0.3, gamma=0.6, k=4, k_g=2, k_m=0, **kw):
    cfg = ModelConfig(
        population=ProviderPopulation(z_d=z_d, z_m=z_m),
        users=UserPopulation(epsilon=epsilon, gamma=gamma, k=k),
        policy=PlatformPolicy(k_g=k_g, k_m=k_m),
    )
    return cfg.with_params(**kw) if kw else cfg


def ehrenfest_product(z_m, z_d):
    bm = binomial_pmf(z_m, 0.5, np.arange(z_m + 1))
    bd = binomial_pmf(z_d, 0.5, np.arange(z_d + 1))
    return np.outer(bm, bd).ravel()


class TestFermi:
    def test_indifference(self):
        assert fermi(0.0, 7.0) == (0.5, 0.5)

    def test_neutral_drift(self):
        assert fermi(0.123, 0.0) == (0.5, 0.5)

    def test_saturation_no_overflow(self):
        f_plus, f_minus = fermi(1.0, 50.0)
        assert f_plus == pytest.approx(1.0, abs=1e-15)
        assert f_minus == pytest.approx(0.0, abs=1e-15)
        f_plus, f_minus = fermi(-1e6, 1e6)
        assert f_plus == 0.0 and f_minus == 1.0

    @pytest.mark.parametrize("delta", [-3.0, -0.5, 0.0, 0.01, 2.5])
    @pytest.mark.parametrize("beta", [0.0, 1.0, 20.0, 500.0])
    def test_complementarity_exact(self, delta, beta):
        f_plus, f_minus = fermi(delta, beta)
        assert f_plus + f_minus == 1.0

    def test_literal_mode_flips(self):
        std = fermi(0.4, 10.0, sign_mode="standard")
        lit = fermi(0.4, 10.0, sign_mode="literal")
        assert std[0] == pytest.approx(lit[1])
        assert std[0] > 0.5 > lit[0]


class TestTransitionMatrix:
    @pytest.mark.parametrize("mu", [0.01, 0.025, 0.5, 1.0])
    def test_row_stochastic(self, mu):
        tm = transition_matrix(make_config(mu=mu))
        sums = np.asarray(tm.matrix.sum(axis=1)).ravel()
        assert np.abs(sums - 1.0).max() < 1e-12
        assert tm.matrix.data.min() >= 0.0

    def test_neighbor_only_sparsity(self):
        cfg = make_config()
        tm = transition_matrix(cfg)
        n_d = cfg.population.z_d + 1
        coo = tm.matrix.tocoo()
        for r, c in zip(coo.row, coo.col):
            assert abs(int(r) - int(c)) in (0, 1, n_d)
        per_row = np.diff(tm.matrix.tocsr().indptr)
        assert per_row.max() <= 5

    def test_pure_mutation_rates(self):
        cfg = make_config(mu=1.0)
        tm = transition_matrix(cfg)
        z = cfg.population.z
        # P((h_m, h_d) -> (h_m, h_d + 1)) = (Z_D - h_d) / Z, and so on.
        assert tm.up_d[0, 0] == pytest.approx(cfg.population.z_d / z)
        assert tm.down_d[0, 3] == pytest.approx(3 / z)
        assert tm.up_m[2, 1] == pytest.approx((cfg.population.z_m - 2) / z)

    def test_no_incentives_drift_down_interior(self):
        # Without ratings the utility gap is exactly -c/Z for every state.
        cfg = make_config(z_d=20, z_m=20, epsilon=0.3, gamma=0.0, k=10,
                          k_g=0, k_m=0)
        d_m, d_d = drift_field(cfg)
        assert np.all(d_m[1:, :] < 0.0)
        assert np.all(d_d[:, 1:] < 0.0)


class TestStationary:
    def test_ehrenfest_limit(self):
        cfg = make_config(z_d=4, z_m=4, k=3, mu=1.0)
        res = stationary(transition_matrix(cfg))
        assert np.abs(res.distribution - ehrenfest_product(4, 4)).max() < 1e-8

    def test_ehrenfest_limit_unequal_groups(self):
        cfg = make_config(z_d=6, z_m=3, k=3, mu=1.0)
        res = stationary(transition_matrix(cfg))
        assert np.abs(res.distribution - ehrenfest_product(3, 6)).max() < 1e-8

    def test_two_by_two_symmetric(self):
        # Smallest legal groups, no bias, no quota: transpose symmetry.
        cfg = make_config(z_d=2, z_m=2, epsilon=0.0, gamma=0.5, k=2, k_g=1)
        res = stationary(transition_matrix(cfg))
        h = res.distribution.reshape(3, 3)
        assert np.abs(h - h.T).max() < 1e-10

    def test_residual_and_normalization(self):
        cfg = make_config()
        res = stationary(transition_matrix(cfg))
        assert res.residual < 1e-10
        assert res.distribution.sum() == pytest.approx(1.0, abs=1e-10)
        assert res.distribution.min() >= 0.0

    def test_reducible_chain_rejected(self):
        cfg = make_config(mu=0.0)
        tm = transition_matrix(cfg)
        with pytest.raises(SolverError, match="mu = 0"):
            stationary(tm)

    def test_transpose_symmetry_without_bias(self):
        cfg = make_config(z_d=6, z_m=6, epsilon=0.0, gamma=0.6, k=4, k_g=2, k_m=0)
        res = stationary(transition_matrix(cfg))
        h = res.distribution.reshape(7, 7)
        assert np.abs(h - h.T).max() < 1e-8


class TestDriftField:
    def test_pure_mutation_closed_form(self):
        cfg = make_config(z_d=5, z_m=4, k=3, mu=1.0)
        d_m, d_d = drift_field(cfg)
        z = cfg.population.z
        h_m = np.arange(5)[:, None]
        h_d = np.arange(6)[None, :]
        assert d_m == pytest.approx((4 - 2 * h_m) / z * np.ones((5, 6)))
        assert d_d == pytest.approx((5 - 2 * h_d) / z * np.ones((5, 6)))
        assert d_m[2, 3] == 0.0  # lattice center is a fixed point

    def test_symmetry_under_group_swap(self):
        cfg = make_config(z_d=5, z_m=5, epsilon=0.0, gamma=0.7, k=4, k_g=2, k_m=0)
        d_m, d_d = drift_field(cfg)
        assert np.abs(d_m - d_d.T).max() < 1e-12
