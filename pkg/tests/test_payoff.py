import numpy as np
import pytest

from platform_egt.domain import (ModelConfig, PlatformPolicy,
                                 ProviderPopulation, State, UserPopulation,
                                 ValidationError)
from platform_egt.payoff import (gm_mixture, rating_probability, utility,
                                 utility_grids)


def make_config(z_d=4, z_m=4, epsilon=0.3, gamma=0.6, k=4, k_g=2, k_m=1,
                b=1.2, c=1.0, **kw):
    return ModelConfig(
        population=ProviderPopulation(z_d=z_d, z_m=z_m),
        users=UserPopulation(epsilon=epsilon, gamma=gamma, k=k),
        policy=PlatformPolicy(k_g=k_g, k_m=k_m),
    ).with_params(b=b, c=c, **kw)


class TestRatingProbability:
    def test_dominant_high_effort(self):
        assert rating_probability("D", "H", 0.3) == 1.0

    def test_marginalised_high_effort(self):
        assert rating_probability("M", "H", 0.3) == pytest.approx(0.7)

    def test_low_effort_never_good(self):
        assert rating_probability("M", "L", 0.3) == 0.0
        assert rating_probability("D", "L", 0.9) == 0.0

    def test_epsilon_bounds(self):
        with pytest.raises(ValidationError):
            rating_probability("M", "H", 1.2)


class TestGmMixture:
    def test_no_marginalised_h_players(self):
        mass = gm_mixture(State(0, 2), ("D", "L", "B"), 0.4, z_m=4)
        assert mass[0] == 1.0
        assert mass.sum() == pytest.approx(1.0)

    def test_focal_only_candidate(self):
        mass = gm_mixture(State(1, 0), ("M", "H", "G"), 0.4, z_m=4)
        assert mass[1] == 1.0

    def test_dominant_focal_binomial(self):
        mass = gm_mixture(State(2, 1), ("D", "H", "G"), 0.5, z_m=4)
        assert mass[:3] == pytest.approx([0.25, 0.5, 0.25])

    def test_exact_shifts_on_focal_rating(self):
        good = gm_mixture(State(3, 1), ("M", "H", "G"), 0.25, z_m=4)
        bad = gm_mixture(State(3, 1), ("M", "H", "B"), 0.25, z_m=4)
        assert good[1:4] == pytest.approx(bad[0:3])
        assert good[0] == 0.0

    def test_naive_ignores_focal(self):
        naive_g = gm_mixture(State(3, 1), ("M", "H", "G"), 0.25, z_m=4, mode="naive")
        naive_b = gm_mixture(State(3, 1), ("M", "H", "B"), 0.25, z_m=4, mode="naive")
        assert naive_g == pytest.approx(naive_b)

    def test_inconsistent_focal_rejected(self):
        with pytest.raises(ValidationError):
            gm_mixture(State(0, 2), ("M", "H", "G"), 0.4, z_m=4)
        with pytest.raises(ValidationError):
            gm_mixture(State(4, 2), ("M", "L", "B"), 0.4, z_m=4)
        with pytest.raises(ValidationError):
            gm_mixture(State(2, 2), ("M", "L", "G"), 0.4, z_m=4)


class TestUtility:
    def test_uniform_limit(self):
        # No policy, indifferent users: everyone is chosen w.p. 1/Z.
        cfg = make_config(epsilon=0.5, gamma=0.0, k_g=0, k_m=0)
        z = cfg.population.z
        for h_m in range(5):
            for h_d in range(5):
                st = State(h_m, h_d)
                assert utility("M", "H", st, cfg) == pytest.approx(0.2 / z, abs=1e-12)
                assert utility("D", "L", st, cfg) == pytest.approx(1.2 / z, abs=1e-12)

    def test_full_bias_high_effort_rated_bad(self):
        # epsilon = 1: a marginalised H-player is always rated Bad.
        cfg = make_config(epsilon=1.0)
        st = State(3, 2)
        u_h = utility("M", "H", st, cfg)
        # Equivalent computation: (b - c) times the Bad-focal choice
        # probability mixed over the other H-players (all rated Bad too).
        from platform_egt.recsel import (FocalDescriptor, RatingConfiguration,
                                         choice_probability)
        p = choice_probability(
            FocalDescriptor("M", "B"),
            RatingConfiguration(z_gd=2, z_gm=0, z_d=4, z_m=4),
            cfg.users, cfg.policy)
        assert u_h == pytest.approx(0.2 * p, abs=1e-12)

    def test_group_symmetry_on_diagonal(self):
        cfg = make_config(epsilon=0.0, gamma=0.55, k=5, k_g=3, k_m=0)
        for a in range(5):
            st = State(a, a)
            for s in ("H", "L"):
                assert utility("M", s, st, cfg) == \
                    pytest.approx(utility("D", s, st, cfg), abs=1e-12)

    def test_group_relabeling_invariance(self):
        # Swapping groups together with sizes and counts is a no-op at eps=0.
        cfg = make_config(z_d=5, z_m=3, epsilon=0.0, gamma=0.4, k=4, k_g=2, k_m=0)
        swapped = make_config(z_d=3, z_m=5, epsilon=0.0, gamma=0.4, k=4, k_g=2, k_m=0)
        for h_m in range(4):
            for h_d in range(6):
                for s in ("H", "L"):
                    assert utility("M", s, State(h_m, h_d), cfg) == \
                        pytest.approx(utility("D", s, State(h_d, h_m), swapped), abs=1e-12)

    def test_monotone_in_revenue(self):
        st = State(2, 3)
        values = [utility("M", "H", st, make_config(b=b)) for b in (1.1, 1.2, 1.4, 1.8)]
        assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))

    def test_bounded_by_revenue(self):
        cfg = make_config()
        for h_m in range(5):
            for h_d in range(5):
                for g in ("M", "D"):
                    for s in ("H", "L"):
                        u = utility(g, s, State(h_m, h_d), cfg)
                        assert 0.0 <= u <= cfg.economics.b

    def test_low_effort_earns_more_at_uniform(self):
        cfg = make_config(gamma=0.0, k_g=0, k_m=0)
        st = State(2, 2)
        assert utility("M", "L", st, cfg) > utility("M", "H", st, cfg)


class TestUtilityGrids:
    @pytest.mark.parametrize("mode", ["exact", "naive"])
    @pytest.mark.parametrize("epsilon", [0.0, 0.3, 1.0])
    def test_grids_match_scalar(self, mode, epsilon):
        cfg = make_config(epsilon=epsilon, focal_conditioning=mode)
        grids = utility_grids(cfg)
        for h_m in range(5):
            for h_d in range(5):
                st = State(h_m, h_d)
                for key, (g, s) in [("MH", ("M", "H")), ("ML", ("M", "L")),
                                    ("DH", ("D", "H")), ("DL", ("D", "L"))]:
                    assert grids[key][h_m, h_d] == \
                        pytest.approx(utility(g, s, st, cfg), abs=1e-13), (key, h_m, h_d)

    def test_modes_differ_somewhere(self):
        exact = utility_grids(make_config(focal_conditioning="exact"))
        naive = utility_grids(make_config(focal_conditioning="naive"))
        assert np.max(np.abs(exact["MH"] - naive["MH"])) > 1e-6

    def test_low_effort_identical_across_modes_at_interior(self):
        exact = utility_grids(make_config(focal_conditioning="exact"))
        naive = utility_grids(make_config(focal_conditioning="naive"))
        # The conventions only disagree at the full-cooperation edge.
        assert exact["ML"][:4, :] == pytest.approx(naive["ML"][:4, :], abs=1e-14)


class TestFrozenOracleAnchors:
    # Mean payoff and standard error from the event-level simulator at
    # 10^7 episodes (seed 777001): cooperative corner state (20, 20) of the
    # default economy with k=10, k_g=10, k_m=0, gamma=0.6, epsilon=0.3.
    FROZEN = {
        ("M", "H"): (0.004090859999999999, 8.952300623082312e-06),
        ("M", "L"): (0.0, 0.0),
        ("D", "H"): (0.005908359999999999, 1.0708703386079938e-05),
        ("D", "L"): (0.0, 0.0),
    }

    def test_exact_engine_within_four_sigma(self):
        cfg = ModelConfig(users=UserPopulation(epsilon=0.3, gamma=0.6, k=10),
                          policy=PlatformPolicy(k_g=10, k_m=0))
        st = State(20, 20)
        for (g, s), (mean, se) in self.FROZEN.items():
            u = utility(g, s, st, cfg)
            if se == 0.0:
                assert u == pytest.approx(mean, abs=1e-12)
            else:
                assert abs(u - mean) <= 4.0 * se, (g, s, u, mean)

    @pytest.mark.slow
    def test_regenerate_anchors(self):
        # Full regeneration of the frozen values; slow (10^7 episodes each).
        from platform_egt.oracle import simulate_utility
        cfg = ModelConfig(users=UserPopulation(epsilon=0.3, gamma=0.6, k=10),
                          policy=PlatformPolicy(k_g=10, k_m=0))
        st = State(20, 20)
        for (g, s), (mean, se) in self.FROZEN.items():
            run = simulate_utility(st, g, s, cfg, episodes=10**7, seed=777001, threads=4)
            assert run.payoff_mean == mean
            assert run.payoff_se == se
