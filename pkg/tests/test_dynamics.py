import numpy as np
import pytest

from asymdynkin.core import RandomDevice
from asymdynkin.dynamics import (
    DiffusionModel,
    analytic_generator,
    generator_check,
    model_from_dict,
    parse_expression,
    psi_from_innovation,
    simulate_filter_paths,
    simulate_regime_paths,
    standard_test_functions,
)
from asymdynkin.dynamics.simulate import filter_self_convergence


def const(c):
    return lambda x: c * np.ones_like(np.asarray(x, dtype=float))


@pytest.fixture
def model():
    return DiffusionModel(
        mu0=const(-0.4), mu1=const(0.4), sigma=const(0.5),
        x0=0.0, prior=0.5, horizon=1.0, domain=(-4.0, 4.0),
    )


class TestExpressionGrammar:
    def test_affine_and_tanh(self):
        fn = parse_expression("0.5*tanh(2*x) - 0.1*x + 1")
        x = np.array([-1.0, 0.0, 2.0])
        np.testing.assert_allclose(fn(x), 0.5 * np.tanh(2 * x) - 0.1 * x + 1)

    def test_unary_minus_and_parens(self):
        fn = parse_expression("-(x - 1) * 2")
        np.testing.assert_allclose(fn(np.array([0.0, 3.0])), [2.0, -4.0])

    def test_rejects_unknown_tokens(self):
        with pytest.raises(ValueError):
            parse_expression("__import__('os')")
        with pytest.raises(ValueError):
            parse_expression("x / 2")

    def test_model_from_dict(self):
        m = model_from_dict(
            {"mu0": "-0.2", "mu1": "0.2", "sigma": "0.3 + 0.1*tanh(x)",
             "x0": 0.5, "pi": 0.25, "T": 2.0, "domain": [-3, 3]}
        )
        assert m.prior == 0.25
        assert m.w(0.0) == pytest.approx(0.4 / 0.3)


class TestFilterSimulation:
    def test_psi_constant_when_drifts_match(self):
        flat = DiffusionModel(
            mu0=const(0.1), mu1=const(0.1), sigma=const(0.5),
            x0=0.0, prior=0.3, horizon=1.0, domain=(-4, 4),
        )
        b = simulate_filter_paths(flat, 200, 1e-2, RandomDevice(1))
        assert np.all(b.psi == 0.3)

    def test_absorbing_prior_one(self):
        m = DiffusionModel(
            mu0=const(-0.4), mu1=const(0.4), sigma=const(0.5),
            x0=0.0, prior=1.0, horizon=1.0, domain=(-4, 4),
        )
        b = simulate_filter_paths(m, 100, 1e-2, RandomDevice(2))
        assert np.all(b.psi == 1.0)

    def test_psi_is_bounded_martingale(self, model):
        n = 100_000
        b = simulate_filter_paths(model, n, 1e-2, RandomDevice(3))
        assert b.psi.min() >= 0.0 and b.psi.max() <= 1.0
        se = b.psi[:, -1].std(ddof=1) / np.sqrt(n)
        assert abs(b.psi[:, -1].mean() - model.prior) <= 4 * se
        # pre-clamp excursions past the absorbing boundaries stay O(dt)-small
        assert b.max_clamp <= 10 * 1e-2

    def test_deterministic_given_seed(self, model):
        a = simulate_filter_paths(model, 50, 1e-2, RandomDevice(9))
        b = simulate_filter_paths(model, 50, 1e-2, RandomDevice(9))
        np.testing.assert_array_equal(a.x, b.x)


class TestRegimeSimulation:
    def test_regime_frequency(self, model):
        n = 50_000
        b = simulate_regime_paths(model, n, 1e-2, RandomDevice(4))
        freq = b.regime.mean()
        assert abs(freq - model.prior) <= 4 * np.sqrt(model.prior * (1 - model.prior) / n)

    def test_zero_signal_keeps_prior(self):
        flat = DiffusionModel(
            mu0=const(0.1), mu1=const(0.1), sigma=const(0.5),
            x0=0.0, prior=0.4, horizon=1.0, domain=(-4, 4),
        )
        b = simulate_regime_paths(flat, 200, 1e-2, RandomDevice(5))
        np.testing.assert_allclose(b.psi, 0.4, atol=1e-12)

    def test_measure_consistency_weighted_laws(self, model):
        # psi-weighted law of X under the regime simulation restricted to
        # {J=1} matches the prior-weighted reconstruction on test functionals
        n = 100_000
        b = simulate_regime_paths(model, n, 1e-2, RandomDevice(6))
        sel = b.regime == 1
        xT = b.x[:, -1]
        for fn in [
            np.tanh, np.cos, lambda v: np.clip(v, -1, 1),
            lambda v: np.exp(-np.abs(v)), lambda v: (v > 0).astype(float),
            lambda v: np.sin(2 * v), lambda v: 1.0 / (1.0 + v**2),
            lambda v: np.tanh(v) ** 2, lambda v: np.clip(v, -2, 2) ** 2 / 4,
            lambda v: np.abs(np.tanh(v / 2)),
        ]:
            lhs_vals = fn(xT) * b.psi[:, -1]
            rhs_vals = fn(xT) * sel
            diff = lhs_vals - rhs_vals
            se = diff.std(ddof=1) / np.sqrt(n)
            assert abs(diff.mean()) <= 4 * max(se, 1e-12)

    def test_self_convergence_of_the_two_posteriors(self, model):
        rms = filter_self_convergence(model, 1500, [4e-3, 2e-3, 1e-3], RandomDevice(7))
        assert rms[0] / rms[1] >= 1.2
        assert rms[1] / rms[2] >= 1.2

    def test_innovation_filter_tracks_likelihood_filter(self, model):
        b = simulate_regime_paths(model, 300, 1e-3, RandomDevice(8))
        psi_sde = psi_from_innovation(model, b.x, 1e-3)
        rms = np.sqrt(np.mean((psi_sde - b.psi) ** 2))
        assert rms <= 0.02


class TestGenerators:
    def test_degenerate_reduction_w_zero(self):
        flat = DiffusionModel(
            mu0=const(0.2), mu1=const(0.2), sigma=const(0.5),
            x0=0.0, prior=0.5, horizon=1.0, domain=(-4, 4),
        )
        phi = standard_test_functions()[0]  # phi = x
        val = analytic_generator(flat, phi, 0.5, 0.3, "observation")
        assert val == pytest.approx(0.2, abs=1e-14)
        mc, se = __import__("asymdynkin.dynamics.generators", fromlist=["mc_generator_drift"]).mc_generator_drift(
            flat, phi, 0.5, 0.3, "observation", 200_000, 1e-4, RandomDevice(10)
        )
        assert abs(mc - 0.2) <= 4 * se

    def test_boundary_absorption_regime0(self, model):
        # at pi = 0 the regime-0 generator is the plain 1-d generator
        phi = standard_test_functions()[2]  # x^2
        val = analytic_generator(model, phi, 0.0, 0.1, "regime-0")
        expected = -0.4 * 2 * 0.1 + 0.5 * 0.25 * 2.0
        assert val == pytest.approx(expected, abs=1e-14)

    def test_cross_term_probe(self, model):
        phi = standard_test_functions()[4]  # pi * x
        r = generator_check(model, phi, 0.5, 0.2, "observation", 400_000, 1e-4, RandomDevice(11))
        assert r["within_4se"]

    @pytest.mark.parametrize("mode", ["observation", "regime-0", "regime-1"])
    def test_all_modes_probe(self, model, mode):
        phi = standard_test_functions()[5]
        r = generator_check(model, phi, 0.4, -0.1, mode, 300_000, 1e-4, RandomDevice(12))
        assert r["within_4se"]
