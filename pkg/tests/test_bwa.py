import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bwa_markov import bwa
from bwa_markov.chain import sample_path, sample_visit_counts, sample_visit_sign_counts
from bwa_markov.fixtures import affine_space, reference_chain, reference_space
from bwa_markov.noise import NoiseSpec, inject_noise
from bwa_markov.hypotheses import ClampedAffineSpace


@pytest.fixture
def chain():
    return reference_chain()


@pytest.fixture
def space():
    return reference_space()


class TestWeightState:
    def test_alpha_range_enforced(self, space):
        with pytest.raises(ValueError):
            bwa.WeightState(ids=space.ids, alpha=1.0, cumulative_loss=np.zeros(5), steps=0)
        with pytest.raises(ValueError):
            bwa.WeightState(ids=space.ids, alpha=0.0, cumulative_loss=np.zeros(5), steps=0)

    def test_initial_state_uniform_masses(self, space):
        st0 = bwa.initial_state(space, 0.5)
        assert bwa.posterior_masses(st0, space.prior) == pytest.approx(space.prior)

    def test_log_weights(self):
        st0 = bwa.WeightState(ids=("a", "b"), alpha=0.5, cumulative_loss=np.array([0.0, 2.0]), steps=2)
        assert st0.log_weights == pytest.approx([0.0, 2.0 * math.log(0.5)])


class TestNormalization:
    def test_weight_example(self):
        # weights (1, 0.125) against a uniform prior
        state = bwa.WeightState(ids=("a", "b"), alpha=0.5, cumulative_loss=np.array([0.0, 3.0]), steps=3)
        prior = np.array([0.5, 0.5])
        assert bwa.normalized_weights(state, prior) == pytest.approx([16.0 / 9.0, 2.0 / 9.0])
        assert bwa.posterior_masses(state, prior) == pytest.approx([8.0 / 9.0, 1.0 / 9.0])

    def test_masses_sum_to_one_far_underflow(self, space):
        # cumulative losses large enough that linear weights underflow
        state = bwa.WeightState(
            ids=space.ids,
            alpha=0.5,
            cumulative_loss=np.array([0.0, 2000.0, 4000.0, 6000.0, 8000.0]),
            steps=10000,
        )
        masses = bwa.posterior_masses(state, space.prior)
        assert masses.sum() == pytest.approx(1.0, abs=1e-12)
        assert masses[0] == pytest.approx(1.0, abs=1e-12)
        assert (masses[1:] >= 0).all()

    def test_zero_prior_stays_zero(self):
        state = bwa.WeightState(ids=("a", "b"), alpha=0.5, cumulative_loss=np.zeros(2), steps=0)
        prior = np.array([1.0, 0.0])
        assert bwa.normalized_weights(state, prior)[1] == 0.0
        assert bwa.posterior_masses(state, prior)[1] == 0.0

    def test_all_zero_prior_rejected(self):
        state = bwa.WeightState(ids=("a", "b"), alpha=0.5, cumulative_loss=np.zeros(2), steps=0)
        with pytest.raises(ValueError):
            bwa.posterior_masses(state, np.array([0.0, 0.0]))

    @settings(max_examples=40)
    @given(st.lists(st.floats(0.0, 500.0), min_size=3, max_size=3), st.floats(0.1, 0.9))
    def test_masses_always_normalized(self, losses, alpha):
        state = bwa.WeightState(
            ids=("a", "b", "c"), alpha=alpha, cumulative_loss=np.array(losses), steps=1
        )
        masses = bwa.posterior_masses(state, np.array([0.2, 0.3, 0.5]))
        assert masses.sum() == pytest.approx(1.0, abs=1e-9)
        assert (masses >= 0).all()


class TestTraining:
    def test_train_equals_repeated_update(self, chain, space):
        traj = sample_path(chain, 40, seed=13)
        state = bwa.initial_state(space, 0.6)
        for x, y in zip(traj.xs, traj.ys):
            state = bwa.update(state, space, x, float(y))
        batch = bwa.train(space, traj, 0.6)
        assert state.cumulative_loss == pytest.approx(batch.cumulative_loss, rel=1e-12)
        assert state.steps == batch.steps == 40

    def test_train_from_counts_matches_train(self, chain, space):
        for seed in (1, 2, 3):
            traj = sample_path(chain, 777, seed)
            counts = sample_visit_counts(chain, 777, seed, method="stream")
            a = bwa.train(space, traj, 0.5)
            b = bwa.train_from_counts(space, chain, counts, 0.5)
            assert a.cumulative_loss == pytest.approx(b.cumulative_loss, rel=1e-10)
            assert a.steps == b.steps

    def test_train_from_sign_counts_matches_noisy_path(self, chain, space):
        xi = 0.2
        for seed, nseed in ((3, 9), (12, 4)):
            traj = sample_path(chain, 600, seed)
            noisy = inject_noise(traj, NoiseSpec(xi=xi, kind="two_point", seed=nseed), space)
            a = bwa.train(space, noisy, 0.5)
            sc = sample_visit_sign_counts(chain, 600, seed, nseed, method="stream")
            b = bwa.train_from_sign_counts(space, chain, sc, 0.5, xi)
            assert a.cumulative_loss == pytest.approx(b.cumulative_loss, rel=1e-10)

    def test_loss_table_training(self, chain, space):
        from bwa_markov.hypotheses import loss_table

        counts = np.array([10, 20, 30, 40])
        a = bwa.train_from_counts(space, chain, counts, 0.5)
        b = bwa.train_from_loss_table(space, loss_table(space, chain), counts, 0.5)
        assert a.cumulative_loss == pytest.approx(b.cumulative_loss)


class TestNaiveEquivalence:
    def test_log_domain_matches_linear_products(self, chain, space):
        for seed in range(10):
            traj = sample_path(chain, 18, seed=seed)
            alpha = 0.3 + 0.05 * seed
            state = bwa.train(space, traj, alpha)
            masses = bwa.posterior_masses(state, space.prior)

            w = np.ones(space.size)
            for z, y in zip(traj.state_indices, traj.ys):
                w = w * alpha ** np.abs(space.predictions[:, z] - y)
            naive = w * space.prior
            naive = naive / naive.sum()
            assert masses == pytest.approx(naive, rel=1e-10)


class TestPrediction:
    def test_predict_within_hull(self, chain, space):
        traj = sample_path(chain, 100, seed=5)
        state = bwa.train(space, traj, 0.5)
        for x in chain.x_matrix():
            p = bwa.predict(state, space, x)
            col = space.predict_all(x)
            assert col.min() - 1e-12 <= p.value <= col.max() + 1e-12
            assert p.method == "exact"
            assert p.mc_error == 0.0

    def test_predict_values_matches_pointwise(self, chain, space):
        traj = sample_path(chain, 100, seed=5)
        state = bwa.train(space, traj, 0.5)
        vec = bwa.predict_values(state, space)
        for j, x in enumerate(chain.x_matrix()):
            assert vec[j] == pytest.approx(bwa.predict(state, space, x).value, rel=1e-12)

    def test_untrained_predict_is_prior_mean(self, space):
        state = bwa.initial_state(space, 0.5)
        p = bwa.predict(state, space, np.array([0.125]))
        assert p.value == pytest.approx(float(space.prior @ space.predictions[:, 0]))

    def test_training_concentrates_on_best(self, chain, space):
        traj = sample_path(chain, 5000, seed=3)
        state = bwa.train(space, traj, 0.5)
        masses = bwa.posterior_masses(state, space.prior)
        assert masses[0] > 0.95


class TestGridAndMcmc:
    def test_grid_degenerate_single_cell(self, chain):
        sp = affine_space()
        traj = sample_path(chain, 30, seed=2)
        one = bwa.predict_grid(sp, traj, 0.7, 0.4, n_slope=1, n_intercept=1)
        center = np.array([0.0, 0.5])
        assert one.value == pytest.approx(float(sp.evaluate(center, 0.4)))

    def test_grid_matches_exact_enumeration(self, chain):
        sp = affine_space()
        traj = sample_path(chain, 25, seed=6)
        params = sp.grid_params(9, 9)
        xs = traj.xs.ravel()
        logw = np.array(
            [
                math.log(0.7) * float(np.abs(sp.evaluate(p, xs) - traj.ys).sum())
                for p in params
            ]
        )
        w = np.exp(logw - logw.max())
        w /= w.sum()
        expect = float(w @ sp.evaluate(params, 0.3))
        got = bwa.predict_grid(sp, traj, 0.7, 0.3, n_slope=9, n_intercept=9)
        assert got.value == pytest.approx(expect, rel=1e-12)

    def test_mcmc_deterministic_per_seed(self, chain):
        sp = affine_space()
        traj = sample_path(chain, 40, seed=11)
        a = bwa.predict_mcmc(sp, traj, 0.7, 0.3, samples=400, burn_in=200, thin=2, seed=5)
        b = bwa.predict_mcmc(sp, traj, 0.7, 0.3, samples=400, burn_in=200, thin=2, seed=5)
        c = bwa.predict_mcmc(sp, traj, 0.7, 0.3, samples=400, burn_in=200, thin=2, seed=6)
        assert a.value == b.value
        assert a.value != c.value
        assert a.method == "mcmc"
        assert a.mc_error > 0.0
        assert 0.0 < a.acceptance_rate < 1.0

    def test_mcmc_close_to_grid(self, chain):
        sp = affine_space()
        traj = sample_path(chain, 40, seed=11)
        grid = bwa.predict_grid(sp, traj, 0.7, 0.6)
        mc = bwa.predict_mcmc(sp, traj, 0.7, 0.6, samples=2000, burn_in=1000, thin=5, seed=77)
        assert abs(mc.value - grid.value) <= 4.0 * max(mc.mc_error, 1e-6)

    def test_degenerate_box_exact(self, chain):
        sp = ClampedAffineSpace(slope_range=(0.5, 0.5), intercept_range=(0.2, 0.2))
        traj = sample_path(chain, 20, seed=1)
        p = bwa.predict_mcmc(sp, traj, 0.5, 0.4, samples=100, burn_in=10, thin=1, seed=0)
        assert p.method == "exact"
        assert p.value == pytest.approx(0.5 * 0.4 + 0.2)

    def test_mcmc_rejects_bad_arguments(self, chain):
        sp = affine_space()
        traj = sample_path(chain, 20, seed=1)
        with pytest.raises(ValueError):
            bwa.predict_mcmc(sp, traj, 0.5, 0.4, samples=1)
        with pytest.raises(ValueError):
            bwa.predict_mcmc(sp, traj, 0.5, 0.4, thin=0)


class TestWeightsIO:
    def test_round_trip(self, chain, space, tmp_path):
        traj = sample_path(chain, 64, seed=9)
        state = bwa.train(space, traj, 0.5)
        path = tmp_path / "weights.csv"
        bwa.write_weights(state, space.prior, path)
        again = bwa.read_weights(path, 0.5)
        assert again.ids == state.ids
        assert again.cumulative_loss == pytest.approx(state.cumulative_loss, rel=1e-15)
        assert bwa.posterior_masses(again, space.prior) == pytest.approx(
            bwa.posterior_masses(state, space.prior), rel=1e-12
        )

    def test_header_checked(self, tmp_path):
        path = tmp_path / "weights.csv"
        path.write_text("wrong,header\n1,2\n")
        with pytest.raises(ValueError):
            bwa.read_weights(path, 0.5)
