import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bwa_markov.chain import sample_path, stationary_distribution
from bwa_markov.fixtures import (
    affine_space,
    misleading_prior_space,
    reference_chain,
    reference_space,
)
from bwa_markov.hypotheses import (
    ClampedAffineSpace,
    FiniteTableSpace,
    SpaceCapacity,
    best_expected_loss,
    covering_number_bound,
    empirical_losses,
    estimate_best_loss,
    estimate_good_volume,
    expected_losses,
    good_volume,
    load_space,
    log_covering_bound,
    loss_constants,
    loss_l1,
    loss_table,
    save_space,
)


@pytest.fixture
def chain():
    return reference_chain()


@pytest.fixture
def space():
    return reference_space()


@pytest.fixture
def pi(chain):
    return stationary_distribution(chain).probabilities


def test_loss_l1_scalar_and_vector():
    assert loss_l1(0.3, 0.5) == pytest.approx(0.2)
    got = loss_l1(np.array([0.1, 0.9]), np.array([0.4, 0.4]))
    assert got == pytest.approx([0.3, 0.5])


class TestFiniteTableSpace:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            FiniteTableSpace(
                ids=("a", "a"),
                x_points=np.array([[0.0], [1.0]]),
                predictions=np.array([[0.1, 0.2], [0.3, 0.4]]),
                prior=np.array([0.5, 0.5]),
                y_range=(0.0, 1.0),
            )

    def test_prior_must_sum_to_one(self):
        with pytest.raises(ValueError):
            FiniteTableSpace(
                ids=("a", "b"),
                x_points=np.array([[0.0], [1.0]]),
                predictions=np.array([[0.1, 0.2], [0.3, 0.4]]),
                prior=np.array([0.5, 0.6]),
                y_range=(0.0, 1.0),
            )

    def test_predictions_clamped(self):
        space = FiniteTableSpace(
            ids=("a",),
            x_points=np.array([[0.0], [1.0]]),
            predictions=np.array([[-0.5, 1.5]]),
            prior=np.array([1.0]),
            y_range=(0.0, 1.0),
        )
        assert space.predictions == pytest.approx([[0.0, 1.0]])

    def test_state_lookup(self, space):
        assert space.state_index(np.array([0.375])) == 1
        assert space.state_index(np.array([0.38])) == 1
        idx = space.state_indices(np.array([[0.875], [0.125]]))
        assert list(idx) == [3, 0]

    def test_hypothesis_view(self, space):
        h = space.hypothesis(0)
        assert h.id == "h0"
        assert h(np.array([0.125])) == pytest.approx(0.25)

    def test_round_trip(self, tmp_path, space):
        path = tmp_path / "space.json"
        save_space(space, path)
        again = load_space(path)
        assert isinstance(again, FiniteTableSpace)
        assert again.ids == space.ids
        assert np.array_equal(again.predictions, space.predictions)
        assert np.array_equal(again.prior, space.prior)


class TestLosses:
    def test_loss_table_values(self, chain, space):
        table = loss_table(space, chain)
        # one-sided fixture: per-state loss equals the prediction offset
        assert table[0] == pytest.approx([0.05] * 4, abs=1e-12)
        assert table[2] == pytest.approx([0.36, 0.36, 0.34, 0.36], abs=1e-12)

    def test_expected_losses(self, chain, space, pi):
        got = expected_losses(space, chain, pi)
        assert got == pytest.approx([0.05, 0.054, 0.355, 0.355, 0.355], abs=1e-12)

    def test_empirical_converges(self, chain, space, pi):
        traj = sample_path(chain, 120_000, seed=2)
        emp = empirical_losses(space, traj)
        assert emp == pytest.approx(expected_losses(space, chain, pi), abs=5e-3)

    def test_empirical_matches_manual(self, chain, space):
        traj = sample_path(chain, 300, seed=4)
        emp = empirical_losses(space, traj)
        manual = np.array(
            [
                np.mean([abs(space.predictions[i, z] - y) for z, y in zip(traj.state_indices, traj.ys)])
                for i in range(space.size)
            ]
        )
        assert emp == pytest.approx(manual, rel=1e-12)


class TestConstants:
    def test_reference_constants(self, chain, space):
        cap = loss_constants(space, chain)
        assert cap.loss_range == pytest.approx(0.36, abs=1e-12)
        assert cap.lipschitz == pytest.approx(1.0, abs=1e-12)
        assert not cap.degenerate_lipschitz

    def test_single_hypothesis_degenerate(self, chain):
        space = FiniteTableSpace(
            ids=("only",),
            x_points=chain.x_matrix(),
            predictions=np.full((1, 4), 0.5),
            prior=np.array([1.0]),
            y_range=(0.0, 1.0),
        )
        cap = loss_constants(space, chain)
        assert cap.degenerate_lipschitz
        assert cap.lipschitz == 1.0

    def test_duplicate_rows_degenerate(self, chain):
        space = FiniteTableSpace(
            ids=("a", "b"),
            x_points=chain.x_matrix(),
            predictions=np.full((2, 4), 0.5),
            prior=np.array([0.5, 0.5]),
            y_range=(0.0, 1.0),
        )
        assert loss_constants(space, chain).degenerate_lipschitz


class TestCovering:
    def test_finite_cap(self):
        cap = SpaceCapacity(0.36, 1.0, 2.0, 1, 1.0)
        # tiny radius: capacity form explodes, finite count wins
        assert covering_number_bound(cap, 1e-4, finite_size=5) == pytest.approx(5.0)
        assert log_covering_bound(cap, 1e-4, finite_size=5) == pytest.approx(math.log(5.0))

    def test_capacity_form_hand_value(self):
        cap = SpaceCapacity(1.0, 1.0, 2.0, 1, 1.0)
        # exponent -2d/q = -1, radius eps/48L with eps=0.3 gives 160
        assert log_covering_bound(cap, 0.3 / 48.0) == pytest.approx(160.0, rel=1e-12)

    def test_overflow_to_inf(self):
        cap = SpaceCapacity(1.0, 1.0, 0.5, 2, 5.0)
        assert covering_number_bound(cap, 1e-3) == math.inf

    def test_rejects_nonpositive_radius(self):
        cap = SpaceCapacity(1.0, 1.0, 2.0, 1, 1.0)
        with pytest.raises(ValueError):
            log_covering_bound(cap, 0.0)


class TestBestLossAndVolume:
    def test_best(self, chain, space, pi):
        loss, hid = best_expected_loss(space, chain, pi)
        assert hid == "h0"
        assert loss == pytest.approx(0.05, abs=1e-12)

    def test_tie_breaks_to_lowest_id(self, chain):
        space = FiniteTableSpace(
            ids=("b", "a"),
            x_points=chain.x_matrix(),
            predictions=np.stack([chain.y_vector() + 0.1, chain.y_vector() + 0.1]),
            prior=np.array([0.5, 0.5]),
            y_range=(0.0, 1.0),
        )
        pi = stationary_distribution(chain).probabilities
        _, hid = best_expected_loss(space, chain, pi)
        assert hid == "a"

    def test_zero_prior_excluded(self, chain, pi):
        space = FiniteTableSpace(
            ids=("best_unreachable", "carried"),
            x_points=chain.x_matrix(),
            predictions=np.stack([chain.y_vector() + 0.01, chain.y_vector() + 0.2]),
            prior=np.array([0.0, 1.0]),
            y_range=(0.0, 1.0),
        )
        loss, hid = best_expected_loss(space, chain, pi)
        assert hid == "carried"
        assert loss == pytest.approx(0.2, abs=1e-12)

    def test_good_volume_reference(self, chain, space, pi):
        assert good_volume(space, chain, pi, 0.075) == pytest.approx(0.4)
        assert good_volume(space, chain, pi, 0.15) == pytest.approx(0.4)
        assert good_volume(space, chain, pi, 0.4) == pytest.approx(1.0)

    def test_good_volume_misleading_prior(self, chain, pi):
        space = misleading_prior_space()
        assert good_volume(space, chain, pi, 0.075) == pytest.approx(0.04)

    def test_boundary_hypothesis_included(self, chain, pi, space):
        # eps exactly at the second-best gap: both near-optimal members count
        assert good_volume(space, chain, pi, 0.004) == pytest.approx(0.4)

    @given(st.floats(0.0, 1.0))
    def test_volume_monotone(self, eps):
        chain = reference_chain()
        space = reference_space()
        pi = stationary_distribution(chain).probabilities
        v1 = good_volume(space, chain, pi, eps)
        v2 = good_volume(space, chain, pi, eps + 0.05)
        assert 0.0 < v1 <= v2 <= 1.0


class TestAffineSpace:
    def test_evaluate_clamps(self):
        sp = affine_space()
        params = np.array([2.0, 0.9])
        assert sp.evaluate(params, 0.9) == pytest.approx(1.0)
        params = np.array([-2.0, 0.1])
        assert sp.evaluate(params, 0.9) == pytest.approx(0.0)

    def test_grid_shape_and_bounds(self):
        sp = affine_space()
        grid = sp.grid_params(11, 7)
        assert grid.shape == (77, 2)
        assert grid[:, 0].min() >= -1.0 and grid[:, 0].max() <= 1.0
        assert grid[:, 1].min() >= 0.0 and grid[:, 1].max() <= 1.0

    def test_prior_sampling_in_box(self):
        sp = affine_space()
        draws = sp.sample_prior(500, seed=3)
        assert draws[:, 0].min() >= -1.0 and draws[:, 0].max() <= 1.0
        assert draws[:, 1].min() >= 0.0 and draws[:, 1].max() <= 1.0

    def test_round_trip(self, tmp_path):
        sp = affine_space()
        path = tmp_path / "affine.json"
        save_space(sp, path)
        again = load_space(path)
        assert isinstance(again, ClampedAffineSpace)
        assert again == sp

    def test_estimators_flagged(self, chain, pi):
        sp = affine_space()
        best = estimate_best_loss(sp, chain, pi, draws=512, seed=1)
        assert best.estimated
        assert best.value >= 0.0
        vol = estimate_good_volume(sp, chain, pi, eps=0.1, draws=512, seed=1)
        assert vol.estimated
        assert 0.0 < vol.value <= 1.0
        assert vol.low <= vol.value <= vol.high
