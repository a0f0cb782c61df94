"""Classification on top of the aggregated regressor, plus ERM selection.

With binary targets, the posterior-mean prediction h(x) in [0, 1] acts as
a coin bias: the randomized classifier answers 1 with probability h(x).
Its misclassification probability against a stationary pair equals the
regressor's stationary L1 loss exactly, which is what expected_error
computes in closed form and the Monte-Carlo path estimates empirically.

A target function c can also be folded into a chain: the augmented chain
replaces each state's target with c(x).  The transition matrix is
untouched, so the stationary law and the ergodicity certificate carry
over verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .chain import FiniteChainSpec, Trajectory
from .hypotheses import FiniteTableSpace, empirical_losses
from .rng import derive_key, double_at, doubles

_LANE_TASK = 0x54534B


@dataclass
class RandomClassifier:
    """Per-state bias table with a counter-based coin stream; call order is
    the only state, so a given seed replays the same labels."""

    probabilities: np.ndarray
    seed: int
    calls: int = 0
    _key: int = field(init=False, repr=False)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if (p < 0).any() or (p > 1).any():
            raise ValueError("classifier biases must lie in [0, 1]")
        self.probabilities = p
        self._key = derive_key(self.seed, _LANE_TASK)

    def classify_state(self, state_index: int) -> int:
        u = double_at(self._key, self.calls)
        self.calls += 1
        return int(u < self.probabilities[state_index])

    def classify_states(self, state_indices: np.ndarray) -> np.ndarray:
        state_indices = np.asarray(state_indices, dtype=np.int64)
        u = doubles(self._key, len(state_indices), start=self.calls)
        self.calls += len(state_indices)
        return (u < self.probabilities[state_indices]).astype(np.int64)


def classifier_biases(masses: np.ndarray, space: FiniteTableSpace) -> np.ndarray:
    """Posterior-mean prediction per state, used directly as the coin bias."""
    return np.clip(masses @ space.predictions, 0.0, 1.0)


def expected_error(probabilities: np.ndarray, chain: FiniteChainSpec, pi: np.ndarray) -> float:
    """Exact stationary misclassification probability of the randomized
    classifier, which equals the L1 loss of its bias table."""
    y = chain.y_vector()
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("expected_error needs binary targets")
    return float(np.abs(np.asarray(probabilities) - y) @ np.asarray(pi, dtype=float))


def montecarlo_error(
    probabilities: np.ndarray,
    chain: FiniteChainSpec,
    pi: np.ndarray,
    draws: int,
    seed: int,
) -> tuple[float, float]:
    """Empirical misclassification rate over iid stationary pairs, plus the
    binomial standard error at the exact rate."""
    y = chain.y_vector()
    cum = np.cumsum(np.asarray(pi, dtype=float))
    cum[-1] = max(cum[-1], 1.0)
    u = doubles(derive_key(seed, _LANE_TASK, 1), 2 * draws).reshape(draws, 2)
    idx = np.searchsorted(cum, u[:, 0], side="right")
    labels = (u[:, 1] < np.asarray(probabilities)[idx]).astype(float)
    estimate = float((labels != y[idx]).mean())
    exact = expected_error(probabilities, chain, pi)
    se = float(np.sqrt(max(exact * (1.0 - exact), 1e-12) / draws))
    return estimate, se


def augment_with_target(chain: FiniteChainSpec, target) -> FiniteChainSpec:
    """Chain whose states carry (x, c(x)) instead of (x, y).

    Same transition and initial law, so stationary behavior and fitted
    certificates transfer unchanged.
    """
    new_states = tuple(
        replace(s, y=float(target(np.asarray(s.x, dtype=float)))) for s in chain.states
    )
    return FiniteChainSpec(
        states=new_states,
        transition=chain.transition,
        initial=chain.initial,
        validate_ergodicity=chain.validate_ergodicity,
    )


def erm_train(space: FiniteTableSpace, traj: Trajectory) -> tuple[str, int]:
    """Empirical risk minimizer over the space; ties break toward the
    lowest hypothesis id."""
    losses = empirical_losses(space, traj)
    best = min(range(space.size), key=lambda i: (losses[i], space.ids[i]))
    return space.ids[best], best
