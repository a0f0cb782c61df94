"""Built-in chains and hypothesis spaces used by tests, the CLI, and the
verification suite.

The reference chain mixes a uniform refresh (weight 0.6) with a
deterministic 4-cycle (weight 0.4), started from its uniform stationary
law.  That shape pins the total-variation decay to exactly 1.5 * 0.4^n,
keeps the chain doubly stochastic, and is recognized by the aggregated
visit-count sampler, so experiments can run at bound-scale step counts.

The reference space has two near-optimal hypotheses (stationary losses
0.05 and 0.054) and three clearly bad ones (0.355 each), all predicting
above the targets so excess losses stay exactly linear in the posterior
masses.
"""

from __future__ import annotations

import numpy as np

from .chain import FiniteChainSpec, StatePoint
from .hypotheses import ClampedAffineSpace, FiniteTableSpace

_REF_X = (0.125, 0.375, 0.625, 0.875)
_REF_Y = (0.20, 0.40, 0.10, 0.30)


def reference_chain() -> FiniteChainSpec:
    k = 4
    transition = np.full((k, k), 0.6 / k)
    for i in range(k):
        transition[i, (i + 1) % k] += 0.4
    states = tuple(
        StatePoint(x=np.array([x]), y=y) for x, y in zip(_REF_X, _REF_Y)
    )
    return FiniteChainSpec(
        states=states,
        transition=transition,
        initial=np.full(k, 1.0 / k),
    )


_REF_OFFSETS = (
    (0.050, 0.050, 0.050, 0.050),
    (0.054, 0.054, 0.054, 0.054),
    (0.360, 0.360, 0.340, 0.360),
    (0.360, 0.340, 0.360, 0.360),
    (0.340, 0.360, 0.360, 0.360),
)


def _reference_predictions() -> np.ndarray:
    y = np.array(_REF_Y)
    return y[None, :] + np.array(_REF_OFFSETS)


def reference_space() -> FiniteTableSpace:
    return FiniteTableSpace(
        ids=("h0", "h1", "h2", "h3", "h4"),
        x_points=np.array(_REF_X)[:, None],
        predictions=_reference_predictions(),
        prior=np.full(5, 0.2),
        y_range=(0.0, 1.0),
    )


def misleading_prior_space() -> FiniteTableSpace:
    """Same hypotheses, prior mass piled onto the bad ones."""
    return FiniteTableSpace(
        ids=("h0", "h1", "h2", "h3", "h4"),
        x_points=np.array(_REF_X)[:, None],
        predictions=_reference_predictions(),
        prior=np.array([0.02, 0.02, 0.32, 0.32, 0.32]),
        y_range=(0.0, 1.0),
    )


def affine_space() -> ClampedAffineSpace:
    return ClampedAffineSpace(
        slope_range=(-1.0, 1.0),
        intercept_range=(0.0, 1.0),
        y_range=(0.0, 1.0),
    )


def _table_fixture(xs, ys, transition, initial, tables) -> tuple[FiniteChainSpec, FiniteTableSpace]:
    states = tuple(StatePoint(x=np.array([x]), y=float(y)) for x, y in zip(xs, ys))
    chain = FiniteChainSpec(
        states=states,
        transition=np.array(transition, dtype=float),
        initial=np.array(initial, dtype=float),
    )
    m = len(tables)
    space = FiniteTableSpace(
        ids=tuple(f"h{i}" for i in range(m)),
        x_points=np.array(xs, dtype=float)[:, None],
        predictions=np.array(tables, dtype=float),
        prior=np.full(m, 1.0 / m),
        y_range=(0.0, 1.0),
    )
    return chain, space


def classification_fixtures() -> list[tuple[FiniteChainSpec, FiniteTableSpace]]:
    """Three binary-target chains with bias-table hypothesis spaces."""
    two_state = _table_fixture(
        xs=(0.25, 0.75),
        ys=(0.0, 1.0),
        transition=[[0.7, 0.3], [0.4, 0.6]],
        initial=[4.0 / 7.0, 3.0 / 7.0],
        tables=[(0.1, 0.9), (0.5, 0.5), (0.9, 0.1)],
    )
    three_state = _table_fixture(
        xs=(0.2, 0.5, 0.8),
        ys=(0.0, 1.0, 0.0),
        transition=[[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]],
        initial=[1.0 / 3.0] * 3,
        tables=[(0.2, 0.8, 0.2), (0.5, 0.5, 0.5), (0.05, 0.95, 0.9)],
    )
    four_state = _table_fixture(
        xs=_REF_X,
        ys=(0.0, 1.0, 1.0, 0.0),
        transition=(np.full((4, 4), 0.15) + 0.4 * np.eye(4)[[1, 2, 3, 0]]).tolist(),
        initial=[0.25] * 4,
        tables=[(0.1, 0.9, 0.8, 0.2), (0.3, 0.6, 0.7, 0.4), (0.5, 0.5, 0.5, 0.5)],
    )
    return [two_state, three_state, four_state]


def feature_chain() -> FiniteChainSpec:
    """Five-state chain whose targets are placeholders, meant to be
    replaced by a target function via augmentation."""
    row = np.array([0.4, 0.15, 0.15, 0.15, 0.15])
    transition = np.stack([np.roll(row, i) for i in range(5)])
    xs = (0.1, 0.3, 0.5, 0.7, 0.9)
    states = tuple(StatePoint(x=np.array([x]), y=0.0) for x in xs)
    return FiniteChainSpec(
        states=states,
        transition=transition,
        initial=np.full(5, 0.2),
    )


def threshold_target(x: np.ndarray) -> float:
    return 1.0 if float(x[0]) >= 0.5 else 0.0


NAMED_CHAINS = {"reference": reference_chain, "feature": feature_chain}
NAMED_SPACES = {
    "reference": reference_space,
    "misleading": misleading_prior_space,
    "affine": affine_space,
}


def named_chain(name: str) -> FiniteChainSpec:
    try:
        return NAMED_CHAINS[name]()
    except KeyError:
        raise ValueError(f"unknown chain name {name!r}; have {sorted(NAMED_CHAINS)}") from None


def named_space(name: str):
    try:
        return NAMED_SPACES[name]()
    except KeyError:
        raise ValueError(f"unknown space name {name!r}; have {sorted(NAMED_SPACES)}") from None
