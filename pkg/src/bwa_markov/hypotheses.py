"""Hypothesis spaces over a compact input box with clamped scalar outputs.

Two concrete kinds:

* FiniteTableSpace: hypotheses given as per-state prediction tables aligned
  with a chain's state list, plus a prior mass vector.  Loss constants,
  best expected loss and good-volume masses are exact.
* ClampedAffineSpace: h(x) = clamp(a x + b) over a parameter box with a
  uniform prior; the MCMC prediction path samples it.  Best loss and
  good volume are Monte-Carlo estimates and say so.

Loss is L1 throughout: loss(h, (x, y)) = |h(x) - y|.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .chain import FiniteChainSpec, Trajectory
from .rng import derive_key, doubles


@dataclass(frozen=True)
class SpaceCapacity:
    """Size constants a bound consumes.

    loss_range bounds |h(x) - y| over the space and state region;
    lipschitz bounds ||h1(x)-y| - |h2(x)-y|| / sup_x|h1(x)-h2(x)| over
    pairs; the covering exponent is capacity ln N(eps) <= log_cover_coeff *
    eps^(-2 input_dim / holder_exponent).
    """

    loss_range: float
    lipschitz: float
    holder_exponent: float
    input_dim: int
    log_cover_coeff: float
    degenerate_lipschitz: bool = False


def loss_l1(prediction: float | np.ndarray, y: float | np.ndarray) -> float | np.ndarray:
    return np.abs(prediction - y)


@dataclass(frozen=True)
class Hypothesis:
    """One hypothesis: an id and a clamped point evaluator."""

    id: str
    y_low: float
    y_high: float
    _fn: object

    def __call__(self, x: np.ndarray) -> float:
        v = float(self._fn(np.asarray(x, dtype=float)))
        return min(max(v, self.y_low), self.y_high)


class FiniteTableSpace:
    """Finitely many hypotheses as per-state prediction tables.

    predictions[i, z] is hypothesis i's output at state z (clamped to the
    y range at construction); x_points holds the state inputs so arbitrary
    query points can be matched back to columns.
    """

    def __init__(
        self,
        ids: tuple[str, ...],
        x_points: np.ndarray,
        predictions: np.ndarray,
        prior: np.ndarray,
        y_range: tuple[float, float],
        holder_exponent: float = 2.0,
        log_cover_coeff: float = 1.0,
    ):
        ids = tuple(str(i) for i in ids)
        if len(set(ids)) != len(ids):
            raise ValueError("hypothesis ids must be unique")
        x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
        predictions = np.asarray(predictions, dtype=float)
        prior = np.asarray(prior, dtype=float)
        m, k = predictions.shape
        if len(ids) != m or x_points.shape[0] != k or prior.shape != (m,):
            raise ValueError("ids / x_points / predictions / prior shapes disagree")
        if (prior < 0).any():
            raise ValueError("negative prior mass")
        if abs(prior.sum() - 1.0) > 1e-12:
            raise ValueError(f"prior sums to {prior.sum()!r}")
        lo, hi = float(y_range[0]), float(y_range[1])
        if not lo < hi:
            raise ValueError("empty y range")
        self.ids = ids
        self.x_points = x_points
        self.predictions = np.clip(predictions, lo, hi)
        self.prior = prior
        self.y_range = (lo, hi)
        self.holder_exponent = float(holder_exponent)
        self.log_cover_coeff = float(log_cover_coeff)

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def n_states(self) -> int:
        return self.x_points.shape[0]

    def state_index(self, x: np.ndarray) -> int:
        """Column of the nearest state point (exact hits expected)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return int(np.argmin(np.abs(self.x_points - x[None, :]).sum(axis=1)))

    def state_indices(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        d = np.abs(xs[:, None, :] - self.x_points[None, :, :]).sum(axis=2)
        return d.argmin(axis=1)

    def hypothesis(self, i: int) -> Hypothesis:
        row = self.predictions[i]
        return Hypothesis(
            id=self.ids[i],
            y_low=self.y_range[0],
            y_high=self.y_range[1],
            _fn=lambda x, row=row: row[self.state_index(x)],
        )

    def predict_all(self, x: np.ndarray) -> np.ndarray:
        """Every hypothesis's output at one query point."""
        return self.predictions[:, self.state_index(x)]

    def to_config(self) -> dict:
        return {
            "kind": "finite_table",
            "ids": list(self.ids),
            "x_points": self.x_points.tolist(),
            "predictions": self.predictions.tolist(),
            "prior": self.prior.tolist(),
            "y_range": list(self.y_range),
            "holder_exponent": self.holder_exponent,
            "log_cover_coeff": self.log_cover_coeff,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "FiniteTableSpace":
        return cls(
            ids=tuple(cfg["ids"]),
            x_points=np.array(cfg["x_points"], dtype=float),
            predictions=np.array(cfg["predictions"], dtype=float),
            prior=np.array(cfg["prior"], dtype=float),
            y_range=tuple(cfg["y_range"]),
            holder_exponent=cfg.get("holder_exponent", 2.0),
            log_cover_coeff=cfg.get("log_cover_coeff", 1.0),
        )


@dataclass(frozen=True)
class ClampedAffineSpace:
    """h(x) = clamp(a x + b) on scalar x, (a, b) uniform over a box."""

    slope_range: tuple[float, float]
    intercept_range: tuple[float, float]
    y_range: tuple[float, float] = (0.0, 1.0)
    holder_exponent: float = 1.0
    log_cover_coeff: float = 1.0

    def evaluate(self, params: np.ndarray, x: float | np.ndarray) -> np.ndarray:
        a, b = params[..., 0], params[..., 1]
        return np.clip(a * x + b, self.y_range[0], self.y_range[1])

    def box(self) -> np.ndarray:
        return np.array([self.slope_range, self.intercept_range], dtype=float)

    def widths(self) -> np.ndarray:
        box = self.box()
        return box[:, 1] - box[:, 0]

    def sample_prior(self, count: int, seed: int) -> np.ndarray:
        u = doubles(derive_key(seed, 0x505249), 2 * count).reshape(count, 2)
        box = self.box()
        return box[:, 0] + u * (box[:, 1] - box[:, 0])

    def grid_params(self, n_slope: int = 51, n_intercept: int = 51) -> np.ndarray:
        """Cell-center discretization, row-major over (slope, intercept)."""
        sa = (np.arange(n_slope) + 0.5) / n_slope
        sb = (np.arange(n_intercept) + 0.5) / n_intercept
        a = self.slope_range[0] + sa * (self.slope_range[1] - self.slope_range[0])
        b = self.intercept_range[0] + sb * (self.intercept_range[1] - self.intercept_range[0])
        aa, bb = np.meshgrid(a, b, indexing="ij")
        return np.stack([aa.ravel(), bb.ravel()], axis=1)

    def capacity(self) -> SpaceCapacity:
        lo, hi = self.y_range
        return SpaceCapacity(
            loss_range=hi - lo,
            lipschitz=1.0,
            holder_exponent=self.holder_exponent,
            input_dim=1,
            log_cover_coeff=self.log_cover_coeff,
        )

    def to_config(self) -> dict:
        return {
            "kind": "clamped_affine",
            "slope_range": list(self.slope_range),
            "intercept_range": list(self.intercept_range),
            "y_range": list(self.y_range),
            "holder_exponent": self.holder_exponent,
            "log_cover_coeff": self.log_cover_coeff,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "ClampedAffineSpace":
        return cls(
            slope_range=tuple(cfg["slope_range"]),
            intercept_range=tuple(cfg["intercept_range"]),
            y_range=tuple(cfg.get("y_range", (0.0, 1.0))),
            holder_exponent=cfg.get("holder_exponent", 1.0),
            log_cover_coeff=cfg.get("log_cover_coeff", 1.0),
        )


def load_space(path: str | Path):
    cfg = json.loads(Path(path).read_text())
    kind = cfg.get("kind")
    if kind == "finite_table":
        return FiniteTableSpace.from_config(cfg)
    if kind == "clamped_affine":
        return ClampedAffineSpace.from_config(cfg)
    raise ValueError(f"unknown space kind {kind!r}")


def save_space(space, path: str | Path) -> None:
    Path(path).write_text(json.dumps(space.to_config(), indent=2) + "\n")


def loss_table(space: FiniteTableSpace, chain: FiniteChainSpec) -> np.ndarray:
    """Exact per-(hypothesis, state) L1 losses against the chain's targets."""
    cols = space.state_indices(chain.x_matrix())
    return np.abs(space.predictions[:, cols] - chain.y_vector()[None, :])


def trajectory_columns(space: FiniteTableSpace, traj: Trajectory) -> np.ndarray:
    if traj.state_indices is not None and space.n_states >= int(traj.state_indices.max()) + 1:
        return traj.state_indices
    return space.state_indices(traj.xs)


def empirical_losses(space: FiniteTableSpace, traj: Trajectory) -> np.ndarray:
    """Mean L1 loss of every hypothesis along the path."""
    cols = trajectory_columns(space, traj)
    return np.abs(space.predictions[:, cols] - traj.ys[None, :]).mean(axis=1)


def expected_losses(space: FiniteTableSpace, chain: FiniteChainSpec, pi: np.ndarray) -> np.ndarray:
    """Exact stationary expected L1 loss of every hypothesis."""
    return loss_table(space, chain) @ np.asarray(pi, dtype=float)


def loss_constants(space: FiniteTableSpace, chain: FiniteChainSpec) -> SpaceCapacity:
    """Exact loss-range and Lipschitz constants over the state list.

    The Lipschitz constant is the largest ratio of pointwise loss gap to
    sup-norm prediction gap across distinct hypothesis pairs; pairs with
    identical predictions carry no information, and a space with no
    informative pair is flagged degenerate with lipschitz = 1.
    """
    table = loss_table(space, chain)
    m_const = float(table.max())
    best = 0.0
    informative = False
    m = space.size
    for i in range(m):
        for j in range(i + 1, m):
            gap = float(np.abs(space.predictions[i] - space.predictions[j]).max())
            if gap <= 0.0:
                continue
            informative = True
            best = max(best, float(np.abs(table[i] - table[j]).max()) / gap)
    return SpaceCapacity(
        loss_range=m_const,
        lipschitz=best if informative else 1.0,
        holder_exponent=space.holder_exponent,
        input_dim=space.x_points.shape[1],
        log_cover_coeff=space.log_cover_coeff,
        degenerate_lipschitz=not informative,
    )


def log_covering_bound(capacity: SpaceCapacity, radius: float, finite_size: int | None = None) -> float:
    """ln of the covering-number bound at the given radius.

    Capacity form log_cover_coeff * radius^(-2 d / q); finite spaces cap it
    at ln(size).
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    expo = -2.0 * capacity.input_dim / capacity.holder_exponent
    val = capacity.log_cover_coeff * radius**expo
    if finite_size is not None:
        val = min(val, math.log(finite_size))
    return val


def covering_number_bound(capacity: SpaceCapacity, radius: float, finite_size: int | None = None) -> float:
    try:
        return math.exp(log_covering_bound(capacity, radius, finite_size))
    except OverflowError:
        return math.inf


def best_expected_loss(
    space: FiniteTableSpace, chain: FiniteChainSpec, pi: np.ndarray
) -> tuple[float, str]:
    """Smallest stationary expected loss over positive-prior hypotheses.

    Ties break toward the lowest hypothesis id.
    """
    losses = expected_losses(space, chain, pi)
    mask = space.prior > 0
    if not mask.any():
        raise ValueError("no hypothesis carries prior mass")
    candidates = sorted(
        (float(losses[i]), space.ids[i], i) for i in range(space.size) if mask[i]
    )
    loss, _, idx = candidates[0]
    return loss, space.ids[idx]


def good_volume(
    space: FiniteTableSpace, chain: FiniteChainSpec, pi: np.ndarray, eps: float
) -> float:
    """Prior mass of hypotheses within eps of the best expected loss.

    Strictly positive for every eps > 0 since the best hypothesis itself
    qualifies.  The comparison carries a 1e-12 absolute slack so dot-product
    rounding cannot drop a boundary hypothesis.
    """
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps!r}")
    losses = expected_losses(space, chain, pi)
    gamma_star, _ = best_expected_loss(space, chain, pi)
    return float(space.prior[losses <= gamma_star + eps + 1e-12].sum())


@dataclass(frozen=True)
class EstimatedValue:
    """A Monte-Carlo estimate that refuses to be mistaken for an exact value."""

    value: float
    low: float
    high: float
    draws: int
    estimated: bool = True


def estimate_best_loss(
    space: ClampedAffineSpace,
    chain: FiniteChainSpec,
    pi: np.ndarray,
    draws: int = 4096,
    seed: int = 0,
) -> EstimatedValue:
    """Prior-sampled estimate of the best stationary loss of the family.

    The minimum over draws upper-bounds the true infimum; the interval is
    the bootstrap-free (min, min - spread/sqrt(draws)) heuristic band and
    the estimated flag stays True.
    """
    params = space.sample_prior(draws, seed)
    preds = space.evaluate(params[:, None, :], chain.x_matrix()[None, :, 0])
    losses = np.abs(preds - chain.y_vector()[None, :]) @ np.asarray(pi, dtype=float)
    order = np.sort(losses)
    spread = float(order[min(draws - 1, max(1, draws // 100))] - order[0])
    return EstimatedValue(
        value=float(order[0]),
        low=float(order[0] - spread / math.sqrt(draws)),
        high=float(order[0]),
        draws=draws,
    )


def estimate_good_volume(
    space: ClampedAffineSpace,
    chain: FiniteChainSpec,
    pi: np.ndarray,
    eps: float,
    draws: int = 4096,
    seed: int = 0,
) -> EstimatedValue:
    """Prior-sampled estimate of the good-volume mass at radius eps, with a
    Wilson 95% interval."""
    from .harness import wilson_interval

    params = space.sample_prior(draws, seed)
    preds = space.evaluate(params[:, None, :], chain.x_matrix()[None, :, 0])
    losses = np.abs(preds - chain.y_vector()[None, :]) @ np.asarray(pi, dtype=float)
    best = estimate_best_loss(space, chain, pi, draws=draws, seed=seed)
    hits = int((losses <= best.value + eps).sum())
    lo, hi = wilson_interval(hits, draws)
    return EstimatedValue(value=hits / draws, low=lo, high=hi, draws=draws)
