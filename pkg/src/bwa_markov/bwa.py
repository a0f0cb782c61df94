"""Multiplicative-weights aggregation over a hypothesis space.

A hypothesis h carrying cumulative path loss S(h) gets weight
alpha^S(h) with alpha in (0, 1).  All weight arithmetic lives in the log
domain: log w = S * ln(alpha), normalization by log-sum-exp with max
subtraction, so weights that underflow to zero linearly stay exactly
representable here.

Point predictions average the hypotheses' outputs under the normalized
posterior mass.  Finite tables are summed exactly; the affine family is
integrated either on a fixed parameter grid (exact for the discretized
posterior) or by a random-walk Metropolis sampler with a reported
Monte-Carlo standard error.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chain import FiniteChainSpec, Trajectory
from .hypotheses import ClampedAffineSpace, FiniteTableSpace, loss_table, trajectory_columns
from .rng import derive_key, doubles

_LANE_MCMC = 0x4D434D43


@dataclass(frozen=True)
class WeightState:
    """Cumulative losses after some number of steps, one per hypothesis."""

    ids: tuple[str, ...]
    alpha: float
    cumulative_loss: np.ndarray
    steps: int

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.cumulative_loss.shape != (len(self.ids),):
            raise ValueError("cumulative_loss length disagrees with ids")

    @property
    def log_weights(self) -> np.ndarray:
        return self.cumulative_loss * math.log(self.alpha)


def initial_state(space: FiniteTableSpace, alpha: float) -> WeightState:
    return WeightState(
        ids=space.ids,
        alpha=alpha,
        cumulative_loss=np.zeros(space.size),
        steps=0,
    )


def update(state: WeightState, space: FiniteTableSpace, x: np.ndarray, y: float) -> WeightState:
    """Fold one observed pair into the cumulative losses."""
    losses = np.abs(space.predict_all(x) - y)
    return WeightState(
        ids=state.ids,
        alpha=state.alpha,
        cumulative_loss=state.cumulative_loss + losses,
        steps=state.steps + 1,
    )


def train(space: FiniteTableSpace, traj: Trajectory, alpha: float) -> WeightState:
    """Cumulative losses along a whole path in one vectorized pass."""
    cols = trajectory_columns(space, traj)
    losses = np.abs(space.predictions[:, cols] - traj.ys[None, :])
    return WeightState(
        ids=space.ids,
        alpha=alpha,
        cumulative_loss=losses.sum(axis=1),
        steps=len(traj.ys),
    )


def train_from_counts(
    space: FiniteTableSpace,
    chain: FiniteChainSpec,
    counts: np.ndarray,
    alpha: float,
) -> WeightState:
    """Same state train() would reach on any path with these visit counts."""
    counts = np.asarray(counts, dtype=float)
    return WeightState(
        ids=space.ids,
        alpha=alpha,
        cumulative_loss=loss_table(space, chain) @ counts,
        steps=int(round(counts.sum())),
    )


def train_from_loss_table(
    space: FiniteTableSpace, table: np.ndarray, counts: np.ndarray, alpha: float
) -> WeightState:
    """Counts-weighted training against a caller-supplied per-state loss table."""
    counts = np.asarray(counts, dtype=float)
    return WeightState(
        ids=space.ids,
        alpha=alpha,
        cumulative_loss=np.asarray(table, dtype=float) @ counts,
        steps=int(round(counts.sum())),
    )


def train_from_sign_counts(
    space: FiniteTableSpace,
    chain: FiniteChainSpec,
    sign_counts: np.ndarray,
    alpha: float,
    xi: float,
) -> WeightState:
    """Training under symmetric two-point target noise, from (state, sign)
    visit counts; column 0 counts steps whose target moved down by xi/2."""
    sign_counts = np.asarray(sign_counts, dtype=float)
    cols = space.state_indices(chain.x_matrix())
    preds = space.predictions[:, cols]
    y = chain.y_vector()[None, :]
    loss_down = np.abs(preds - (y - xi / 2.0))
    loss_up = np.abs(preds - (y + xi / 2.0))
    cumulative = loss_down @ sign_counts[:, 0] + loss_up @ sign_counts[:, 1]
    return WeightState(
        ids=space.ids,
        alpha=alpha,
        cumulative_loss=cumulative,
        steps=int(round(sign_counts.sum())),
    )


def _log_normalizer(state: WeightState, prior: np.ndarray) -> tuple[np.ndarray, float]:
    logw = state.log_weights
    with np.errstate(divide="ignore"):
        logmass = logw + np.log(prior)
    peak = logmass.max()
    if not np.isfinite(peak):
        raise ValueError("no hypothesis carries prior mass")
    logz = peak + math.log(np.exp(logmass - peak).sum())
    return logmass, logz


def posterior_masses(state: WeightState, prior: np.ndarray) -> np.ndarray:
    """Normalized posterior mass per hypothesis; sums to one."""
    logmass, logz = _log_normalizer(state, np.asarray(prior, dtype=float))
    return np.exp(logmass - logz)


def normalized_weights(state: WeightState, prior: np.ndarray) -> np.ndarray:
    """Posterior density with respect to the prior: mass / prior mass.

    Defined only where the prior is positive; zero-prior entries return 0.
    """
    prior = np.asarray(prior, dtype=float)
    _, logz = _log_normalizer(state, prior)
    out = np.zeros_like(prior)
    pos = prior > 0
    out[pos] = np.exp(state.log_weights[pos] - logz)
    return out


def log_posterior_masses(state: WeightState, prior: np.ndarray) -> np.ndarray:
    logmass, logz = _log_normalizer(state, np.asarray(prior, dtype=float))
    return logmass - logz


@dataclass(frozen=True)
class Prediction:
    value: float
    method: str
    mc_error: float = 0.0
    acceptance_rate: float | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)


def predict(state: WeightState, space: FiniteTableSpace, x: np.ndarray) -> Prediction:
    """Posterior-mean prediction at x, summed exactly over the table."""
    masses = posterior_masses(state, space.prior)
    return Prediction(value=float(masses @ space.predict_all(x)), method="exact")


def predict_values(state: WeightState, space: FiniteTableSpace) -> np.ndarray:
    """Posterior-mean prediction at every state point at once."""
    masses = posterior_masses(state, space.prior)
    return masses @ space.predictions


def _affine_sum_losses(
    space: ClampedAffineSpace, params: np.ndarray, xs: np.ndarray, ys: np.ndarray
) -> np.ndarray:
    preds = space.evaluate(params[:, None, :], xs[None, :])
    return np.abs(preds - ys[None, :]).sum(axis=1)


def predict_grid(
    space: ClampedAffineSpace,
    traj: Trajectory,
    alpha: float,
    x: float,
    n_slope: int = 51,
    n_intercept: int = 51,
) -> Prediction:
    """Exact posterior-mean prediction for the affine family discretized to
    a cell-center parameter grid with uniform prior masses."""
    params = space.grid_params(n_slope, n_intercept)
    xs = np.asarray(traj.xs, dtype=float).ravel()
    logw = _affine_sum_losses(space, params, xs, traj.ys) * math.log(alpha)
    peak = logw.max()
    masses = np.exp(logw - peak)
    masses /= masses.sum()
    values = space.evaluate(params, x)
    return Prediction(value=float(masses @ values), method="grid")


def _reflect(v: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return lo
    width = hi - lo
    while v < lo or v > hi:
        if v < lo:
            v = 2.0 * lo - v
        else:
            v = 2.0 * hi - v
    return v


def predict_mcmc(
    space: ClampedAffineSpace,
    traj: Trajectory,
    alpha: float,
    x: float,
    samples: int = 2000,
    burn_in: int = 1000,
    thin: int = 5,
    seed: int = 0,
    step_fraction: float = 0.1,
) -> Prediction:
    """Random-walk Metropolis estimate of the posterior-mean prediction.

    Proposals are independent Gaussians per coordinate with standard
    deviation step_fraction times the box width, reflected at the box
    boundary so the uniform prior never vetoes a move.  The per-coordinate
    scale adapts toward 30% acceptance during burn-in only and is frozen
    afterwards, keeping the post-burn-in chain a fixed-kernel chain.  The
    reported error is a batch-means standard error of the thinned draws,
    and the acceptance rate is measured after burn-in; a rate outside
    [0.05, 0.95] attaches a warning note.
    """
    if samples < 2 or burn_in < 0 or thin < 1:
        raise ValueError("need samples >= 2, burn_in >= 0, thin >= 1")
    box = space.box()
    widths = space.widths()
    if float(widths.max()) == 0.0:
        value = float(space.evaluate(box[:, 0], x))
        return Prediction(value=value, method="exact", notes=("degenerate parameter box",))

    xs = np.asarray(traj.xs, dtype=float).ravel()
    ys = traj.ys
    log_alpha = math.log(alpha)

    def log_target(p: np.ndarray) -> float:
        pred = np.clip(p[0] * xs + p[1], space.y_range[0], space.y_range[1])
        return float(np.abs(pred - ys).sum()) * log_alpha

    key = derive_key(seed, _LANE_MCMC)
    total = burn_in + samples * thin
    u = doubles(key, 3 * total).reshape(total, 3)
    normals = np.empty((total, 2))
    # Box-Muller from the two uniform lanes; lane 3 drives the accept test.
    r = np.sqrt(-2.0 * np.log(np.maximum(u[:, 0], 1e-300)))
    normals[:, 0] = r * np.cos(2.0 * math.pi * u[:, 1])
    normals[:, 1] = r * np.sin(2.0 * math.pi * u[:, 1])

    theta = box[:, 0] + 0.5 * (box[:, 1] - box[:, 0])
    lt = log_target(theta)
    scale = np.where(widths > 0, step_fraction * widths, 0.0)
    window_acc = 0
    window_len = 50
    kept = np.empty(samples)
    kept_i = 0
    post_accept = 0
    post_total = 0
    since_keep = 0

    for t in range(total):
        prop = theta + scale * normals[t]
        prop[0] = _reflect(prop[0], box[0, 0], box[0, 1])
        prop[1] = _reflect(prop[1], box[1, 0], box[1, 1])
        lp = log_target(prop)
        accept = math.log(max(u[t, 2], 1e-300)) < lp - lt
        if accept:
            theta, lt = prop, lp
        if t < burn_in:
            window_acc += accept
            if (t + 1) % window_len == 0:
                rate = window_acc / window_len
                scale = np.clip(
                    scale * math.exp(0.6 * (rate - 0.3)),
                    1e-4 * np.maximum(widths, 1e-12),
                    2.0 * np.maximum(widths, 1e-12),
                )
                window_acc = 0
        else:
            post_total += 1
            post_accept += accept
            since_keep += 1
            if since_keep == thin:
                kept[kept_i] = space.evaluate(theta, x)
                kept_i += 1
                since_keep = 0
                if kept_i == samples:
                    break

    values = kept[:kept_i]
    n_batches = max(2, int(math.isqrt(len(values))))
    usable = (len(values) // n_batches) * n_batches
    batches = values[:usable].reshape(n_batches, -1).mean(axis=1)
    se = float(batches.std(ddof=1) / math.sqrt(n_batches))
    rate = post_accept / max(post_total, 1)
    notes: tuple[str, ...] = ()
    if not 0.05 <= rate <= 0.95:
        notes = (f"acceptance rate {rate:.3f} outside [0.05, 0.95]",)
        warnings.warn(notes[0], RuntimeWarning, stacklevel=2)
    return Prediction(
        value=float(values.mean()),
        method="mcmc",
        mc_error=se,
        acceptance_rate=rate,
        notes=notes,
    )


_WEIGHT_COLUMNS = ["hypothesis_id", "cumulative_loss", "log_weight", "posterior_mass"]


def write_weights(state: WeightState, prior: np.ndarray, path: str | Path) -> None:
    masses = posterior_masses(state, prior)
    logw = state.log_weights
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_WEIGHT_COLUMNS)
        for i, hid in enumerate(state.ids):
            writer.writerow(
                [hid, repr(float(state.cumulative_loss[i])), repr(float(logw[i])), repr(float(masses[i]))]
            )


def read_weights(path: str | Path, alpha: float) -> WeightState:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _WEIGHT_COLUMNS:
            raise ValueError(f"unexpected weight file header {header!r}")
        ids: list[str] = []
        cumulative: list[float] = []
        for row in reader:
            ids.append(row[0])
            cumulative.append(float(row[1]))
    arr = np.array(cumulative, dtype=float)
    return WeightState(ids=tuple(ids), alpha=alpha, cumulative_loss=arr, steps=0)
