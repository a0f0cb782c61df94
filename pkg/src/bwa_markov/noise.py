"""Bounded target-noise models for training paths.

Every model perturbs only the targets, never the inputs, and the
perturbation magnitude never exceeds xi/2.  A perturbed path therefore
moves every hypothesis's mean loss by at most xi/2, which is the fact the
robustness guarantee consumes.

Kinds:

* uniform: shift = (v - 0.5) * xi with v uniform on [0, 1).
* two_point: shift = -xi/2 when v < 0.5 else +xi/2.
* adversarial: shift = (xi/2) * sign(h_ref(x) - y) for a designated
  reference hypothesis, pulling targets toward its predictions; no
  randomness is consumed.

The random kinds read the same counter stream the sign-splitting path
kernel reads (one value per step, counters 0..n-1), so materialized paths
and aggregated (state, sign) counts describe the same noisy data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .chain import LANE_NOISE, FiniteChainSpec, Trajectory
from .hypotheses import FiniteTableSpace, loss_table
from .rng import derive_key, doubles

NOISE_KINDS = ("uniform", "two_point", "adversarial")


@dataclass(frozen=True)
class NoiseSpec:
    """Noise magnitude xi (total range), kind, stream seed, and the
    reference hypothesis id the adversarial kind tracks."""

    xi: float
    kind: str = "two_point"
    seed: int = 0
    reference_id: str | None = None

    def __post_init__(self):
        if self.xi < 0:
            raise ValueError(f"xi must be nonnegative, got {self.xi!r}")
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.kind == "adversarial" and self.reference_id is None:
            raise ValueError("adversarial noise needs a reference hypothesis id")


def _reference_row(space: FiniteTableSpace, noise: NoiseSpec) -> np.ndarray:
    try:
        idx = space.ids.index(noise.reference_id)
    except ValueError:
        raise ValueError(f"reference id {noise.reference_id!r} not in space") from None
    return space.predictions[idx]


def target_shifts(noise: NoiseSpec, traj: Trajectory, space: FiniteTableSpace | None = None) -> np.ndarray:
    """Per-step target shifts for a materialized path."""
    n = len(traj.ys)
    if noise.xi == 0.0:
        return np.zeros(n)
    if noise.kind == "adversarial":
        if space is None:
            raise ValueError("adversarial noise needs the hypothesis space")
        cols = space.state_indices(traj.xs)
        ref = _reference_row(space, noise)[cols]
        return (noise.xi / 2.0) * np.sign(ref - traj.ys)
    v = doubles(derive_key(noise.seed, LANE_NOISE), n)
    if noise.kind == "uniform":
        return (v - 0.5) * noise.xi
    return np.where(v < 0.5, -noise.xi / 2.0, noise.xi / 2.0)


def inject_noise(
    traj: Trajectory, noise: NoiseSpec, space: FiniteTableSpace | None = None
) -> Trajectory:
    """Path with perturbed targets; xi = 0 returns the input unchanged."""
    if noise.xi == 0.0:
        return traj
    shifts = target_shifts(noise, traj, space)
    return replace(traj, ys=traj.ys + shifts, source=f"{traj.source}+{noise.kind}")


def noisy_loss_table(
    space: FiniteTableSpace, chain: FiniteChainSpec, noise: NoiseSpec
) -> np.ndarray:
    """Per-(hypothesis, state) losses against adversarially shifted targets.

    Only the adversarial kind is a deterministic function of the state, so
    only it reduces to a plain table; random kinds need sign counts or a
    materialized path.
    """
    if noise.kind != "adversarial":
        raise ValueError("only adversarial noise reduces to a per-state loss table")
    cols = space.state_indices(chain.x_matrix())
    ref = _reference_row(space, noise)[cols]
    y = chain.y_vector()
    shifted = y + (noise.xi / 2.0) * np.sign(ref - y)
    return np.abs(space.predictions[:, cols] - shifted[None, :])


def mean_loss_shift(
    space: FiniteTableSpace, clean: Trajectory, noisy: Trajectory
) -> float:
    """Largest change in any hypothesis's mean path loss between the two
    paths; bounded by xi/2 whenever the paths differ only by target noise
    of total range xi."""
    if len(clean.ys) != len(noisy.ys):
        raise ValueError("paths have different lengths")
    cols = space.state_indices(clean.xs)
    preds = space.predictions[:, cols]
    clean_mean = np.abs(preds - clean.ys[None, :]).mean(axis=1)
    noisy_mean = np.abs(preds - noisy.ys[None, :]).mean(axis=1)
    return float(np.abs(noisy_mean - clean_mean).max())
