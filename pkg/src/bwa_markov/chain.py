"""Finite-state Markov chains: simulation, stationary laws, mixing certificates.

A chain lives on a finite list of (x, y) state points, x in R^d compact and
y scalar.  The module provides

* validated chain specs with JSON round-tripping,
* seeded path sampling on counter-based streams (trial-addressable),
* stationary distributions by power iteration,
* total-variation mixing certificates: an envelope gamma * rho^n * V(z)
  fitted against exact kernel powers,
* the effective sample size floor(n / ceil(sqrt(8 n / ln(1/rho)))) that
  converts raw chain length into an independent-equivalent count,
* visit-count sampling that stays exact at chain lengths far beyond what a
  materialized path could hold.

For chains of the refresh-cycle form P = beta * 1 nu^T + (1-beta) * C, with C
a single-cycle permutation and initial law nu, visit counts over n steps are
sampled in O(1) by aggregating regeneration runs: run starts are iid nu, run
lengths form a uniform composition of n, and the composition's residue-class
counts follow a multinomial tilted by one negative-binomial factor, which an
exact rejection step reproduces.  General chains fall back to a streaming
numba kernel that consumes the identical uniform stream as sample_path.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from math import lgamma
from pathlib import Path

import numpy as np

from . import _kernels
from .rng import derive_key, numpy_generator

LANE_PATH = 0x50415448
LANE_NOISE = 0x4E4F4953
_LANE_AGG = 0x414747

# n above which the aggregated sampler is preferred when the chain has
# refresh-cycle structure; below it the streaming kernel is already cheap.
AGGREGATE_THRESHOLD = 2_000_000


@dataclass(frozen=True)
class StatePoint:
    """One chain state: input vector x and scalar target y."""

    x: np.ndarray
    y: float


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance sum_i |p_i - q_i|, in [0, 2].

    This is twice the measure-theoretic sup-over-events form; the factor-2
    convention is what the mixing certificates are stated in.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    for name, v in (("p", p), ("q", q)):
        s = float(v.sum())
        if abs(s - 1.0) > 1e-9:
            raise ValueError(f"{name} sums to {s!r}, not a probability vector")
    return float(np.abs(p - q).sum())


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    k = adj.shape[0]
    seen = np.zeros(k, dtype=bool)
    stack = [start]
    seen[start] = True
    while stack:
        u = stack.pop()
        for v in np.nonzero(adj[u])[0]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return seen


def _period(adj: np.ndarray) -> int:
    """gcd of cycle lengths of a strongly connected digraph."""
    k = adj.shape[0]
    depth = np.full(k, -1, dtype=np.int64)
    depth[0] = 0
    order = [0]
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        for v in np.nonzero(adj[u])[0]:
            if depth[v] < 0:
                depth[v] = depth[u] + 1
                order.append(int(v))
    g = 0
    for u in range(k):
        for v in np.nonzero(adj[u])[0]:
            g = math.gcd(g, int(depth[u] + 1 - depth[v]))
    return g


@dataclass(frozen=True)
class FiniteChainSpec:
    """A finite Markov chain over (x, y) state points.

    transition is row-stochastic (rows sum to 1 within 1e-12, entries
    nonnegative); initial is a probability vector of the same length.  By
    default the chain must be irreducible and aperiodic; pass
    validate_ergodicity=False for simulation-only toys (a deterministic
    cycle, say), which stationary_distribution and fit_certificate will
    still refuse.
    """

    states: tuple[StatePoint, ...]
    transition: np.ndarray
    initial: np.ndarray
    validate_ergodicity: bool = field(default=True, repr=False)

    def __post_init__(self):
        k = len(self.states)
        if k < 1:
            raise ValueError("chain needs at least one state")
        t = np.asarray(self.transition, dtype=float)
        ini = np.asarray(self.initial, dtype=float)
        if t.shape != (k, k):
            raise ValueError(f"transition shape {t.shape}, expected {(k, k)}")
        if ini.shape != (k,):
            raise ValueError(f"initial shape {ini.shape}, expected ({k},)")
        if (t < 0).any() or (ini < 0).any():
            raise ValueError("negative probability entry")
        rows = t.sum(axis=1)
        bad = np.abs(rows - 1.0) > 1e-12
        if bad.any():
            raise ValueError(f"row {int(np.argmax(bad))} sums to {rows[np.argmax(bad)]!r}")
        if abs(ini.sum() - 1.0) > 1e-12:
            raise ValueError(f"initial sums to {ini.sum()!r}")
        d = self.states[0].x.shape
        for sp in self.states:
            if sp.x.shape != d:
                raise ValueError("state x dimensions differ")
        object.__setattr__(self, "transition", t)
        object.__setattr__(self, "initial", ini)
        if self.validate_ergodicity:
            adj = t > 0.0
            if not (_reachable(adj, 0).all() and _reachable(adj.T, 0).all()):
                raise ValueError("chain is not irreducible")
            if _period(adj) != 1:
                raise ValueError("chain is periodic")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return int(self.states[0].x.shape[0])

    def x_matrix(self) -> np.ndarray:
        return np.stack([sp.x for sp in self.states])

    def y_vector(self) -> np.ndarray:
        return np.array([sp.y for sp in self.states])

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.x_matrix().tobytes())
        h.update(self.y_vector().tobytes())
        h.update(self.transition.tobytes())
        h.update(self.initial.tobytes())
        return h.hexdigest()[:16]

    def to_config(self) -> dict:
        return {
            "states": [[*map(float, sp.x), float(sp.y)] for sp in self.states],
            "transition": [[float(v) for v in row] for row in self.transition],
            "initial": [float(v) for v in self.initial],
        }

    @classmethod
    def from_config(cls, cfg: dict, validate_ergodicity: bool = True) -> "FiniteChainSpec":
        pts = tuple(
            StatePoint(x=np.array(row[:-1], dtype=float), y=float(row[-1]))
            for row in cfg["states"]
        )
        return cls(
            states=pts,
            transition=np.array(cfg["transition"], dtype=float),
            initial=np.array(cfg["initial"], dtype=float),
            validate_ergodicity=validate_ergodicity,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_config(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path, validate_ergodicity: bool = True) -> "FiniteChainSpec":
        return cls.from_config(json.loads(Path(path).read_text()), validate_ergodicity)


@dataclass(frozen=True)
class StationaryDistribution:
    probabilities: np.ndarray
    residual_tv: float
    iterations: int


def stationary_distribution(
    spec: FiniteChainSpec,
    tol: float = 1e-13,
    max_iterations: int = 1_000_000,
) -> StationaryDistribution:
    """Stationary law by power iteration on the row-vector recursion.

    Iterates v <- v P until successive iterates differ by less than tol in
    total variation.  Raises RuntimeError with a spectral-gap estimate if
    the iteration cap is hit (periodic or near-periodic chains).
    """
    p = spec.transition
    v = np.full(spec.n_states, 1.0 / spec.n_states)
    for it in range(1, max_iterations + 1):
        nxt = v @ p
        nxt /= nxt.sum()
        delta = float(np.abs(nxt - v).sum())
        v = nxt
        if delta < tol:
            check = float(np.abs(v @ p - v).sum())
            if check > 1e-10:
                raise RuntimeError(f"fixed-point residual {check:.3e} exceeds 1e-10")
            return StationaryDistribution(v, residual_tv=delta, iterations=it)
    eigs = np.sort(np.abs(np.linalg.eigvals(p)))[::-1]
    gap = 1.0 - (eigs[1] if len(eigs) > 1 else 0.0)
    raise RuntimeError(
        f"no convergence in {max_iterations} iterations; spectral gap estimate {gap:.3e}"
    )


@dataclass(frozen=True)
class ErgodicityCertificate:
    """Envelope TV(P^n(.|z), pi) <= gamma * rho^n * V(z) with sum_z V(z) pi(z) < v_bound."""

    gamma: float
    rho: float
    v_bound: float
    v: np.ndarray
    horizon: int

    def __post_init__(self):
        if not (self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if not (0.0 < self.rho < 1.0):
            raise ValueError(f"rho must lie in (0,1), got {self.rho!r}")
        if not (self.v_bound > 1.0):
            raise ValueError(f"v_bound must exceed 1, got {self.v_bound!r}")
        if (np.asarray(self.v) < 1.0).any():
            raise ValueError("V must be >= 1 everywhere")

    def envelope(self, n: int) -> np.ndarray:
        return self.gamma * self.rho**n * np.asarray(self.v)


def _tv_decay(spec: FiniteChainSpec, pi: np.ndarray, horizon: int) -> np.ndarray:
    """d[n-1] = max_z TV(P^n(.|z), pi) for n = 1..horizon, exact kernel powers."""
    p = spec.transition
    power = np.eye(spec.n_states)
    out = np.empty(horizon)
    for n in range(1, horizon + 1):
        power = power @ p
        out[n - 1] = float(np.abs(power - pi[None, :]).sum(axis=1).max())
    return out


def fit_certificate(spec: FiniteChainSpec, horizon: int = 64) -> ErgodicityCertificate:
    """Fit a uniform (V == 1) geometric envelope to the exact TV decay.

    rho is the smallest rate for which gamma = D_1 / rho dominates
    max_z TV(P^n(.|z), pi) across the horizon; v_bound = 1 + 1e-6.  Raises
    on chains without a stationary law (periodic/reducible) and on decay
    that is not geometric over the horizon.
    """
    adj = spec.transition > 0.0
    if not (_reachable(adj, 0).all() and _reachable(adj.T, 0).all()):
        raise ValueError("chain is not irreducible")
    if _period(adj) != 1:
        raise ValueError("chain is periodic")
    pi = stationary_distribution(spec).probabilities
    d = _tv_decay(spec, pi, horizon)
    d1 = d[0]
    if d1 < 1e-15:
        # rows already stationary after one step; any rate works
        return ErgodicityCertificate(
            gamma=1e-12 / 0.5, rho=0.5, v_bound=1.0 + 1e-6,
            v=np.ones(spec.n_states), horizon=horizon,
        )
    # Matrix powers carry ~1e-15 absolute float noise, so decay values that
    # small say nothing about the rate; ratios against them would inflate
    # rho (the noise floor stays flat while the true decay keeps falling).
    floor = max(1e-12, 1e-8 * d1)
    rho = 0.0
    for n in range(2, horizon + 1):
        if d[n - 1] <= floor:
            continue
        rho = max(rho, (d[n - 1] / d1) ** (1.0 / (n - 1)))
    rho = max(rho, 1e-6)
    if rho >= 1.0 - 1e-12:
        raise RuntimeError(f"TV decay is not geometric over horizon {horizon} (rate {rho!r})")
    gamma = max(d1, 1e-12) / rho
    cert = ErgodicityCertificate(
        gamma=gamma, rho=rho, v_bound=1.0 + 1e-6,
        v=np.ones(spec.n_states), horizon=horizon,
    )
    if certificate_max_violation(spec, cert, pi=pi) > 1e-12:
        raise RuntimeError("fitted envelope fails its own decay data")
    return cert


def certificate_max_violation(
    spec: FiniteChainSpec,
    cert: ErgodicityCertificate,
    pi: np.ndarray | None = None,
    horizon: int | None = None,
) -> float:
    """max over steps n and states z of TV(P^n(.|z), pi) - gamma rho^n V(z).

    Nonpositive means the envelope holds everywhere up to the horizon.
    """
    if pi is None:
        pi = stationary_distribution(spec).probabilities
    h = horizon or cert.horizon
    p = spec.transition
    power = np.eye(spec.n_states)
    worst = -math.inf
    for n in range(1, h + 1):
        power = power @ p
        tv = np.abs(power - pi[None, :]).sum(axis=1)
        worst = max(worst, float((tv - cert.envelope(n)).max()))
    return worst


def _snap_ceil(x: float) -> int:
    """ceil with a 1e-9 relative snap so float representation noise cannot
    push an exact integer boundary up by one."""
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def effective_sample_size(n: int, rho: float) -> int:
    """floor(n / ceil(sqrt(8 n / ln(1/rho)))): independent-equivalent count.

    A chain mixing at rate rho spends roughly ln(1/rho)/8 of its raw length
    on information; the block count below is what the concentration bounds
    consume in place of n.
    """
    if n < 0 or n != int(n):
        raise ValueError(f"n must be a nonnegative integer, got {n!r}")
    if not (0.0 < rho < 1.0):
        raise ValueError(f"rho must lie in (0,1), got {rho!r}")
    if n == 0:
        return 0
    block = _snap_ceil(math.sqrt(8.0 * n / (-math.log(rho))))
    return int(n) // max(block, 1)


def _ess_vector(n_arr: np.ndarray, rho: float) -> np.ndarray:
    """Vectorized effective_sample_size with identical float semantics."""
    ln_inv = -math.log(rho)
    kf = np.sqrt(8.0 * n_arr / ln_inv)
    r = np.rint(kf)
    snap = np.abs(kf - r) <= 1e-9 * np.maximum(1.0, np.abs(kf))
    blocks = np.where(snap, r, np.ceil(kf)).astype(np.int64)
    return n_arr // np.maximum(blocks, 1)


@dataclass(frozen=True)
class Trajectory:
    """A sampled path: xs[t] is the t-th input vector, ys[t] its target."""

    xs: np.ndarray
    ys: np.ndarray
    seed: int
    source: str
    state_indices: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.ys.shape[0])

    def points(self) -> list[StatePoint]:
        return [StatePoint(x=self.xs[t], y=float(self.ys[t])) for t in range(len(self))]

    def to_csv(self, path: str | Path) -> None:
        d = self.xs.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", *[f"x{i}" for i in range(d)], "y"])
            for t in range(len(self)):
                w.writerow([t, *[repr(float(v)) for v in self.xs[t]], repr(float(self.ys[t]))])

    @classmethod
    def from_csv(cls, path: str | Path, seed: int = -1, source: str = "csv") -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        d = len(header) - 2
        xs = np.array([[float(v) for v in r[1 : 1 + d]] for r in body])
        ys = np.array([float(r[-1]) for r in body])
        return cls(xs=xs, ys=ys, seed=seed, source=source)


def _cumulative_rows(spec: FiniteChainSpec) -> tuple[np.ndarray, np.ndarray]:
    cum = np.cumsum(spec.transition, axis=1)
    cum[:, -1] = np.maximum(cum[:, -1], 1.0)
    ini = np.cumsum(spec.initial)
    ini[-1] = max(ini[-1], 1.0)
    return np.ascontiguousarray(cum), np.ascontiguousarray(ini)


def sample_path(spec: FiniteChainSpec, n: int, seed: int) -> Trajectory:
    """Sample an n-step path; the first point comes from the initial law.

    The walk consumes uniforms from the counter stream keyed by
    (seed, LANE_PATH), one per step, so the same seed and spec always
    reproduce the identical sequence.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cum, ini = _cumulative_rows(spec)
    key = derive_key(seed, LANE_PATH)
    idx = _kernels.walk_states(cum, ini, np.uint64(key), int(n))
    return Trajectory(
        xs=spec.x_matrix()[idx],
        ys=spec.y_vector()[idx],
        seed=seed,
        source=spec.fingerprint(),
        state_indices=idx,
    )


def trajectory_state_counts(traj: Trajectory, spec: FiniteChainSpec) -> np.ndarray:
    if traj.state_indices is None:
        raise ValueError("trajectory carries no state indices")
    return np.bincount(traj.state_indices, minlength=spec.n_states).astype(np.int64)


@dataclass(frozen=True)
class RefreshCycleStructure:
    """P = beta * 1 nu^T + (1-beta) * C with C a single-cycle permutation."""

    beta: float
    nu: np.ndarray
    successor: np.ndarray  # successor[i] = j iff C maps state i to j
    iid: bool  # beta == 1: every step an independent nu draw


def refresh_cycle_structure(spec: FiniteChainSpec) -> RefreshCycleStructure | None:
    """Detect refresh-cycle structure, or None.

    Requires the initial law to equal the refresh law nu so that every
    regeneration run starts iid nu; the aggregated count sampler depends
    on that.
    """
    p = spec.transition
    k = spec.n_states
    colmin = p.min(axis=0)
    beta = float(colmin.sum())
    if beta < 1e-9:
        return None
    if beta > 1.0 - 1e-12:
        nu = p[0]
        if np.abs(p - nu[None, :]).max() > 1e-12 or np.abs(spec.initial - nu).max() > 1e-12:
            return None
        return RefreshCycleStructure(1.0, nu.copy(), np.arange(k), iid=True)
    nu = colmin / beta
    if np.abs(spec.initial - nu).max() > 1e-12:
        return None
    residual = (p - beta * nu[None, :]) / (1.0 - beta)
    rounded = np.rint(residual)
    if np.abs(residual - rounded).max() > 1e-9:
        return None
    if not ((rounded == 0) | (rounded == 1)).all():
        return None
    if not (rounded.sum(axis=1) == 1).all() or not (rounded.sum(axis=0) == 1).all():
        return None
    succ = rounded.argmax(axis=1).astype(np.int64)
    # single k-cycle: walking the successor map from 0 must visit every state
    node, seen = 0, 1
    for _ in range(k - 1):
        node = int(succ[node])
        if node == 0:
            return None
        seen += 1
    if seen != k:
        return None
    rebuilt = beta * nu[None, :] + (1.0 - beta) * rounded
    if np.abs(rebuilt - p).max() > 1e-12:
        return None
    return RefreshCycleStructure(beta, nu, succ, iid=False)


def _log_negbin_pmf(t: float, m: float, lam: float) -> float:
    """log P(NB(m, lam) = t): t failures before the m-th success."""
    if lam >= 1.0:
        return 0.0 if t == 0 else -math.inf
    return (
        lgamma(t + m) - lgamma(t + 1.0) - lgamma(m)
        + m * math.log(lam) + t * math.log1p(-lam)
    )


def _aggregated_counts(
    structure: RefreshCycleStructure, k: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Exact per-state visit counts for a refresh-cycle chain, O(1) in n.

    The path splits into runs at regeneration steps: run starts are iid nu,
    run lengths a uniform composition of n into m parts (m - 1 regens,
    binomial).  Writing each length as r + k q, the residue-class counts
    follow a multinomial reweighted by the negative-binomial probability of
    the required total quotient: exact rejection sampling against that one
    factor.  Full cycles contribute one visit to every state; partial arcs
    are aggregated per class through multinomial start counts pushed along
    the cycle.
    """
    if n == 0:
        return np.zeros(k, dtype=np.int64)
    if structure.iid:
        return rng.multinomial(n, structure.nu).astype(np.int64)
    m = 1 + (int(rng.binomial(n - 1, structure.beta)) if n > 1 else 0)
    p = m / n
    if m == n:
        class_counts = np.zeros(k, dtype=np.int64)
        class_counts[0] = m
        quotient_total = 0
    else:
        w = (1.0 - p) ** np.arange(k)
        q_probs = w / w.sum()
        lam = 1.0 - (1.0 - p) ** k
        mode = math.floor((m - 1) * (1.0 - lam) / lam) if lam < 1.0 else 0
        log_max = _log_negbin_pmf(mode, float(m), lam)
        for _ in range(100_000):
            a = rng.multinomial(m, q_probs)
            weighted = int((a * np.arange(1, k + 1)).sum())
            rem = n - weighted
            if rem < 0 or rem % k:
                continue
            t = rem // k
            log_ratio = _log_negbin_pmf(float(t), float(m), lam) - log_max
            if log_ratio >= 0.0 or rng.random() < math.exp(log_ratio):
                class_counts = a.astype(np.int64)
                quotient_total = t
                break
        else:
            raise RuntimeError("residue-class rejection sampler failed to accept")
    # class k (residue 0) parts are full cycles only
    counts = np.full(k, quotient_total + class_counts[k - 1], dtype=np.int64)
    pred = np.empty(k, dtype=np.int64)
    pred[structure.successor] = np.arange(k)
    for r in range(1, k):
        if class_counts[r - 1] == 0:
            continue
        starts = rng.multinomial(int(class_counts[r - 1]), structure.nu).astype(np.int64)
        cover = starts.copy()
        for _ in range(1, r):
            starts = starts[pred]
            cover += starts
        counts += cover
    if int(counts.sum()) != n:
        raise RuntimeError("aggregated counts do not total n")
    return counts


def sample_visit_counts(
    spec: FiniteChainSpec, n: int, seed: int, method: str = "auto"
) -> np.ndarray:
    """Per-state visit counts of the n-step path for this seed.

    method "stream" walks the chain (same stream as sample_path, so the
    counts match a materialized path bin-for-bin); "aggregate" uses the
    exact O(1) sampler, available only on refresh-cycle chains; "auto"
    aggregates beyond AGGREGATE_THRESHOLD when the structure allows.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    structure = refresh_cycle_structure(spec) if method in ("auto", "aggregate") else None
    if method == "aggregate" and structure is None:
        raise ValueError("chain has no refresh-cycle structure to aggregate")
    if method == "auto" and (n <= AGGREGATE_THRESHOLD or structure is None):
        structure = None
    if structure is None:
        cum, ini = _cumulative_rows(spec)
        key = derive_key(seed, LANE_PATH)
        return _kernels.visit_counts(cum, ini, np.uint64(key), np.uint64(n))
    rng = numpy_generator(derive_key(seed, LANE_PATH, _LANE_AGG))
    return _aggregated_counts(structure, spec.n_states, n, rng)


def sample_visit_sign_counts(
    spec: FiniteChainSpec, n: int, seed: int, noise_seed: int, method: str = "auto"
) -> np.ndarray:
    """(state, sign) visit counts, sign drawn iid from the noise stream.

    Column 0 holds steps whose noise uniform fell below 1/2.  Used by the
    two-point noise path: its per-step perturbation depends only on the
    sign bit, so these counts are sufficient for noisy cumulative losses.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    structure = refresh_cycle_structure(spec) if method in ("auto", "aggregate") else None
    if method == "aggregate" and structure is None:
        raise ValueError("chain has no refresh-cycle structure to aggregate")
    if method == "auto" and (n <= AGGREGATE_THRESHOLD or structure is None):
        structure = None
    if structure is None:
        cum, ini = _cumulative_rows(spec)
        key = derive_key(seed, LANE_PATH)
        nkey = derive_key(noise_seed, LANE_NOISE)
        return _kernels.visit_sign_counts(cum, ini, np.uint64(key), np.uint64(nkey), np.uint64(n))
    counts = _aggregated_counts(
        structure, spec.n_states, n,
        numpy_generator(derive_key(seed, LANE_PATH, _LANE_AGG)),
    )
    nrng = numpy_generator(derive_key(noise_seed, LANE_NOISE, _LANE_AGG))
    low = nrng.binomial(counts, 0.5)
    return np.stack([low, counts - low], axis=1).astype(np.int64)


def empirical_state_frequencies(spec: FiniteChainSpec, n: int, seed: int) -> np.ndarray:
    counts = sample_visit_counts(spec, n, seed)
    return counts / counts.sum()
