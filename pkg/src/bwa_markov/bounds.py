"""Effective-sample-size requirements for aggregation guarantees.

Every bound here answers: how many effective samples n_e (and raw chain
steps n) make a stated event hold with probability at least 1 - delta?
The shared complexity shape is

    factor * M^2 / eps^2 * (ln(2/delta) + ln(1 + gamma B e^-2) + ln N(r))

with M the loss range, gamma/B the ergodicity constants, and ln N(r) a
covering-number bound at a radius proportional to eps / L.  The three
events differ only in the constant factor and radius, plus one additive
posterior-concentration term for the generalization guarantee.

Raw step counts come from inverting the effective-sample-size map, which
is not locally monotone, so the inversion scans for the first crossing
above a certified lower bracket instead of bisecting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import _ess_vector, effective_sample_size
from .hypotheses import SpaceCapacity, log_covering_bound


@dataclass(frozen=True)
class BoundInputs:
    """Everything a guarantee consumes.

    vol_quarter and vol_half are prior masses of hypotheses within eps/4
    and eps/2 of the best expected loss; finite_size caps the covering
    bound for finite spaces; noise_range is the total target-noise range.
    """

    eps: float
    delta: float
    alpha: float
    rho: float
    gamma: float
    v_bound: float
    capacity: SpaceCapacity
    finite_size: int | None = None
    vol_quarter: float | None = None
    vol_half: float | None = None
    noise_range: float = 0.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps!r}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho!r}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if self.v_bound <= 1:
            raise ValueError(f"v_bound must exceed 1, got {self.v_bound!r}")
        for name in ("vol_quarter", "vol_half"):
            v = getattr(self, name)
            if v is not None and not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v!r}")
        if self.noise_range < 0:
            raise ValueError(f"noise_range must be nonnegative, got {self.noise_range!r}")


@dataclass(frozen=True)
class BoundResult:
    ne_required: float
    n_required: int
    vacuous: bool
    guarantee_excess: float | None
    terms: dict


def n_from_ne(ne_target: float, rho: float) -> int:
    """Smallest n whose effective sample size reaches ne_target.

    effective_sample_size(n, rho) <= sqrt(n * ln(1/rho) / 8) for every n,
    so no n below 8 t^2 / ln(1/rho) can work; the scan starts there and
    walks forward to the first crossing (the map dips locally whenever the
    block count steps up, so bisection would be unsound).
    """
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho!r}")
    if not math.isfinite(ne_target):
        raise ValueError(f"ne_target must be finite, got {ne_target!r}")
    if ne_target <= 0:
        return 1
    lc = math.log(1.0 / rho)
    start = max(1, int(8.0 * ne_target * ne_target / lc) - 2)
    chunk = 1 << 16
    n = start
    while True:
        arr = np.arange(n, n + chunk, dtype=np.float64)
        hit = np.nonzero(_ess_vector(arr, rho) >= ne_target)[0]
        if hit.size:
            candidate = int(arr[hit[0]])
            if candidate <= 1 or effective_sample_size(candidate - 1, rho) < ne_target:
                return candidate
            # The certified bracket can only undershoot; walking one back
            # here would indicate a wrong bracket, so scan down safely.
            while candidate > 1 and effective_sample_size(candidate - 1, rho) >= ne_target:
                candidate -= 1
            return candidate
        n += chunk
        chunk = min(chunk * 2, 1 << 22)


def _log_mixing(inp: BoundInputs) -> float:
    return math.log1p(inp.gamma * inp.v_bound * math.exp(-2.0))


def _complexity_ne(inp: BoundInputs, factor: float, radius_divisor: float) -> tuple[float, dict]:
    m, lip = inp.capacity.loss_range, inp.capacity.lipschitz
    radius = inp.eps / (radius_divisor * lip)
    log_cover = log_covering_bound(inp.capacity, radius, inp.finite_size)
    log_conf = math.log(2.0 / inp.delta)
    log_mix = _log_mixing(inp)
    ne = factor * m * m / (inp.eps * inp.eps) * (log_conf + log_mix + log_cover)
    terms = {
        "factor": factor,
        "cover_radius": radius,
        "log_confidence": log_conf,
        "log_mixing": log_mix,
        "log_cover": log_cover,
    }
    return ne, terms


def _finish(inp: BoundInputs, ne: float, terms: dict, guarantee: float | None) -> BoundResult:
    if not math.isfinite(ne):
        return BoundResult(
            ne_required=ne, n_required=0, vacuous=True, guarantee_excess=guarantee, terms=terms
        )
    return BoundResult(
        ne_required=ne,
        n_required=n_from_ne(ne, inp.rho),
        vacuous=ne < 1.0,
        guarantee_excess=guarantee,
        terms=terms,
    )


def uniform_convergence_ne(inp: BoundInputs) -> BoundResult:
    """Effective samples for every hypothesis's path loss to sit within
    eps of its stationary loss, simultaneously, with probability 1 - delta."""
    ne, terms = _complexity_ne(inp, 8.0, 4.0)
    return _finish(inp, ne, terms, None)


def weight_domination_ne(inp: BoundInputs) -> BoundResult:
    """Effective samples for every bad hypothesis's normalized weight to
    fall below the domination threshold with probability 1 - delta."""
    ne, terms = _complexity_ne(inp, 288.0, 24.0)
    return _finish(inp, ne, terms, None)


def weight_domination_log_threshold(alpha: float, n: int, eps: float, vol_half: float) -> float:
    """ln of the weight level separating eps-bad hypotheses: the normalized
    weight of any hypothesis with excess loss above eps is at most
    alpha^(n eps / 6) / vol_half once the domination event holds."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if not 0 < vol_half <= 1:
        raise ValueError(f"vol_half must lie in (0, 1], got {vol_half!r}")
    if n < 0 or eps <= 0:
        raise ValueError("need n >= 0 and eps > 0")
    return (n * eps / 6.0) * math.log(alpha) - math.log(vol_half)


def weight_domination_threshold(alpha: float, n: int, eps: float, vol_half: float) -> float:
    """Linear-scale threshold; underflows to 0.0 for large n by design, use
    the log form for comparisons at scale."""
    return math.exp(weight_domination_log_threshold(alpha, n, eps, vol_half))


def _posterior_term(inp: BoundInputs) -> float:
    if inp.vol_quarter is None:
        raise ValueError("generalization bound needs vol_quarter")
    m = inp.capacity.loss_range
    num = 3.0 * (math.log(1.0 / inp.vol_quarter) + math.log(2.0 * m / inp.eps))
    den = 2.0 * inp.eps * math.log(1.0 / inp.alpha) * math.log(1.0 / inp.rho)
    return math.sqrt(num / den)


def generalization_ne(inp: BoundInputs) -> BoundResult:
    """Effective samples for the aggregated predictor's stationary loss to
    exceed the best hypothesis's by at most eps with probability 1 - delta.

    Sum of the complexity term (factor 1152, radius eps / 48 L) and the
    posterior-concentration term; both appear in the term breakdown.
    """
    ne1, terms = _complexity_ne(inp, 1152.0, 48.0)
    ne2 = _posterior_term(inp)
    terms = dict(terms, complexity_ne=ne1, posterior_ne=ne2)
    return _finish(inp, ne1 + ne2, terms, inp.eps)


def capacity_generalization_ne(inp: BoundInputs) -> BoundResult:
    """Generalization requirement with the covering term in capacity form
    log_cover_coeff * (eps / 48 L)^(-2 d / q), never capped by a finite
    count; intended for continuous families."""
    cap = inp.capacity
    radius = inp.eps / (48.0 * cap.lipschitz)
    log_cover = cap.log_cover_coeff * radius ** (-2.0 * cap.input_dim / cap.holder_exponent)
    log_conf = math.log(2.0 / inp.delta)
    log_mix = _log_mixing(inp)
    m = cap.loss_range
    ne1 = 1152.0 * m * m / (inp.eps * inp.eps) * (log_conf + log_mix + log_cover)
    ne2 = _posterior_term(inp)
    terms = {
        "factor": 1152.0,
        "cover_radius": radius,
        "log_confidence": log_conf,
        "log_mixing": log_mix,
        "log_cover": log_cover,
        "complexity_ne": ne1,
        "posterior_ne": ne2,
    }
    return _finish(inp, ne1 + ne2, terms, inp.eps)


def robust_generalization(inp: BoundInputs) -> BoundResult:
    """Generalization under bounded target noise: identical effective-sample
    requirement, guarantee excess widened from eps to eps + noise_range.
    With noise_range = 0 the result equals the clean bound field for field.
    """
    clean = generalization_ne(inp)
    return BoundResult(
        ne_required=clean.ne_required,
        n_required=clean.n_required,
        vacuous=clean.vacuous,
        guarantee_excess=inp.eps + inp.noise_range,
        terms=dict(clean.terms),
    )


def bound_table(inp: BoundInputs) -> dict[str, BoundResult]:
    """Every bound at once, keyed by name."""
    table = {
        "uniform_convergence": uniform_convergence_ne(inp),
        "weight_domination": weight_domination_ne(inp),
    }
    if inp.vol_quarter is not None:
        table["generalization"] = generalization_ne(inp)
        table["capacity_generalization"] = capacity_generalization_ne(inp)
        table["robust_generalization"] = robust_generalization(inp)
    return table
