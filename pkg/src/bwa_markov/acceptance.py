"""End-to-end verification criteria.

Each criterion is a callable returning (passed, detail).  run_all times
them and yields one result per criterion; the CLI's verify subcommand and
the acceptance test suite both print one PASS/FAIL line per criterion.
Tolerances are part of each criterion and are asserted, timings are
reported but never asserted.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bwa
from .bounds import (
    BoundInputs,
    capacity_generalization_ne,
    generalization_ne,
    n_from_ne,
    robust_generalization,
    uniform_convergence_ne,
    weight_domination_ne,
    weight_domination_threshold,
)
from .chain import (
    FiniteChainSpec,
    StatePoint,
    Trajectory,
    certificate_max_violation,
    effective_sample_size,
    fit_certificate,
    sample_path,
    stationary_distribution,
)
from .fixtures import (
    affine_space,
    classification_fixtures,
    feature_chain,
    reference_chain,
    reference_space,
    threshold_target,
)
from .harness import ExperimentConfig, run_consistency, run_robustness, run_weight_domination, write_report
from .hypotheses import FiniteTableSpace, SpaceCapacity
from .noise import NoiseSpec, inject_noise, mean_loss_shift
from .rng import derive_key, doubles
from .tasks import augment_with_target, classifier_biases, expected_error, montecarlo_error


def _rel_close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)


def criterion_effective_sample_size() -> tuple[bool, str]:
    """Hand-computed effective-sample-size values and one exact inversion."""
    checks = [
        (effective_sample_size(100, math.exp(-8.0)), 10),
        (effective_sample_size(1000, 0.5), 9),
        (effective_sample_size(1, 0.5), 0),
        (n_from_ne(10.0, math.exp(-8.0)), 100),
    ]
    ok = all(got == want for got, want in checks)
    return ok, " ".join(f"{got}/{want}" for got, want in checks)


def _small_inputs() -> BoundInputs:
    cap = SpaceCapacity(
        loss_range=1.0, lipschitz=1.0, holder_exponent=2.0, input_dim=1, log_cover_coeff=1.0
    )
    return BoundInputs(
        eps=0.1, delta=0.05, alpha=0.5, rho=0.5, gamma=1.0, v_bound=2.0,
        capacity=cap, finite_size=8, vol_quarter=0.25, vol_half=0.25,
    )


def _gen_inputs(noise_range: float = 0.0) -> BoundInputs:
    cap = SpaceCapacity(
        loss_range=1.0, lipschitz=1.0, holder_exponent=2.0, input_dim=1, log_cover_coeff=1.0
    )
    return BoundInputs(
        eps=0.3, delta=0.1, alpha=0.5, rho=0.5, gamma=1.0, v_bound=2.0,
        capacity=cap, finite_size=8, vol_quarter=0.25, vol_half=0.25,
        noise_range=noise_range,
    )


def criterion_bound_arithmetic() -> tuple[bool, str]:
    """Every bound against independently recomputed closed forms, 1e-9
    relative; the 36x domination/uniform ratio; the threshold value; the
    zero-noise robustness equality."""
    failures = []
    inp = _small_inputs()
    base_logs = math.log(40.0) + math.log(1.0 + 2.0 * math.exp(-2.0)) + math.log(8.0)
    uc = uniform_convergence_ne(inp)
    if not _rel_close(uc.ne_required, 800.0 * base_logs, 1e-9):
        failures.append(f"uniform {uc.ne_required!r} vs {800.0 * base_logs!r}")
    dom = weight_domination_ne(inp)
    if not _rel_close(dom.ne_required / uc.ne_required, 36.0, 1e-9):
        failures.append(f"ratio {dom.ne_required / uc.ne_required!r}")
    thr = weight_domination_threshold(0.5, 120, 0.3, 0.25)
    if not _rel_close(thr, 0.0625, 1e-12):
        failures.append(f"threshold {thr!r}")

    gen_inp = _gen_inputs()
    gen_logs = math.log(20.0) + math.log(1.0 + 2.0 * math.exp(-2.0)) + math.log(8.0)
    term1 = 1152.0 / 0.09 * gen_logs
    term2 = math.sqrt(
        3.0 * (math.log(4.0) + math.log(2.0 / 0.3))
        / (2.0 * 0.3 * math.log(2.0) * math.log(2.0))
    )
    gen = generalization_ne(gen_inp)
    if not _rel_close(gen.ne_required, term1 + term2, 1e-9):
        failures.append(f"generalization {gen.ne_required!r} vs {term1 + term2!r}")
    capv = capacity_generalization_ne(gen_inp)
    cap_term1 = 1152.0 / 0.09 * (math.log(20.0) + math.log(1.0 + 2.0 * math.exp(-2.0)) + 160.0)
    if not _rel_close(capv.ne_required, cap_term1 + term2, 1e-9):
        failures.append(f"capacity {capv.ne_required!r} vs {cap_term1 + term2!r}")
    if robust_generalization(gen_inp) != gen:
        failures.append("robust at zero noise differs from clean bound")
    rob = robust_generalization(_gen_inputs(noise_range=0.2))
    if rob.guarantee_excess != 0.5 or rob.ne_required != gen.ne_required:
        failures.append("robust guarantee under noise 0.2")
    detail = "; ".join(failures) if failures else f"gen_ne={gen.ne_required:.3f} ratio=36"
    return not failures, detail


def criterion_log_weight_equivalence() -> tuple[bool, str]:
    """Log-domain posterior masses match a naive linear-scale product
    computation on short paths, 1e-10 relative."""
    worst = 0.0
    xs_points = np.array([[0.1], [0.5], [0.9]])
    for case in range(50):
        u = doubles(derive_key(3001, case), 200)
        m = 3 + int(u[0] * 6)
        n = 5 + int(u[1] * 16)
        alpha = 0.2 + 0.6 * u[2]
        preds = u[3 : 3 + 3 * m].reshape(m, 3)
        prior = 0.05 + u[3 + 3 * m : 3 + 4 * m]
        prior = prior / prior.sum()
        space = FiniteTableSpace(
            ids=tuple(f"h{i}" for i in range(m)),
            x_points=xs_points,
            predictions=preds,
            prior=prior,
            y_range=(0.0, 1.0),
        )
        idx = (u[100 : 100 + n] * 3).astype(int)
        ys = u[130 : 130 + n]
        traj = Trajectory(
            xs=xs_points[idx, :], ys=ys, seed=case, source="synthetic",
            state_indices=idx.astype(np.int64),
        )
        state = bwa.train(space, traj, alpha)
        masses = bwa.posterior_masses(state, space.prior)

        w = np.ones(m)
        for t in range(n):
            w = w * alpha ** np.abs(preds[:, idx[t]] - ys[t])
        naive = w * prior
        naive = naive / naive.sum()
        worst = max(worst, float(np.abs(masses - naive).max() / np.abs(naive).max()))
    return worst <= 1e-10, f"worst relative gap {worst:.3e}"


def criterion_mcmc_grid_agreement() -> tuple[bool, str]:
    """Metropolis predictions agree with the exact 51x51 grid posterior on
    at least 95 of 100 query points, each within 3 reported standard
    errors."""
    chain = reference_chain()
    space = affine_space()
    traj = sample_path(chain, 40, seed=11)
    alpha = 0.7
    xq = 0.05 + 0.9 * doubles(derive_key(4242), 100)
    hits = 0
    worst_ratio = 0.0
    for q, x in enumerate(xq):
        grid = bwa.predict_grid(space, traj, alpha, float(x))
        mc = bwa.predict_mcmc(
            space, traj, alpha, float(x), samples=2000, burn_in=1000, thin=5, seed=1000 + q
        )
        gap = abs(mc.value - grid.value)
        allowance = 3.0 * max(mc.mc_error, 1e-12)
        worst_ratio = max(worst_ratio, gap / allowance)
        hits += gap <= allowance
    return hits >= 95, f"hits {hits}/100, worst gap/allowance {worst_ratio:.2f}"


def _base_config(**overrides) -> ExperimentConfig:
    kwargs = dict(
        chain=reference_chain(),
        space=reference_space(),
        alpha=0.5,
        eps=0.3,
        delta=0.1,
        trials=200,
        n_schedule=(100, 1000, 10000),
        include_bound_n=True,
        base_seed=20260822,
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


def criterion_weight_domination_frequency() -> tuple[bool, str]:
    """Bad hypotheses' normalized weights fall below the threshold at the
    domination bound's step count with Wilson-certified frequency."""
    report = run_weight_domination(_base_config())
    event = next(e for e in report.summary["events"] if e["name"] == "bad_weights_below_threshold_at_bound_n")
    return report.passed, (
        f"wilson_low={event['observed']:.4f} need>={event['requirement']} "
        f"bound_n={report.summary['bound_n']}"
    )


def criterion_consistency() -> tuple[bool, str]:
    """Excess loss within eps at the generalization bound's step count,
    Wilson-certified, and median excess strictly decreasing along the
    schedule."""
    report = run_consistency(_base_config())
    medians = [
        report.summary["aggregates"][str(n)]["median_excess"] for n in (100, 1000, 10000)
    ]
    return report.passed, (
        f"medians={['%.3e' % m for m in medians]} bound_n={report.summary['bound_n']}"
    )


def criterion_noise_shift() -> tuple[bool, str]:
    """Every noise kind moves every hypothesis's mean path loss by at most
    xi/2, over 50 seeds each, and zero noise is the identity."""
    chain = reference_chain()
    space = reference_space()
    xi = 0.2
    worst = 0.0
    for kind in ("uniform", "two_point", "adversarial"):
        for s in range(50):
            traj = sample_path(chain, 400, seed=derive_key(7000, s))
            noise = NoiseSpec(xi=xi, kind=kind, seed=s, reference_id="h2")
            noisy = inject_noise(traj, noise, space)
            worst = max(worst, mean_loss_shift(space, traj, noisy))
    clean = sample_path(chain, 400, seed=1)
    identity_ok = inject_noise(clean, NoiseSpec(xi=0.0, kind="uniform", seed=0)) is clean
    ok = worst <= xi / 2.0 + 1e-12 and identity_ok
    return ok, f"worst shift {worst:.6f} vs limit {xi / 2.0}, zero-noise identity {identity_ok}"


def criterion_robustness() -> tuple[bool, str]:
    """Noisy-target guarantee at bound scale for two-point and adversarial
    noise, and byte-identical reports for zero noise versus clean runs."""
    failures = []
    two_point = run_robustness(
        _base_config(noise=NoiseSpec(xi=0.2, kind="two_point", seed=777))
    )
    if not two_point.passed:
        failures.append("two_point events")
    adversarial = run_robustness(
        _base_config(noise=NoiseSpec(xi=0.2, kind="adversarial", seed=777, reference_id="h2"))
    )
    if not adversarial.passed:
        failures.append("adversarial events")

    clean = run_consistency(_base_config())
    zero = run_robustness(_base_config(noise=NoiseSpec(xi=0.0, kind="two_point", seed=777)))
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp, "clean.csv"), Path(tmp, "zero.csv")
        write_report(clean.records, a)
        write_report(zero.records, b)
        if a.read_bytes() != b.read_bytes():
            failures.append("zero-noise report differs from clean report")
    detail = "; ".join(failures) if failures else "two_point, adversarial, zero-noise byte match"
    return not failures, detail


def criterion_classification() -> tuple[bool, str]:
    """Randomized-classifier error matches the regression loss on three
    fixtures: closed form versus 100000 stationary draws within 3 SE."""
    gaps = []
    ok = True
    for f_idx, (chain, space) in enumerate(classification_fixtures()):
        traj = sample_path(chain, 500, seed=derive_key(9000, f_idx))
        state = bwa.train(space, traj, 0.5)
        biases = classifier_biases(bwa.posterior_masses(state, space.prior), space)
        pi = stationary_distribution(chain).probabilities
        exact = expected_error(biases, chain, pi)
        est, se = montecarlo_error(biases, chain, pi, draws=100_000, seed=f_idx)
        gaps.append(abs(est - exact) / se)
        ok = ok and abs(est - exact) <= 3.0 * se
    return ok, "gap/se = " + ", ".join(f"{g:.2f}" for g in gaps)


def criterion_augmented_chain() -> tuple[bool, str]:
    """Folding a target function into a chain preserves the stationary law
    and the fitted certificate still validates."""
    base = feature_chain()
    aug = augment_with_target(base, threshold_target)
    pi_base = stationary_distribution(base).probabilities
    pi_aug = stationary_distribution(aug).probabilities
    gap = float(np.abs(pi_base - pi_aug).max())
    cert = fit_certificate(aug)
    violation = certificate_max_violation(aug, cert)
    labels = aug.y_vector()
    binary = bool(np.isin(labels, (0.0, 1.0)).all())
    ok = gap <= 1e-10 and violation <= 1e-12 and binary
    return ok, f"stationary gap {gap:.2e}, envelope violation {violation:.2e}"


def criterion_certificates() -> tuple[bool, str]:
    """Fitted decay certificates hold at every state and horizon step, and
    the reference chain's fitted rate equals its constructed rate."""
    failures = []
    ref = reference_chain()
    cert = fit_certificate(ref)
    if abs(cert.rho - 0.4) > 1e-6:
        failures.append(f"reference rho {cert.rho!r}")
    v1 = certificate_max_violation(ref, cert)
    if v1 > 1e-12:
        failures.append(f"reference violation {v1:.2e}")
    lazy = FiniteChainSpec(
        states=(StatePoint(x=np.array([0.0]), y=0.0), StatePoint(x=np.array([1.0]), y=1.0)),
        transition=np.array([[0.9, 0.1], [0.5, 0.5]]),
        initial=np.array([0.5, 0.5]),
    )
    cert2 = fit_certificate(lazy)
    v2 = certificate_max_violation(lazy, cert2)
    if v2 > 1e-12:
        failures.append(f"two-state violation {v2:.2e}")
    detail = "; ".join(failures) if failures else (
        f"rho={cert.rho:.6f} violations {v1:.1e}, {v2:.1e}"
    )
    return not failures, detail


CRITERIA: tuple[tuple[str, object], ...] = (
    ("effective-sample-size-values", criterion_effective_sample_size),
    ("bound-arithmetic-regressions", criterion_bound_arithmetic),
    ("log-weight-equivalence", criterion_log_weight_equivalence),
    ("mcmc-grid-agreement", criterion_mcmc_grid_agreement),
    ("weight-domination-frequency", criterion_weight_domination_frequency),
    ("consistency-frequency-and-decay", criterion_consistency),
    ("noise-shift-inequality", criterion_noise_shift),
    ("robustness-and-clean-equivalence", criterion_robustness),
    ("classifier-error-reduction", criterion_classification),
    ("augmented-chain-stationarity", criterion_augmented_chain),
    ("certificate-envelope-validity", criterion_certificates),
)


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str
    seconds: float


def run_criterion(index: int) -> CriterionResult:
    """Run one criterion by 1-based index."""
    name, fn = CRITERIA[index - 1]
    start = time.perf_counter()
    passed, detail = fn()
    elapsed = time.perf_counter() - start
    return CriterionResult(index=index, name=name, passed=passed, detail=detail, seconds=elapsed)


def format_line(result: CriterionResult) -> str:
    status = "PASS" if result.passed else "FAIL"
    return (
        f"{status} criterion {result.index:2d} {result.name} "
        f"({result.seconds:.2f}s) {result.detail}"
    )


def run_all(indices: list[int] | None = None) -> list[CriterionResult]:
    if indices is None:
        indices = list(range(1, len(CRITERIA) + 1))
    return [run_criterion(i) for i in indices]
