"""Experiment harness: repeated-trial runs, frequency summaries, reports.

A run draws many independent training paths from a chain, trains the
weighted aggregate on each, and checks two per-trial events: the
aggregate's stationary excess loss staying within its guarantee, and
every bad hypothesis's normalized weight staying below the domination
threshold.  Event frequencies are reported with Wilson 95% intervals.

Outputs are a delimited per-trial report (report.csv) and a summary
(summary.json).  Both are byte-deterministic for a given configuration:
row order is fixed, floats are written with repr, JSON keys are sorted.
Trial seeds derive from (base_seed, lane, n, trial) only, never from the
run kind, so a robustness run with zero noise reproduces the consistency
run's report byte for byte.

Paths enter as aggregated visit counts whenever the chain admits the
refresh-cycle sampler and n is large, so bound-scale step counts cost
about the same as small ones.  Uniform target noise is the one shape
that cannot be aggregated; it requires materialized paths and is
rejected above a step-count limit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import (
    BoundInputs,
    bound_table,
    robust_generalization,
    weight_domination_log_threshold,
    weight_domination_ne,
)
from .chain import (
    ErgodicityCertificate,
    FiniteChainSpec,
    fit_certificate,
    sample_path,
    sample_visit_counts,
    sample_visit_sign_counts,
    stationary_distribution,
)
from .hypotheses import (
    FiniteTableSpace,
    best_expected_loss,
    expected_losses,
    good_volume,
    loss_constants,
    loss_table,
)
from .noise import NoiseSpec, inject_noise, noisy_loss_table
from .rng import derive_key

_WILSON_Z = 1.959963984540054
_LANE_PATH_SEED = 1
_LANE_NOISE_SEED = 2
_MATERIALIZE_LIMIT = 5_000_000


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials!r}")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    z2 = _WILSON_Z * _WILSON_Z
    p = successes / trials
    denom = 1.0 + z2 / trials
    center = p + z2 / (2.0 * trials)
    radius = _WILSON_Z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials))
    return (center - radius) / denom, (center + radius) / denom


@dataclass(frozen=True)
class ExperimentConfig:
    chain: FiniteChainSpec
    space: FiniteTableSpace
    alpha: float = 0.5
    eps: float = 0.3
    delta: float = 0.1
    trials: int = 200
    n_schedule: tuple[int, ...] = (100, 1000, 10000)
    include_bound_n: bool = True
    base_seed: int = 20260822
    noise: NoiseSpec | None = None

    def __post_init__(self):
        if self.trials < 30:
            raise ValueError(f"need at least 30 trials, got {self.trials!r}")
        sched = tuple(int(n) for n in self.n_schedule)
        if len(sched) == 0 or any(n <= 0 for n in sched):
            raise ValueError("n_schedule must hold positive step counts")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("n_schedule must be strictly increasing")
        object.__setattr__(self, "n_schedule", sched)

    def to_config(self) -> dict:
        cfg = {
            "chain": self.chain.to_config(),
            "space": self.space.to_config(),
            "alpha": self.alpha,
            "eps": self.eps,
            "delta": self.delta,
            "trials": self.trials,
            "n_schedule": list(self.n_schedule),
            "include_bound_n": self.include_bound_n,
            "base_seed": self.base_seed,
            "noise": None,
        }
        if self.noise is not None:
            cfg["noise"] = {
                "xi": self.noise.xi,
                "kind": self.noise.kind,
                "seed": self.noise.seed,
                "reference_id": self.noise.reference_id,
            }
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "ExperimentConfig":
        from .fixtures import named_chain, named_space

        chain_cfg = cfg["chain"]
        chain = named_chain(chain_cfg) if isinstance(chain_cfg, str) else FiniteChainSpec.from_config(chain_cfg)
        space_cfg = cfg["space"]
        space = named_space(space_cfg) if isinstance(space_cfg, str) else FiniteTableSpace.from_config(space_cfg)
        if not isinstance(space, FiniteTableSpace):
            raise ValueError("experiments need a finite table space")
        noise_cfg = cfg.get("noise")
        noise = None
        if noise_cfg is not None:
            noise = NoiseSpec(
                xi=float(noise_cfg["xi"]),
                kind=noise_cfg.get("kind", "two_point"),
                seed=int(noise_cfg.get("seed", 0)),
                reference_id=noise_cfg.get("reference_id"),
            )
        return cls(
            chain=chain,
            space=space,
            alpha=float(cfg.get("alpha", 0.5)),
            eps=float(cfg.get("eps", 0.3)),
            delta=float(cfg.get("delta", 0.1)),
            trials=int(cfg.get("trials", 200)),
            n_schedule=tuple(cfg.get("n_schedule", (100, 1000, 10000))),
            include_bound_n=bool(cfg.get("include_bound_n", True)),
            base_seed=int(cfg.get("base_seed", 20260822)),
            noise=noise,
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_config(json.loads(Path(path).read_text()))


def bound_inputs_for(
    chain: FiniteChainSpec,
    space: FiniteTableSpace,
    eps: float,
    delta: float,
    alpha: float,
    noise_range: float = 0.0,
    cert: ErgodicityCertificate | None = None,
) -> BoundInputs:
    """Assemble bound inputs from a chain and finite space: fitted
    certificate, exact loss constants, exact good-volume masses."""
    if cert is None:
        cert = fit_certificate(chain)
    pi = stationary_distribution(chain).probabilities
    return BoundInputs(
        eps=eps,
        delta=delta,
        alpha=alpha,
        rho=cert.rho,
        gamma=cert.gamma,
        v_bound=cert.v_bound,
        capacity=loss_constants(space, chain),
        finite_size=space.size,
        vol_quarter=good_volume(space, chain, pi, eps / 4.0),
        vol_half=good_volume(space, chain, pi, eps / 2.0),
        noise_range=noise_range,
    )


_REPORT_COLUMNS = (
    "n",
    "trial",
    "path_seed",
    "loss_aggregate",
    "gamma_star",
    "excess",
    "excess_limit",
    "event_excess",
    "log_sup_bad",
    "log_threshold",
    "event_domination",
    "loss_shift_max",
)


@dataclass(frozen=True)
class TrialRecord:
    n: int
    trial: int
    path_seed: int
    loss_aggregate: float
    gamma_star: float
    excess: float
    excess_limit: float
    event_excess: int
    log_sup_bad: float
    log_threshold: float
    event_domination: int
    loss_shift_max: float


@dataclass(frozen=True)
class RunReport:
    kind: str
    records: list
    summary: dict
    passed: bool


class _TrialEngine:
    """Precomputed per-run quantities shared by every trial."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.chain = config.chain
        self.space = config.space
        self.cert = fit_certificate(self.chain)
        self.pi = stationary_distribution(self.chain).probabilities
        self.table_clean = loss_table(self.space, self.chain)
        self.exp_losses = expected_losses(self.space, self.chain, self.pi)
        self.gamma_star, _ = best_expected_loss(self.space, self.chain, self.pi)
        self.bad_mask = self.exp_losses > self.gamma_star + config.eps
        self.log_prior = np.where(
            self.space.prior > 0, np.log(np.maximum(self.space.prior, 1e-300)), -np.inf
        )
        xi = config.noise.xi if config.noise is not None else 0.0
        self.inputs = bound_inputs_for(
            self.chain, self.space, config.eps, config.delta, config.alpha,
            noise_range=xi, cert=self.cert,
        )
        self.xi = xi
        self.table_noisy = None
        if config.noise is not None and config.noise.kind == "adversarial" and xi > 0:
            self.table_noisy = noisy_loss_table(self.space, self.chain, config.noise)

    def n_values(self) -> tuple[list[int], int | None]:
        cfg = self.config
        ns = list(cfg.n_schedule)
        bound_n = None
        if cfg.include_bound_n:
            result = robust_generalization(self.inputs)
            if math.isfinite(result.ne_required):
                bound_n = result.n_required
                if bound_n not in ns:
                    ns.append(bound_n)
        return sorted(set(ns)), bound_n

    def domination_n(self) -> int:
        return weight_domination_ne(self.inputs).n_required

    def _cumulative_losses(self, n: int, path_seed: int, noise_seed: int) -> tuple[np.ndarray, float]:
        """Per-hypothesis cumulative path losses and the largest mean-loss
        shift relative to the same path without noise."""
        noise = self.config.noise
        if noise is None or self.xi == 0.0:
            counts = sample_visit_counts(self.chain, n, path_seed)
            return self.table_clean @ counts.astype(float), 0.0
        if noise.kind == "two_point":
            sc = sample_visit_sign_counts(self.chain, n, path_seed, noise_seed).astype(float)
            y = self.chain.y_vector()[None, :]
            cols = self.space.state_indices(self.chain.x_matrix())
            preds = self.space.predictions[:, cols]
            cum = (
                np.abs(preds - (y - self.xi / 2.0)) @ sc[:, 0]
                + np.abs(preds - (y + self.xi / 2.0)) @ sc[:, 1]
            )
            clean = self.table_clean @ sc.sum(axis=1)
            return cum, float(np.abs(cum - clean).max()) / n
        if noise.kind == "adversarial":
            counts = sample_visit_counts(self.chain, n, path_seed).astype(float)
            cum = self.table_noisy @ counts
            clean = self.table_clean @ counts
            return cum, float(np.abs(cum - clean).max()) / n
        if n > _MATERIALIZE_LIMIT:
            raise ValueError(
                "uniform noise needs materialized paths; "
                f"n={n} exceeds the {_MATERIALIZE_LIMIT}-step limit, "
                "use two_point or adversarial noise at bound scale"
            )
        traj = sample_path(self.chain, n, path_seed)
        noisy = inject_noise(traj, replace_seed(noise, noise_seed), self.space)
        cols = self.space.state_indices(traj.xs)
        preds = self.space.predictions[:, cols]
        cum = np.abs(preds - noisy.ys[None, :]).sum(axis=1)
        clean = np.abs(preds - traj.ys[None, :]).sum(axis=1)
        return cum, float(np.abs(cum - clean).max()) / n

    def run_trial(self, n: int, trial: int) -> TrialRecord:
        cfg = self.config
        path_seed = derive_key(cfg.base_seed, _LANE_PATH_SEED, n, trial)
        noise_seed = derive_key(cfg.base_seed, _LANE_NOISE_SEED, n, trial)
        cum, shift = self._cumulative_losses(n, path_seed, noise_seed)

        log_alpha = math.log(cfg.alpha)
        logw = cum * log_alpha
        logmass = logw + self.log_prior
        peak = logmass.max()
        logz = peak + math.log(np.exp(logmass - peak).sum())
        masses = np.exp(logmass - logz)

        hbar = masses @ self.space.predictions
        cols = self.space.state_indices(self.chain.x_matrix())
        loss_aggregate = float(np.abs(hbar[cols] - self.chain.y_vector()) @ self.pi)
        excess = loss_aggregate - self.gamma_star
        excess_limit = cfg.eps + self.xi

        if self.bad_mask.any():
            log_sup_bad = float((logw - logz)[self.bad_mask].max())
        else:
            log_sup_bad = -math.inf
        log_threshold = weight_domination_log_threshold(
            cfg.alpha, n, cfg.eps, self.inputs.vol_half
        )
        return TrialRecord(
            n=n,
            trial=trial,
            path_seed=path_seed,
            loss_aggregate=loss_aggregate,
            gamma_star=self.gamma_star,
            excess=excess,
            excess_limit=excess_limit,
            event_excess=int(excess <= excess_limit),
            log_sup_bad=log_sup_bad,
            log_threshold=log_threshold,
            event_domination=int(log_sup_bad <= log_threshold),
            loss_shift_max=shift,
        )


def replace_seed(noise: NoiseSpec, seed: int) -> NoiseSpec:
    return NoiseSpec(xi=noise.xi, kind=noise.kind, seed=seed, reference_id=noise.reference_id)


def _aggregate(records: list, n: int, trials: int) -> dict:
    rows = [r for r in records if r.n == n]
    excesses = np.array([r.excess for r in rows])
    exc_hits = sum(r.event_excess for r in rows)
    dom_hits = sum(r.event_domination for r in rows)
    exc_lo, exc_hi = wilson_interval(exc_hits, trials)
    dom_lo, dom_hi = wilson_interval(dom_hits, trials)
    return {
        "median_excess": float(np.median(excesses)),
        "mean_excess": float(excesses.mean()),
        "max_excess": float(excesses.max()),
        "freq_excess_within_limit": exc_hits / trials,
        "wilson_excess": [exc_lo, exc_hi],
        "freq_domination": dom_hits / trials,
        "wilson_domination": [dom_lo, dom_hi],
        "max_loss_shift": float(max(r.loss_shift_max for r in rows)),
    }


def _run(config: ExperimentConfig, kind: str) -> RunReport:
    engine = _TrialEngine(config)
    if kind == "domination":
        ns = sorted(set(config.n_schedule) | {engine.domination_n()}) if config.include_bound_n else list(config.n_schedule)
        bound_n = engine.domination_n() if config.include_bound_n else None
    else:
        ns, bound_n = engine.n_values()

    records = [
        engine.run_trial(n, t) for n in ns for t in range(config.trials)
    ]
    aggregates = {str(n): _aggregate(records, n, config.trials) for n in ns}

    target = 1.0 - config.delta - 0.02
    events = []
    if kind == "consistency" or kind == "robustness":
        if bound_n is not None:
            lo = aggregates[str(bound_n)]["wilson_excess"][0]
            events.append(
                {
                    "name": "excess_within_limit_at_bound_n",
                    "observed": lo,
                    "requirement": target,
                    "passed": bool(lo >= target),
                }
            )
    if kind == "consistency":
        sched_medians = [aggregates[str(n)]["median_excess"] for n in config.n_schedule]
        decreasing = all(b < a for a, b in zip(sched_medians, sched_medians[1:]))
        events.append(
            {
                "name": "median_excess_strictly_decreasing",
                "observed": sched_medians,
                "requirement": "strict decrease over n_schedule",
                "passed": bool(decreasing),
            }
        )
    if kind == "robustness":
        worst = max(r.loss_shift_max for r in records)
        limit = engine.xi / 2.0 + 1e-12
        events.append(
            {
                "name": "mean_loss_shift_within_half_xi",
                "observed": worst,
                "requirement": limit,
                "passed": bool(worst <= limit),
            }
        )
    if kind == "domination":
        if bound_n is not None:
            lo = aggregates[str(bound_n)]["wilson_domination"][0]
            events.append(
                {
                    "name": "bad_weights_below_threshold_at_bound_n",
                    "observed": lo,
                    "requirement": target,
                    "passed": bool(lo >= target),
                }
            )

    passed = all(e["passed"] for e in events)
    table = bound_table(engine.inputs)
    summary = {
        "run": kind,
        "config": config.to_config(),
        "certificate": {
            "gamma": engine.cert.gamma,
            "rho": engine.cert.rho,
            "v_bound": engine.cert.v_bound,
        },
        "stationary": engine.pi.tolist(),
        "gamma_star": engine.gamma_star,
        "expected_losses": engine.exp_losses.tolist(),
        "vol_quarter": engine.inputs.vol_quarter,
        "vol_half": engine.inputs.vol_half,
        "bounds": {
            name: {
                "ne_required": r.ne_required,
                "n_required": r.n_required,
                "vacuous": r.vacuous,
                "guarantee_excess": r.guarantee_excess,
            }
            for name, r in table.items()
        },
        "bound_n": bound_n,
        "n_values": ns,
        "aggregates": aggregates,
        "events": events,
        "passed": passed,
    }
    return RunReport(kind=kind, records=records, summary=summary, passed=passed)


def run_consistency(config: ExperimentConfig) -> RunReport:
    """Clean-data excess-loss run; asserts the guarantee frequency at the
    bound-scale n and a strictly decreasing median excess over the
    schedule."""
    if config.noise is not None and config.noise.xi != 0.0:
        raise ValueError("consistency runs take clean data; use run_robustness for noise")
    return _run(config, "consistency")


def run_robustness(config: ExperimentConfig) -> RunReport:
    """Noisy-target run; asserts the widened excess guarantee at bound
    scale and the mean-loss shift inequality on every trial."""
    if config.noise is None:
        raise ValueError("robustness runs need a noise spec (xi = 0 is allowed)")
    return _run(config, "robustness")


def run_weight_domination(config: ExperimentConfig) -> RunReport:
    """Bad-hypothesis weight run; asserts the domination frequency at the
    domination bound's n."""
    return _run(config, "domination")


def write_report(records: list, path: str | Path) -> None:
    lines = [",".join(_REPORT_COLUMNS)]
    for r in records:
        lines.append(
            ",".join(
                (
                    str(r.n),
                    str(r.trial),
                    str(r.path_seed),
                    repr(r.loss_aggregate),
                    repr(r.gamma_star),
                    repr(r.excess),
                    repr(r.excess_limit),
                    str(r.event_excess),
                    repr(r.log_sup_bad),
                    repr(r.log_threshold),
                    str(r.event_domination),
                    repr(r.loss_shift_max),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary(summary: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")


def run_and_write(config: ExperimentConfig, kind: str, out_dir: str | Path) -> RunReport:
    runner = {
        "consistency": run_consistency,
        "robustness": run_robustness,
        "domination": run_weight_domination,
    }[kind]
    report = runner(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report.records, out / "report.csv")
    write_summary(report.summary, out / "summary.json")
    return report
