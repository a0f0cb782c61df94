import json
import math

import numpy as np
import pytest

from bwa_markov.fixtures import misleading_prior_space, reference_chain, reference_space
from bwa_markov.harness import (
    ExperimentConfig,
    bound_inputs_for,
    run_and_write,
    run_consistency,
    run_robustness,
    run_weight_domination,
    wilson_interval,
    write_report,
    write_summary,
)
from bwa_markov.noise import NoiseSpec

Z95 = 1.959963984540054


def small_config(**overrides) -> ExperimentConfig:
    kwargs = dict(
        chain=reference_chain(),
        space=reference_space(),
        trials=30,
        n_schedule=(50, 150, 400),
        include_bound_n=False,
        base_seed=99,
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


class TestWilson:
    def test_all_successes(self):
        lo, hi = wilson_interval(10, 10)
        # closed form at p = 1: lower = n / (n + z^2)
        assert lo == pytest.approx(10.0 / (10.0 + Z95 * Z95), rel=1e-12)
        assert hi == pytest.approx(1.0)

    def test_no_successes_symmetry(self):
        lo0, hi0 = wilson_interval(0, 10)
        lo1, hi1 = wilson_interval(10, 10)
        assert lo0 == pytest.approx(0.0, abs=1e-12)
        assert hi0 == pytest.approx(1.0 - lo1, rel=1e-12)

    def test_half(self):
        lo, hi = wilson_interval(5, 10)
        center = (0.5 + Z95 * Z95 / 20.0) / (1.0 + Z95 * Z95 / 10.0)
        assert (lo + hi) / 2.0 == pytest.approx(center, rel=1e-12)
        assert 0.18 < lo < 0.25 and 0.75 < hi < 0.82

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            wilson_interval(11, 10)
        with pytest.raises(ValueError):
            wilson_interval(0, 0)

    def test_interval_contains_estimate(self):
        for s, n in [(3, 17), (199, 200), (1, 400)]:
            lo, hi = wilson_interval(s, n)
            assert lo <= s / n <= hi


class TestConfig:
    def test_trials_floor(self):
        with pytest.raises(ValueError, match="30"):
            small_config(trials=10)

    def test_schedule_strictly_increasing(self):
        with pytest.raises(ValueError):
            small_config(n_schedule=(100, 100, 200))
        with pytest.raises(ValueError):
            small_config(n_schedule=(200, 100))

    def test_json_round_trip(self, tmp_path):
        cfg = small_config(noise=NoiseSpec(xi=0.1, kind="two_point", seed=5))
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg.to_config()))
        again = ExperimentConfig.from_json(path)
        assert again.n_schedule == cfg.n_schedule
        assert again.noise == cfg.noise
        assert again.base_seed == cfg.base_seed
        assert np.array_equal(again.chain.transition, cfg.chain.transition)
        assert again.space.ids == cfg.space.ids

    def test_named_fixtures_in_config(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"chain": "reference", "space": "misleading", "trials": 30}))
        cfg = ExperimentConfig.from_json(path)
        assert cfg.space.prior[0] == pytest.approx(0.02)


class TestBoundInputsBuilder:
    def test_reference_values(self):
        inp = bound_inputs_for(reference_chain(), reference_space(), 0.3, 0.1, 0.5)
        assert inp.rho == pytest.approx(0.4, abs=1e-6)
        assert inp.gamma == pytest.approx(1.5, rel=1e-6)
        assert inp.capacity.loss_range == pytest.approx(0.36, abs=1e-12)
        assert inp.capacity.lipschitz == pytest.approx(1.0)
        assert inp.vol_quarter == pytest.approx(0.4)
        assert inp.vol_half == pytest.approx(0.4)
        assert inp.finite_size == 5


class TestRuns:
    def test_consistency_small(self):
        report = run_consistency(small_config())
        assert report.kind == "consistency"
        assert len(report.records) == 30 * 3
        assert report.summary["gamma_star"] == pytest.approx(0.05, abs=1e-12)
        names = [e["name"] for e in report.summary["events"]]
        assert names == ["median_excess_strictly_decreasing"]

    def test_consistency_rejects_noise(self):
        with pytest.raises(ValueError):
            run_consistency(small_config(noise=NoiseSpec(xi=0.1, kind="two_point", seed=1)))

    def test_robustness_requires_noise(self):
        with pytest.raises(ValueError):
            run_robustness(small_config())

    def test_domination_small(self):
        report = run_weight_domination(small_config())
        assert report.kind == "domination"
        for n in (150, 400):
            agg = report.summary["aggregates"][str(n)]
            assert agg["freq_domination"] >= 0.9

    def test_report_deterministic(self, tmp_path):
        a = run_consistency(small_config())
        b = run_consistency(small_config())
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_report(a.records, pa)
        write_report(b.records, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_zero_noise_robustness_matches_consistency_bytes(self, tmp_path):
        clean = run_consistency(small_config())
        zero = run_robustness(small_config(noise=NoiseSpec(xi=0.0, kind="two_point", seed=5)))
        pa, pb = tmp_path / "clean.csv", tmp_path / "zero.csv"
        write_report(clean.records, pa)
        write_report(zero.records, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_noise_changes_records(self, tmp_path):
        clean = run_consistency(small_config())
        noisy = run_robustness(small_config(noise=NoiseSpec(xi=0.2, kind="two_point", seed=5)))
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_report(clean.records, pa)
        write_report(noisy.records, pb)
        assert pa.read_bytes() != pb.read_bytes()

    def test_uniform_noise_rejected_at_scale(self):
        cfg = small_config(
            noise=NoiseSpec(xi=0.1, kind="uniform", seed=1),
            n_schedule=(50, 6_000_000),
        )
        with pytest.raises(ValueError, match="materialized"):
            run_robustness(cfg)

    def test_misleading_prior_needs_more_steps(self):
        fair = run_consistency(small_config())
        skewed = run_consistency(small_config(space=misleading_prior_space()))
        n0 = str(50)
        assert (
            skewed.summary["aggregates"][n0]["median_excess"]
            > fair.summary["aggregates"][n0]["median_excess"]
        )

    def test_summary_json_serializable(self, tmp_path):
        report = run_consistency(small_config())
        path = tmp_path / "summary.json"
        write_summary(report.summary, path)
        loaded = json.loads(path.read_text())
        assert loaded["passed"] == report.passed
        assert loaded["run"] == "consistency"

    def test_run_and_write_outputs(self, tmp_path):
        report = run_and_write(small_config(), "consistency", tmp_path / "out")
        assert (tmp_path / "out" / "report.csv").exists()
        assert (tmp_path / "out" / "summary.json").exists()
        header = (tmp_path / "out" / "report.csv").read_text().splitlines()[0]
        assert header.split(",")[:4] == ["n", "trial", "path_seed", "loss_aggregate"]
        assert len((tmp_path / "out" / "report.csv").read_text().splitlines()) == 1 + len(report.records)


class TestRecordSemantics:
    def test_excess_nonnegative_for_one_sided_space(self):
        report = run_consistency(small_config())
        assert all(r.excess >= -1e-12 for r in report.records)

    def test_domination_threshold_matches_formula(self):
        report = run_consistency(small_config())
        r = report.records[0]
        expect = (r.n * 0.3 / 6.0) * math.log(0.5) - math.log(0.4)
        assert r.log_threshold == pytest.approx(expect, rel=1e-12)

    def test_seeds_vary_by_trial_and_n(self):
        report = run_consistency(small_config())
        seeds = {(r.n, r.trial): r.path_seed for r in report.records}
        assert len(set(seeds.values())) == len(seeds)
