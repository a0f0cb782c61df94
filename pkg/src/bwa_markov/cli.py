"""Command-line interface.

Subcommands: simulate (draw a path to CSV), train (weights from a path),
predict (posterior-mean prediction at a point), bounds (sample-size
table), experiment (repeated-trial runs writing report.csv and
summary.json), verify (acceptance criteria).  experiment and verify exit
nonzero when an asserted event fails; everything else exits nonzero only
on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bwa
from .acceptance import CRITERIA, format_line, run_all
from .bounds import BoundInputs, bound_table
from .chain import FiniteChainSpec, Trajectory, sample_path
from .fixtures import named_chain, named_space
from .harness import ExperimentConfig, bound_inputs_for, run_and_write
from .hypotheses import FiniteTableSpace, SpaceCapacity, load_space
from .noise import NoiseSpec, inject_noise


def _chain_arg(value: str) -> FiniteChainSpec:
    if Path(value).exists():
        return FiniteChainSpec.load(value)
    return named_chain(value)


def _space_arg(value: str):
    if Path(value).exists():
        return load_space(value)
    return named_space(value)


def _cmd_simulate(args) -> int:
    chain = _chain_arg(args.chain)
    traj = sample_path(chain, args.n, args.seed)
    if args.xi > 0.0:
        space = _space_arg(args.space) if args.space else None
        noise = NoiseSpec(
            xi=args.xi, kind=args.noise_kind, seed=args.noise_seed,
            reference_id=args.noise_reference,
        )
        traj = inject_noise(traj, noise, space)
    traj.to_csv(args.out)
    print(f"wrote {args.n} steps to {args.out}")
    return 0


def _load_traj(path: str) -> Trajectory:
    return Trajectory.from_csv(path)


def _cmd_train(args) -> int:
    space = _space_arg(args.space)
    if not isinstance(space, FiniteTableSpace):
        print("train needs a finite table space", file=sys.stderr)
        return 2
    if args.traj:
        traj = _load_traj(args.traj)
    else:
        if args.n is None:
            print("train needs --traj or --n", file=sys.stderr)
            return 2
        chain = _chain_arg(args.chain)
        traj = sample_path(chain, args.n, args.seed)
    state = bwa.train(space, traj, args.alpha)
    bwa.write_weights(state, space.prior, args.out)
    masses = bwa.posterior_masses(state, space.prior)
    top = np.argsort(masses)[::-1][:3]
    shown = ", ".join(f"{space.ids[i]}={masses[i]:.4f}" for i in top)
    print(f"wrote weights for {space.size} hypotheses to {args.out} (top: {shown})")
    return 0


def _cmd_predict(args) -> int:
    space = _space_arg(args.space)
    x = float(args.x)
    if isinstance(space, FiniteTableSpace):
        if not args.weights:
            print("finite-space predict needs --weights", file=sys.stderr)
            return 2
        state = bwa.read_weights(args.weights, args.alpha)
        result = bwa.predict(state, space, np.array([x]))
    else:
        if not args.traj:
            print("affine-space predict needs --traj", file=sys.stderr)
            return 2
        traj = _load_traj(args.traj)
        if args.method == "grid":
            result = bwa.predict_grid(space, traj, args.alpha, x)
        else:
            result = bwa.predict_mcmc(
                space, traj, args.alpha, x,
                samples=args.samples, burn_in=args.burn_in,
                thin=args.thin, seed=args.seed,
            )
    payload = {
        "value": result.value,
        "method": result.method,
        "mc_error": result.mc_error,
        "acceptance_rate": result.acceptance_rate,
        "notes": list(result.notes),
    }
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_bounds(args) -> int:
    if args.chain and args.space:
        chain = _chain_arg(args.chain)
        space = _space_arg(args.space)
        if not isinstance(space, FiniteTableSpace):
            print("bounds from a space need a finite table space", file=sys.stderr)
            return 2
        inputs = bound_inputs_for(
            chain, space, args.eps, args.delta, args.alpha, noise_range=args.xi
        )
    else:
        required = ("loss_range", "lipschitz", "gamma", "rho", "v_bound")
        missing = [name for name in required if getattr(args, name) is None]
        if missing:
            print(f"bounds need --chain/--space or explicit {missing}", file=sys.stderr)
            return 2
        cap = SpaceCapacity(
            loss_range=args.loss_range,
            lipschitz=args.lipschitz,
            holder_exponent=args.holder_exponent,
            input_dim=args.input_dim,
            log_cover_coeff=args.cover_coeff,
        )
        inputs = BoundInputs(
            eps=args.eps, delta=args.delta, alpha=args.alpha,
            rho=args.rho, gamma=args.gamma, v_bound=args.v_bound,
            capacity=cap, finite_size=args.finite_size,
            vol_quarter=args.vol_quarter, vol_half=args.vol_half,
            noise_range=args.xi,
        )
    table = {
        name: {
            "ne_required": r.ne_required,
            "n_required": r.n_required,
            "vacuous": r.vacuous,
            "guarantee_excess": r.guarantee_excess,
            "terms": r.terms,
        }
        for name, r in bound_table(inputs).items()
    }
    text = json.dumps(table, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote bound table to {args.out}")
    else:
        print(text)
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    report = run_and_write(config, args.kind, args.out_dir)
    for event in report.summary["events"]:
        status = "pass" if event["passed"] else "FAIL"
        print(f"{status} {event['name']}: observed {event['observed']} vs {event['requirement']}")
    print(f"report.csv and summary.json written to {args.out_dir}")
    return 0 if report.passed else 1


def _cmd_verify(args) -> int:
    indices = args.criterion if args.criterion else None
    results = run_all(indices)
    for r in results:
        print(format_line(r))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bwa-markov",
        description="Weighted aggregation over Markov-chain training data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a chain path and write it as CSV")
    p.add_argument("--chain", default="reference", help="built-in name or JSON path")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--xi", type=float, default=0.0, help="target-noise range")
    p.add_argument("--noise-kind", default="two_point", choices=("uniform", "two_point", "adversarial"))
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--noise-reference", default=None, help="reference hypothesis id for adversarial noise")
    p.add_argument("--space", default=None, help="space for adversarial noise")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("train", help="train weights on a path")
    p.add_argument("--chain", default="reference")
    p.add_argument("--space", default="reference")
    p.add_argument("--traj", default=None, help="existing path CSV")
    p.add_argument("--n", type=int, default=None, help="draw a fresh path of this length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("predict", help="posterior-mean prediction at a point")
    p.add_argument("--space", default="reference")
    p.add_argument("--weights", default=None, help="weights CSV from train")
    p.add_argument("--traj", default=None, help="path CSV, for affine spaces")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--x", required=True)
    p.add_argument("--method", default="mcmc", choices=("mcmc", "grid"))
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("bounds", help="sample-size requirements for every guarantee")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--chain", default=None)
    p.add_argument("--space", default=None)
    p.add_argument("--loss-range", dest="loss_range", type=float, default=None)
    p.add_argument("--lipschitz", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--v-bound", dest="v_bound", type=float, default=None)
    p.add_argument("--vol-quarter", dest="vol_quarter", type=float, default=None)
    p.add_argument("--vol-half", dest="vol_half", type=float, default=None)
    p.add_argument("--finite-size", dest="finite_size", type=int, default=None)
    p.add_argument("--holder-exponent", dest="holder_exponent", type=float, default=2.0)
    p.add_argument("--input-dim", dest="input_dim", type=int, default=1)
    p.add_argument("--cover-coeff", dest="cover_coeff", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("experiment", help="repeated-trial run with report and summary")
    p.add_argument("kind", choices=("consistency", "robustness", "domination"))
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("verify", help="run acceptance criteria")
    p.add_argument(
        "--criterion", type=int, action="append", default=None,
        metavar="N", help=f"criterion number 1..{len(CRITERIA)}; repeatable",
    )
    p.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
