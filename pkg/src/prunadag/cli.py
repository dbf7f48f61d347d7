"""Command-line entry point.

Subcommands:

* ``run <config>``      -- execute the experiment grid from a config file
* ``ablation <config>`` -- same, with the relevant-only ablation added
* ``verify <dir>``      -- run the theory checks on a stored bundle
* ``prune <solution>``  -- prune a stored solution vector over a sweep
"""

from __future__ import annotations

import argparse
import sys

from . import harness, problems, pruning, verify


def _apply_overrides(cfg, args):
    if args.out is not None:
        cfg.out_dir = args.out
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.master_seed is not None:
        cfg.master_seed = args.master_seed
    return cfg


def _add_run_args(sub):
    sub.add_argument("config", help="experiment config file")
    sub.add_argument("--jobs", type=int, default=None,
                     help="parallel workers (default from config)")
    sub.add_argument("--out", default=None, help="output directory override")
    sub.add_argument("--master-seed", type=int, default=None,
                     help="master seed override")


def _float_list(raw):
    return [float(tok) for tok in raw.replace(",", " ").split()]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="prunadag",
        description="Pruning-aware adaptive gradient experiment harness")
    subs = parser.add_subparsers(dest="command", required=True)

    _add_run_args(subs.add_parser("run", help="run an experiment config"))
    _add_run_args(subs.add_parser(
        "ablation", help="run with the relevant-only ablation added"))

    p_verify = subs.add_parser(
        "verify", help="run theory checks on stored traces")
    p_verify.add_argument("trace_dir")

    p_prune = subs.add_parser("prune", help="prune a stored solution vector")
    p_prune.add_argument("solution", help="solution file (binary or CSV)")
    group = p_prune.add_mutually_exclusive_group(required=True)
    group.add_argument("--sigma", type=_float_list,
                       help="comma-separated sparsity fractions")
    group.add_argument("--delta", type=_float_list,
                       help="comma-separated magnitude thresholds")
    p_prune.add_argument("--config", default=None,
                         help="experiment config supplying the problem "
                              "(enables rho/omega; seed index 0 instance)")

    args = parser.parse_args(argv)

    if args.command in ("run", "ablation"):
        try:
            cfg = harness.load_config(args.config)
        except harness.ConfigError as err:
            print(f"config error: {err}", file=sys.stderr)
            return 2
        cfg = _apply_overrides(cfg, args)
        if args.command == "run":
            result = harness.run_experiment(cfg)
        else:
            result = harness.ablation_relevant_only(cfg)
        done = len(result.records) - len(result.failures)
        print(f"completed {done} runs "
              f"({len(result.failures)} diverged) -> {cfg.out_dir}")
        return 0

    if args.command == "verify":
        outcomes = verify.verify_bundle(args.trace_dir)
        if not outcomes:
            print("no verifiable runs found (no theory trace present)")
            return 1
        all_ok = True
        for o in outcomes:
            status = "PASS" if o.ok else "FAIL"
            print(f"{status} {o.optimizer} seed={o.seed} "
                  f"descent={'ok' if o.descent_ok else 'VIOLATED'} "
                  f"gradient_bound={'ok' if o.gradient_bound_ok else 'VIOLATED'}")
            all_ok &= o.ok
        return 0 if all_ok else 1

    # prune
    x = problems.load_solution(args.solution)
    problem = None
    if args.config is not None:
        cfg = harness.load_config(args.config)
        problem = harness.build_problem(cfg, 0).problem
    sigmas = args.sigma or []
    deltas = args.delta or []
    header = "target_kind,target_value,achieved_sparsity,nonzeros"
    if problem is not None:
        header += ",rho,omega"
    print(header)
    for kind, values in (("sigma", sigmas), ("delta", deltas)):
        for v in values:
            if kind == "sigma":
                xp, _ = pruning.prune_to_sparsity(x, v)
            else:
                xp = pruning.prune_threshold(x, v)
            sparsity = float((xp == 0.0).mean())
            line = f"{kind},{v!r},{sparsity!r},{int((xp != 0).sum())}"
            if problem is not None:
                rho, omega = pruning.robustness(x, xp, problem)
                line += f",{rho!r},{omega!r}"
            print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
