"""Command-line interface.

Every subcommand reads and writes the text formats of ``rmlearn.formats``.
Exit codes: 0 success, 1 usage or malformed input, 2 no machine within the
node bound, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import envs, experiments
from .evaluate import train_test_split, trajectory_loglik, transfer_evaluate
from .formats import (FormatError, dump_negatives, dump_policy, dump_ptp, dump_rm,
                      dump_trajectories, load_trajectories, read_mdp, read_negatives, read_ptp,
                      read_rm)
from .forward import ConvergenceError, soft_bellman_solve
from .irl import ResidualError, extract_rewards
from .learn import LearningError, build_learned_product_policy, learn_minimal_models
from .machine import MachineError, RewardMachine, as_model
from .mdp import MdpError, build_product
from .negex import compress_negatives, exact_negatives, statistical_negatives
from .ptp import estimate_ptp, induce_exact_ptp, simulate_demonstrations
from .solve import DEFAULT_CAP, InfeasibleError

EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERIC = 1, 2, 3

ENVS = ("patrol", "patrol-transfer", "hallway", "stack", "stack-avoid", "maze")
TABLES = ("table1", "table2", "table5", "table6", "table7")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ helpers

def _env(args):
    """(mdp, machine or None) from ``--env`` or ``--mdp`` / ``--rm``."""
    if args.env and args.mdp:
        raise UsageError("give either --env or --mdp, not both")
    if args.env:
        if args.env == "maze":
            mdp, rm = envs.load_maze(), envs.water_machine()
        elif args.env == "patrol":
            mdp, rm = envs.make_patrol(p_slip=args.p_slip, reward=args.reward)
        elif args.env == "patrol-transfer":
            mdp, rm = envs.make_patrol_transfer(p_slip=args.p_slip, reward=args.reward)
        elif args.env == "hallway":
            mdp, rm = envs.make_hallway(p_slip=args.p_slip, reward=args.reward)
        else:
            mdp, rm = envs.make_blockworld(args.env.replace("-", "_"))
    elif args.mdp:
        mdp, rm = read_mdp(args.mdp), None
    else:
        raise UsageError("an environment is required: --env NAME or --mdp FILE")
    if getattr(args, "rm", None):
        rm = read_rm(args.rm, mdp.n_props)
    return mdp, rm


def _rewarded(rm, what: str) -> RewardMachine:
    if not isinstance(rm, RewardMachine):
        raise UsageError(f"{what} needs a machine with rewards")
    return rm


def _emit(args, lines) -> None:
    text = "\n".join(lines) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _tsv(rows: list[dict], timing: bool) -> list[str]:
    if not rows:
        return []
    keys = [k for k in rows[0] if timing or not k.endswith("_s")]
    for r in rows[1:]:
        keys += [k for k in r if k not in keys and (timing or not k.endswith("_s"))]
    out = ["\t".join(keys)]
    out += ["\t".join(str(r.get(k, "")) for k in keys) for r in rows]
    return out


# -------------------------------------------------------------- subcommands

def cmd_solve_forward(args):
    mdp, rm = _env(args)
    rm = _rewarded(rm, "solve-forward")
    policy = soft_bellman_solve(build_product(mdp, rm), args.lam, tol=args.tol_forward)
    _info(f"iterations={policy.iterations} product_states={policy.product.n_states}")
    _emit(args, dump_policy(policy))


def cmd_simulate(args):
    mdp, rm = _env(args)
    rm = _rewarded(rm, "simulate")
    policy = soft_bellman_solve(build_product(mdp, rm), args.lam)
    demos = simulate_demonstrations(mdp, rm.model, policy, args.n_traj, args.horizon, args.seed)
    _emit(args, dump_trajectories(demos))


def cmd_build_ptp(args):
    mdp, rm = _env(args)
    if args.demos:
        ptp = estimate_ptp(load_trajectories(args.demos, mdp), mdp, args.depth,
                           compress=args.non_stutter)
    else:
        rm = _rewarded(rm, "an exact prefix tree (no --demos)")
        policy = soft_bellman_solve(build_product(mdp, rm), args.lam)
        ptp = induce_exact_ptp(mdp, rm.model, policy, args.depth, compress=args.non_stutter)
    _info(f"words={len(ptp.table)} exact={ptp.exact}")
    _emit(args, dump_ptp(ptp, mdp.propositions))


def cmd_extract_negatives(args):
    mdp, _ = _env(args)
    ptp = read_ptp(args.ptp, mdp.propositions)
    neg = exact_negatives(ptp, args.tol) if ptp.exact else statistical_negatives(ptp, args.alpha)
    if args.non_stutter:
        neg = compress_negatives(neg)
    _info(f"negatives={len(neg)}")
    _emit(args, dump_negatives(neg, mdp.propositions))


def cmd_learn_rm(args):
    mdp, _ = _env(args)
    neg = read_negatives(args.negatives, mdp.propositions)
    res = learn_minimal_models(neg, args.umax, mdp.n_props, args.non_stutter,
                               maxsat_mode=args.maxsat, cap=args.cap)
    _info(f"nodes={res.n_nodes} models={len(res.models)} cost={res.cost} capped={res.capped}")
    if args.models_dir:
        d = Path(args.models_dir)
        d.mkdir(parents=True, exist_ok=True)
        for k, m in enumerate(res.models):
            (d / f"model_{k}.rm").write_text("\n".join(dump_rm(m, mdp.propositions)) + "\n")
    _emit(args, dump_rm(res.models[0], mdp.propositions))


def cmd_extract_reward(args):
    mdp, _ = _env(args)
    model = as_model(read_rm(args.model, mdp.n_props))
    ptp = read_ptp(args.ptp, mdp.propositions)
    learned = build_learned_product_policy(model, ptp, mdp, args.mode, args.tol)
    ex = extract_rewards(learned.product, learned, args.lam, clip=args.clip,
                         max_residual=args.max_residual)
    for line in ex.lines():
        _info(line)
    _emit(args, dump_rm(ex.machine, mdp.propositions))


def cmd_evaluate(args):
    mdp, _ = _env(args)
    rm = _rewarded(read_rm(args.machine, mdp.n_props), "evaluate")
    demos = load_trajectories(args.demos, mdp)
    if args.held_out:
        demos = train_test_split(demos, 0.9, args.seed)[1]
    policy = soft_bellman_solve(build_product(mdp, rm), args.lam)
    ll = trajectory_loglik(mdp, rm.model, policy, demos)
    _emit(args, ll.lines())


def cmd_transfer(args):
    mdp, _ = _env(args)
    if bool(args.target_env) == bool(args.target_mdp):
        raise UsageError("give exactly one of --target-env and --target-mdp")
    target = (read_mdp(args.target_mdp) if args.target_mdp else
              experiments.load_task(args.target_env)[0] if args.target_env != "patrol-transfer"
              else envs.make_patrol_transfer(p_slip=args.p_slip)[0])
    model = as_model(read_rm(args.model, mdp.n_props))
    ptp = read_ptp(args.ptp, mdp.propositions)
    ll = transfer_evaluate(model, ptp, mdp, target, load_trajectories(args.demos, target),
                           args.lam)
    _emit(args, ll.lines())


def cmd_reproduce(args):
    seed = args.seed
    if args.table == "table1":
        rows = experiments.table1(tol=args.tol)
    elif args.table == "table2":
        rows = experiments.table2(tol=args.tol, cap=args.cap)
    elif args.table in ("table5", "table6"):
        fn = experiments.table5 if args.table == "table5" else experiments.table6
        kw = {"alpha": args.alpha, "depth": args.depth or 10, "u_max": args.umax or 3}
        if args.sizes:
            kw["sizes"] = args.sizes
        rows = fn(seed=seed, **kw)
    else:
        rows = experiments.table7(seed=seed, alpha=args.alpha, depth=args.depth or 10,
                                  bounds=tuple(range(2, (args.umax or 4) + 1)),
                                  n_rollouts=args.rollouts, baselines=not args.no_baselines)
    _emit(args, _tsv(rows, not args.no_timing))


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--depth", type=int, default=None, help="prefix depth")
    g.add_argument("--umax", type=int, default=None, help="node bound")
    g.add_argument("--alpha", type=float, default=0.05, help="certification level")
    g.add_argument("--non-stutter", action="store_true", help="assume a non-stuttering machine")
    g.add_argument("--maxsat", action="store_true", help="weighted MaxSAT instead of hard SAT")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tol", type=float, default=1e-6, help="exact-mode policy tolerance")
    g.add_argument("--out", default=None, help="output file (default stdout)")
    g.add_argument("--lam", type=float, default=1.0, help="entropy temperature")

    envp = argparse.ArgumentParser(add_help=False)
    e = envp.add_argument_group("environment")
    e.add_argument("--env", choices=ENVS)
    e.add_argument("--mdp", help="MDP file")
    e.add_argument("--p-slip", type=float, default=0.1, help="gridworld slip probability")
    e.add_argument("--reward", type=float, default=1.0, help="gridworld patrol reward")

    p = _Parser(prog="rmlearn", description="Learn reward machines from policies and demos.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_, with_env=True):
        sp = sub.add_parser(name, parents=[common] + ([envp] if with_env else []), help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("solve-forward", cmd_solve_forward, "MaxEnt-optimal product policy")
    sp.add_argument("--rm", help="reward machine file (overrides the environment's)")
    sp.add_argument("--tol-forward", type=float, default=1e-10)

    sp = add("simulate", cmd_simulate, "sample demonstrations")
    sp.add_argument("--rm")
    sp.add_argument("--n-traj", type=int, default=1000)
    sp.add_argument("--horizon", type=int, default=20)

    sp = add("build-ptp", cmd_build_ptp, "exact or empirical prefix tree policy")
    sp.add_argument("--rm")
    sp.add_argument("--demos", help="trajectory file; omit for the exact tree")

    sp = add("extract-negatives", cmd_extract_negatives, "negative examples from a prefix tree")
    sp.add_argument("--ptp", required=True)

    sp = add("learn-rm", cmd_learn_rm, "minimal consistent machine models")
    sp.add_argument("--negatives", required=True)
    sp.add_argument("--cap", type=int, default=DEFAULT_CAP)
    sp.add_argument("--models-dir", help="also write every model found here")

    sp = add("extract-reward", cmd_extract_reward, "rewards for a learned model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--ptp", required=True)
    sp.add_argument("--mode", choices=("exact", "aggregate"), default="aggregate")
    sp.add_argument("--clip", type=float, default=None)
    sp.add_argument("--max-residual", type=float, default=None)

    sp = add("evaluate", cmd_evaluate, "log-likelihood of demonstrations")
    sp.add_argument("--machine", required=True, help="reward machine with rewards")
    sp.add_argument("--demos", required=True)
    sp.add_argument("--held-out", action="store_true", help="score the seeded 10%% split only")

    sp = add("transfer", cmd_transfer, "re-plan a learned model on a relabeled MDP")
    sp.add_argument("--model", required=True)
    sp.add_argument("--ptp", required=True, help="prefix tree from the source MDP")
    sp.add_argument("--target-env", choices=ENVS)
    sp.add_argument("--target-mdp")
    sp.add_argument("--demos", required=True, help="demonstrations on the target")

    sp = add("reproduce", cmd_reproduce, "regenerate a benchmark table as TSV", with_env=False)
    sp.add_argument("table", choices=TABLES)
    sp.add_argument("--cap", type=int, default=DEFAULT_CAP)
    sp.add_argument("--sizes", type=int, nargs="+")
    sp.add_argument("--rollouts", type=int, default=10_000)
    sp.add_argument("--no-baselines", action="store_true")
    sp.add_argument("--no-timing", action="store_true",
                    help="drop wall-clock columns so reruns are byte-identical")
    return p


def _defaults(args) -> None:
    if args.command in ("build-ptp",) and args.depth is None:
        raise UsageError("--depth is required")
    if args.command == "learn-rm" and args.umax is None:
        raise UsageError("--umax is required")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _defaults(args)
        args.fn(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rmlearn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LearningError, InfeasibleError) as exc:
        print(f"rmlearn: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConvergenceError, ResidualError, np.linalg.LinAlgError) as exc:
        print(f"rmlearn: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, MdpError, MachineError, OSError, ValueError) as exc:
        print(f"rmlearn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
