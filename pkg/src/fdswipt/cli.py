"""Command-line front end.

Global flags come before the subcommand, e.g.::

    fdswipt --seed 7 --out results simulate --method antenna_split_sca

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 degraded run (a sweep row lost more than 1% of its trials).
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import drl
from .allocation import allocate_antennas, serialize_config
from .channel import sample_channel
from .config import dump_config, load_config
from .harness import (
    ExperimentScenario,
    compare_methods,
    gain_table,
    run_monte_carlo,
    trial_seed,
    write_results_csv,
)
from .metrics import harvested_power, info_rate
from .numerics import ContractError, DomainError, NumericalFailureError
from .channel import partition
from .precoding import ScaSettings, sca_precoding
from .drl import AgentHyperparams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DEGRADED = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fdswipt",
        description="Full-duplex MIMO SWIPT link simulator")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--trials", type=int, help="Monte-Carlo trials per sweep point")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_sweep_args(p):
        p.add_argument("--m", type=int, help="antennas at device 1")
        p.add_argument("--n", type=int, help="antennas at device 2")
        p.add_argument("--ps-dbm", help="comma-separated sweep, e.g. 20,30,40")
        p.add_argument("--raw-objective", action="store_true",
                       help="mix harvested watts into the objective unnormalized")
        p.add_argument("--max-gain", action="store_true",
                       help="seed the allocation with the maximum-gain pair")

    p_sim = sub.add_parser("simulate", help="run one method over a power sweep")
    add_sweep_args(p_sim)
    p_sim.add_argument("--method", required=True)
    p_sim.add_argument("--policy", help="policy artifact (drl_policy method)")
    p_sim.add_argument("--workers", type=int)

    p_cmp = sub.add_parser("compare", help="paired comparison; last method is the baseline")
    add_sweep_args(p_cmp)
    p_cmp.add_argument("--methods", required=True,
                       help="comma-separated method list, baseline last")
    p_cmp.add_argument("--policy", help="policy artifact if drl_policy participates")
    p_cmp.add_argument("--workers", type=int)

    p_alloc = sub.add_parser("allocate", help="print the greedy allocation for a seeded channel")
    add_sweep_args(p_alloc)
    p_alloc.add_argument("--ps-dbm-point", type=float, default=30.0)
    p_alloc.add_argument("--trial", type=int, default=0)

    p_prec = sub.add_parser("precode", help="run the relaxation precoder on a seeded channel")
    add_sweep_args(p_prec)
    p_prec.add_argument("--ps-dbm-point", type=float, default=30.0)
    p_prec.add_argument("--trial", type=int, default=0)

    p_train = sub.add_parser("train", help="train the hybrid learner")
    add_sweep_args(p_train)
    p_train.add_argument("--ps-dbm-point", type=float, default=30.0)
    p_train.add_argument("--episodes", type=int)
    p_train.add_argument("--steps", type=int)
    p_train.add_argument("--freeze-channel", action="store_true")
    p_train.add_argument("--full-scale", action="store_true",
                         help="published 2500x500 profile instead of the desk profile")

    p_eval = sub.add_parser("eval-policy", help="roll a policy artifact into result rows")
    add_sweep_args(p_eval)
    p_eval.add_argument("--policy", required=True)
    p_eval.add_argument("--workers", type=int)
    return parser


def _resolve(args):
    config = load_config(args.config)
    exp = config["experiment"]
    if args.seed is not None:
        exp["seed"] = args.seed
    if args.trials is not None:
        exp["trials"] = args.trials
    for attr, key in (("m", "m"), ("n", "n")):
        value = getattr(args, attr, None)
        if value is not None:
            exp[key] = value
    if getattr(args, "ps_dbm", None):
        exp["ps_dbm"] = [float(tok) for tok in args.ps_dbm.split(",")]
    if getattr(args, "workers", None) is not None:
        exp["workers"] = args.workers
    if getattr(args, "raw_objective", False):
        config["budget"]["raw_objective"] = True
    if getattr(args, "max_gain", False):
        config["allocation"]["prefer_max_gain"] = True
    if getattr(args, "episodes", None) is not None:
        config["drl"]["episodes"] = args.episodes
    if getattr(args, "steps", None) is not None:
        config["drl"]["steps_per_episode"] = args.steps
    if getattr(args, "freeze_channel", False):
        config["drl"]["freeze_channel"] = True
    if getattr(args, "full_scale", False):
        config["drl"]["episodes"] = 2500
        config["drl"]["steps_per_episode"] = 500
    return config


def _scenario(config, method, policy_path=None):
    exp = config["experiment"]
    return ExperimentScenario(
        method=method,
        m=exp["m"], n=exp["n"], ps_dbm=tuple(exp["ps_dbm"]),
        trials=exp["trials"], master_seed=exp["seed"],
        rician_k_db=config["channel"]["rician_k_db"],
        si_attenuation_db=config["channel"]["si_attenuation_db"],
        noise_psd_dbm_hz=config["channel"]["noise_psd_dbm_hz"],
        bandwidth_hz=config["channel"]["bandwidth_hz"],
        alpha=config["budget"]["alpha"],
        p_q_dbm=config["budget"]["p_q_dbm"],
        raw_objective=config["budget"]["raw_objective"],
        prefer_max_gain=config["allocation"]["prefer_max_gain"],
        sca=ScaSettings(**config["sca"]),
        ts_tau=config["time_switching"]["tau"],
        power_grid=exp["power_grid"],
        policy_path=policy_path,
        rollout_steps=exp["rollout_steps"],
        workers=exp["workers"],
    )


def _write_sidecar(config, extras, path):
    payload = dict(config)
    payload["telemetry"] = extras
    with open(path, "w") as fh:
        dump_config(payload, fh)


def _cmd_simulate(args, config, out_dir):
    scenario = _scenario(config, args.method, policy_path=args.policy)
    csv_path = out_dir / "results.csv"
    sidecar = {}
    rows = run_monte_carlo(scenario, csv_path=str(csv_path), sidecar=sidecar)
    _write_sidecar(config, sidecar, out_dir / "results.config.yaml")
    if not args.quiet:
        with open(csv_path) as fh:
            sys.stdout.write(fh.read())
        print(f"wrote {csv_path}")
    if any(row.degraded for row in rows):
        print("warning: degraded run (more than 1% trial failures)", file=sys.stderr)
        return EXIT_DEGRADED
    return EXIT_OK


def _cmd_compare(args, config, out_dir):
    methods = [tok.strip() for tok in args.methods.split(",")]
    scenarios = [_scenario(config, method, policy_path=args.policy) for method in methods]
    csv_path = out_dir / "comparison.csv"
    rows = compare_methods(scenarios, csv_path=str(csv_path))
    _write_sidecar(config, {"methods": methods}, out_dir / "comparison.config.yaml")
    if not args.quiet:
        print(gain_table(rows))
        print(f"wrote {csv_path}")
    return EXIT_OK


def _seeded_channel(config, args):
    exp = config["experiment"]
    scenario = _scenario(config, "antenna_split_equal_power")
    params = scenario.channel_params()
    return scenario, sample_channel(params, trial_seed(exp["seed"], args.trial))


def _cmd_allocate(args, config, out_dir):
    scenario, chan = _seeded_channel(config, args)
    budget = scenario.budget(args.ps_dbm_point)
    cfg = allocate_antennas(chan, budget.p_s, budget.p_q,
                            prefer_max_gain=scenario.prefer_max_gain)
    print(serialize_config(cfg))
    return EXIT_OK


def _cmd_precode(args, config, out_dir):
    scenario, chan = _seeded_channel(config, args)
    budget = scenario.budget(args.ps_dbm_point)
    sigma2 = scenario.channel_params().sigma2
    cfg = allocate_antennas(chan, budget.p_s, budget.p_q,
                            prefer_max_gain=scenario.prefer_max_gain)
    sub = partition(chan, cfg, sigma2)
    pair, _, _, trace = sca_precoding(sub, budget, scenario.sca)
    trace_path = out_dir / "sca_trace.csv"
    with open(trace_path, "w") as fh:
        trace.to_csv(fh)
    print(f"config {serialize_config(cfg)}")
    print(f"rate {info_rate(sub, pair):.6f} bps/Hz, "
          f"harvested {harvested_power(sub, pair):.6e} W, "
          f"outer iterations {len(trace.points)}")
    print(f"wrote {trace_path}")
    return EXIT_OK


def _cmd_train(args, config, out_dir):
    exp = config["experiment"]
    drl_cfg = config["drl"]
    scenario = _scenario(config, "antenna_split_equal_power")
    params = scenario.channel_params()
    budget = scenario.budget(args.ps_dbm_point)
    hp = AgentHyperparams(
        episodes=drl_cfg["episodes"], steps_per_episode=drl_cfg["steps_per_episode"],
        batch=drl_cfg["batch"])
    artifact, curve = drl.train(params, budget, hp, seed=exp["seed"],
                                freeze_channel=drl_cfg["freeze_channel"],
                                quiet=args.quiet)
    policy_path = out_dir / "policy.txt"
    curve_path = out_dir / "training_curve.csv"
    drl.save_policy(artifact, str(policy_path))
    with open(curve_path, "w") as fh:
        drl.write_curve_csv(curve, fh)
    _write_sidecar(config, {"episodes": len(curve)}, out_dir / "train.config.yaml")
    if not args.quiet:
        print(f"wrote {policy_path} and {curve_path}")
    return EXIT_OK


def _cmd_eval_policy(args, config, out_dir):
    scenario = _scenario(config, "drl_policy", policy_path=args.policy)
    csv_path = out_dir / "policy_eval.csv"
    sidecar = {}
    rows = run_monte_carlo(scenario, csv_path=str(csv_path), sidecar=sidecar)
    _write_sidecar(config, sidecar, out_dir / "policy_eval.config.yaml")
    if not args.quiet:
        with open(csv_path) as fh:
            sys.stdout.write(fh.read())
    if any(row.degraded for row in rows):
        return EXIT_DEGRADED
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "allocate": _cmd_allocate,
    "precode": _cmd_precode,
    "train": _cmd_train,
    "eval-policy": _cmd_eval_policy,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve(args)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args, config, out_dir)
    except ContractError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailureError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
