"""Command-line front end: run campaigns, summarize outputs, verify replays."""

from __future__ import annotations

import argparse
import os
import sys

from .config import ExperimentConfig
from .harness import replay_check, run_campaign, summarize_tree


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdsim",
        description="Teleoperated-driving cell simulator with adaptive LiDAR modes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train (if applicable) and test one configuration")
    run_p.add_argument("--config", help="YAML config file; flags below override it")
    run_p.add_argument("--policy", help="C-R, C-SC, C-SA, D-S, DQL, or PPO")
    run_p.add_argument("--num-vehicles", type=int, dest="num_vehicles")
    run_p.add_argument("--tx-power-dbm", type=float, dest="tx_power_dbm")
    run_p.add_argument("--state-config", dest="state_config")
    run_p.add_argument("--seed", type=int, help="master seed")
    run_p.add_argument("--profile", choices=("full", "smoke"))
    run_p.add_argument("--out", help="output directory (default: runs/<auto name>)")

    sum_p = sub.add_parser("summarize", help="aggregate one run dir or a tree of run dirs")
    sum_p.add_argument("--in", dest="in_dir", required=True)

    rep_p = sub.add_parser("replay-check", help="re-run the test phase and diff the CSVs")
    rep_p.add_argument("--in", dest="in_dir", required=True)
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_yaml(args.config)
    else:
        cfg = ExperimentConfig()
    overrides = {}
    for field in ("policy", "num_vehicles", "state_config", "profile"):
        value = getattr(args, field)
        if value is not None:
            overrides[field] = value
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if overrides or args.tx_power_dbm is not None:
        raw = cfg.to_dict()
        raw.update(overrides)
        if args.tx_power_dbm is not None:
            raw["radio"]["tx_power_dbm"] = args.tx_power_dbm
        cfg = ExperimentConfig.from_dict(raw)
    return cfg


def _default_out_dir(cfg: ExperimentConfig) -> str:
    name = (
        f"{cfg.policy}_{cfg.num_vehicles}v_{cfg.radio.tx_power_dbm:g}dBm_"
        f"{cfg.state_config}_seed{cfg.master_seed}"
    )
    return os.path.join("runs", name)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        cfg = _config_from_args(args)
        out_dir = args.out or _default_out_dir(cfg)
        paths = run_campaign(cfg, out_dir)
        print(f"run complete: {paths.out_dir}")
        with open(paths.summary) as fh:
            print(fh.read().rstrip())
        return 0
    if args.command == "summarize":
        out_path, rows = summarize_tree(args.in_dir)
        print(f"wrote {out_path} ({len(rows)} configuration(s))")
        for row in rows:
            line = " ".join(
                f"{key}={row[key]}"
                for key in ("policy", "num_vehicles", "tx_power_dbm", "state_config")
            )
            print(f"  {line} mean_reward={row['mean_reward']:.4f} mean_qos={row['mean_qos']:.4f}")
        return 0
    if args.command == "replay-check":
        ok, message = replay_check(args.in_dir)
        print(("PASS: " if ok else "FAIL: ") + message)
        return 0 if ok else 1
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
