"""Campaign orchestration: train, test, CSV emission, and replay checks.

A campaign writes one self-contained run directory:

    config.yaml           resolved configuration (reproduces the run)
    training_progress.csv one row per training episode (learners only)
    checkpoints/          trained parameters (learners only)
    per_tick.csv          every test decision window
    per_episode.csv       per-vehicle test episode aggregates
    summary.csv           one aggregate row for this configuration

Episode seeds derive from (master seed, phase, episode index), so test
channels are identical no matter how long training ran. During the test
phase policy parameters are checksummed every episode; any drift aborts.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .agents import DqlAgent, Policy, PpoAgent, make_policy
from .app import MODE_NAMES
from .config import ExperimentConfig
from .engine import ContractViolation, derive_seed
from .metrics import _STATE_DIMS
from .simulation import EpisodeResult, EpisodeRunner

PER_TICK_HEADER = (
    "episode,step,vehicle_id,mode,delay_mean_s,delay_min_s,delay_max_s,"
    "prp,qos,qoe,reward,sinr_db,mcs,prb_util"
).split(",")
PER_EPISODE_HEADER = (
    "episode,vehicle_id,mean_reward,mean_qos,mean_qoe,p50_delay_s,p95_delay_s,"
    "p50_prp,share_R,share_SC,share_SA"
).split(",")
SUMMARY_IDENTIFIERS = (
    "policy",
    "num_vehicles",
    "tx_power_dbm",
    "state_config",
    "profile",
    "master_seed",
)
SUMMARY_AGGREGATES = (
    "mean_reward",
    "mean_qos",
    "mean_qoe",
    "p50_delay_s",
    "p95_delay_s",
    "p50_prp",
    "share_R",
    "share_SC",
    "share_SA",
)
SUMMARY_HEADER = SUMMARY_IDENTIFIERS + SUMMARY_AGGREGATES

LEARNING_POLICIES = ("DQL", "PPO")


@dataclass
class CampaignPaths:
    out_dir: str
    config: str
    per_tick: str
    per_episode: str
    summary: str
    training_progress: str | None
    checkpoints: str | None


def policy_learns(policy_name: str) -> bool:
    return policy_name in LEARNING_POLICIES


def policy_from_config(cfg: ExperimentConfig) -> Policy:
    return make_policy(
        cfg.policy,
        _STATE_DIMS[cfg.state_config_enum],
        derive_seed(cfg.master_seed, "policy"),
        cfg.total_explore_steps(policy_learns(cfg.policy)),
        dql=cfg.dql,
        ppo=cfg.ppo,
        heuristic=cfg.heuristic,
    )


def restore_policy(cfg: ExperimentConfig, checkpoint_dir: str) -> Policy:
    if cfg.policy == "DQL":
        return DqlAgent.restore(checkpoint_dir)
    if cfg.policy == "PPO":
        return PpoAgent.restore(checkpoint_dir)
    return policy_from_config(cfg)


def run_episode(
    cfg: ExperimentConfig, policy: Policy, phase: str, episode_index: int
) -> EpisodeResult:
    if phase not in ("train", "test"):
        raise ValueError("phase must be 'train' or 'test'")
    seed = derive_seed(cfg.master_seed, phase, episode_index)
    runner = EpisodeRunner(
        cfg, policy, training=(phase == "train"), episode_seed=seed, episode_index=episode_index
    )
    return runner.run()


def _tick_rows(result: EpisodeResult):
    for rec in result.records:
        yield (
            result.episode_index,
            rec.step_index,
            rec.vehicle_id,
            MODE_NAMES[rec.mode],
            rec.app.delay_mean_s,
            rec.app.delay_min_s,
            rec.app.delay_max_s,
            rec.prp,
            rec.qos,
            rec.qoe,
            rec.reward,
            rec.link.mean_sinr_db,
            rec.link.mean_mcs_index,
            rec.link.prb_utilization,
        )


def _episode_rows(result: EpisodeResult):
    for vid in sorted(result.per_vehicle):
        stats = result.per_vehicle[vid]
        share_r, share_sc, share_sa = stats.action_shares()
        yield (
            result.episode_index,
            vid,
            stats.mean_reward,
            stats.mean_qos,
            stats.mean_qoe,
            stats.p50_delay_s,
            stats.p95_delay_s,
            stats.p50_prp,
            share_r,
            share_sc,
            share_sa,
        )


def run_campaign(
    cfg: ExperimentConfig, out_dir: str, policy: Policy | None = None
) -> CampaignPaths:
    """Execute the training then test phases, writing one run directory.

    A pre-built policy may be injected (e.g. to evaluate an instrumented or
    already-trained agent); by default the policy comes from the config.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = CampaignPaths(
        out_dir=out_dir,
        config=os.path.join(out_dir, "config.yaml"),
        per_tick=os.path.join(out_dir, "per_tick.csv"),
        per_episode=os.path.join(out_dir, "per_episode.csv"),
        summary=os.path.join(out_dir, "summary.csv"),
        training_progress=None,
        checkpoints=None,
    )
    cfg.save_yaml(paths.config)
    if policy is None:
        policy = policy_from_config(cfg)

    n_train = cfg.resolved_train_episodes(policy.learns)
    if policy.learns:
        paths.training_progress = os.path.join(out_dir, "training_progress.csv")
        paths.checkpoints = os.path.join(out_dir, "checkpoints")
        diag_keys = sorted(policy.diagnostics())
        with open(paths.training_progress, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "mean_reward", "mean_qos", "mean_qoe"] + diag_keys)
            for episode in range(n_train):
                result = run_episode(cfg, policy, "train", episode)
                diags = policy.diagnostics()
                writer.writerow(
                    [
                        episode,
                        result.mean_over_vehicles("mean_reward"),
                        result.mean_over_vehicles("mean_qos"),
                        result.mean_over_vehicles("mean_qoe"),
                    ]
                    + [diags[k] for k in diag_keys]
                )
        policy.save(paths.checkpoints)

    frozen = policy.parameter_checksum()
    with open(paths.per_tick, "w", newline="") as tick_fh, open(
        paths.per_episode, "w", newline=""
    ) as ep_fh:
        tick_writer = csv.writer(tick_fh)
        tick_writer.writerow(PER_TICK_HEADER)
        ep_writer = csv.writer(ep_fh)
        ep_writer.writerow(PER_EPISODE_HEADER)
        for episode in range(cfg.resolved_test_episodes()):
            result = run_episode(cfg, policy, "test", episode)
            if policy.parameter_checksum() != frozen:
                raise ContractViolation(
                    f"policy parameters changed during test episode {episode}"
                )
            tick_writer.writerows(_tick_rows(result))
            ep_writer.writerows(_episode_rows(result))

    row = summarize_run(out_dir)
    _write_summary_csv(paths.summary, [row])
    return paths


def _read_csv_columns(path: str, expected_header: tuple | list) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"empty CSV: {path}")
        for col in expected_header:
            if col not in header:
                raise ValueError(f"missing column '{col}' in {path}")
        columns: dict[str, list[str]] = {col: [] for col in header}
        for rec in reader:
            for col, value in zip(header, rec):
                columns[col].append(value)
    return columns


def summarize_run(run_dir: str) -> dict:
    """One aggregate row for a finished run directory.

    Scalar aggregates are means over (episode, vehicle) rows; the delay and
    reliability quantiles pool every test window so the medians describe
    windows, not episodes.
    """
    cfg = ExperimentConfig.from_yaml(os.path.join(run_dir, "config.yaml"))
    episodes = _read_csv_columns(os.path.join(run_dir, "per_episode.csv"), PER_EPISODE_HEADER)
    ticks = _read_csv_columns(os.path.join(run_dir, "per_tick.csv"), PER_TICK_HEADER)

    def col_mean(columns, name):
        values = np.asarray(columns[name], dtype=float)
        if values.size == 0:
            raise ValueError(f"no rows under column '{name}' in {run_dir}")
        return float(np.mean(values))

    delays = np.asarray(ticks["delay_mean_s"], dtype=float)
    prps = np.asarray(ticks["prp"], dtype=float)
    row = {
        "policy": cfg.policy,
        "num_vehicles": cfg.num_vehicles,
        "tx_power_dbm": cfg.radio.tx_power_dbm,
        "state_config": cfg.state_config,
        "profile": cfg.profile,
        "master_seed": cfg.master_seed,
        "mean_reward": col_mean(episodes, "mean_reward"),
        "mean_qos": col_mean(episodes, "mean_qos"),
        "mean_qoe": col_mean(episodes, "mean_qoe"),
        "p50_delay_s": float(np.quantile(delays, 0.5)),
        "p95_delay_s": float(np.quantile(delays, 0.95)),
        "p50_prp": float(np.quantile(prps, 0.5)),
        "share_R": col_mean(episodes, "share_R"),
        "share_SC": col_mean(episodes, "share_SC"),
        "share_SA": col_mean(episodes, "share_SA"),
    }
    return row


def _write_summary_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for row in rows:
            writer.writerow([row[col] for col in SUMMARY_HEADER])


def is_run_dir(path: str) -> bool:
    return os.path.isfile(os.path.join(path, "per_episode.csv")) and os.path.isfile(
        os.path.join(path, "config.yaml")
    )


def summarize_tree(in_dir: str) -> tuple[str, list[dict]]:
    """Summarize a run directory, or every run directory directly under it.

    Writes (and returns the path of) summary.csv in in_dir with one row per
    configuration.
    """
    if is_run_dir(in_dir):
        rows = [summarize_run(in_dir)]
    else:
        run_dirs = sorted(
            entry.path for entry in os.scandir(in_dir) if entry.is_dir() and is_run_dir(entry.path)
        )
        if not run_dirs:
            raise ValueError(f"no run directories found under {in_dir}")
        rows = [summarize_run(d) for d in run_dirs]
    out_path = os.path.join(in_dir, "summary.csv")
    _write_summary_csv(out_path, rows)
    return out_path, rows


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def replay_check(run_dir: str) -> tuple[bool, str]:
    """Re-run the test phase from config + checkpoint and byte-compare CSVs."""
    cfg = ExperimentConfig.from_yaml(os.path.join(run_dir, "config.yaml"))
    checkpoint_dir = os.path.join(run_dir, "checkpoints")
    if policy_learns(cfg.policy) and not os.path.isdir(checkpoint_dir):
        return False, f"missing checkpoint directory {checkpoint_dir}"
    policy = restore_policy(cfg, checkpoint_dir)

    tick_rows: list[tuple] = []
    episode_rows: list[tuple] = []
    for episode in range(cfg.resolved_test_episodes()):
        result = run_episode(cfg, policy, "test", episode)
        tick_rows.extend(_tick_rows(result))
        episode_rows.extend(_episode_rows(result))

    for name, header, rows in (
        ("per_tick.csv", PER_TICK_HEADER, tick_rows),
        ("per_episode.csv", PER_EPISODE_HEADER, episode_rows),
    ):
        path = os.path.join(run_dir, name)
        with open(path, newline="") as fh:
            stored = fh.read()
        fresh = _csv_text(header, rows)
        if stored.replace("\r\n", "\n") != fresh:
            stored_lines = stored.replace("\r\n", "\n").splitlines()
            fresh_lines = fresh.splitlines()
            for i, (a, b) in enumerate(zip(stored_lines, fresh_lines)):
                if a != b:
                    return False, f"{name} line {i + 1}: stored {a!r} vs replay {b!r}"
            return False, f"{name}: row count {len(stored_lines)} vs {len(fresh_lines)}"
    return True, "replay matches stored outputs"
