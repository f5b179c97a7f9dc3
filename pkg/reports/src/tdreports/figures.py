"""Figure construction and deterministic rendering.

Five figure kinds cover the campaign outputs: mean-reward and mean-QoS bars,
window-delay and reception-ratio boxplots, and stacked mode-share columns.
Every kind is drawn once per grouping key (vehicle count, transmit power,
state configuration) with policies as the series. Rendering is pinned down
tightly enough (fixed style, salted SVG ids, stripped date/software
metadata) that rerunning on the same inputs reproduces every file byte for
byte.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .loading import RunData, discover_runs

FIGURE_KINDS = ("reward_bar", "qos_bar", "delay_box", "prp_box", "action_hist")
GROUPINGS = ("num_vehicles", "tx_power", "state_config")

# Stable policy ordering for legends; unknown names sort after these.
POLICY_ORDER = ("C-R", "C-SC", "C-SA", "D-S", "DQL", "PPO")

GROUP_LABELS = {
    "num_vehicles": "vehicles",
    "tx_power": "tx power [dBm]",
    "state_config": "state configuration",
}
KIND_LABELS = {
    "reward_bar": "mean reward",
    "qos_bar": "mean QoS",
    "delay_box": "window mean delay [s]",
    "prp_box": "packet reception ratio",
    "action_hist": "mode share",
}

MODE_COLORS = {"R": "#4c72b0", "SC": "#dd8452", "SA": "#55a868"}
SERIES_COLORS = (
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
    "#937860", "#da8bc3", "#8c8c8c",
)

STYLE = {
    "figure.figsize": (7.0, 4.2),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 11,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.axisbelow": True,
    "svg.hashsalt": "tdreports",
}
_SAVE_METADATA = {"svg": {"Date": None}, "png": {"Software": None}}


@dataclass
class ReportSpec:
    in_dir: str
    out_dir: str
    kinds: tuple[str, ...] = FIGURE_KINDS
    formats: tuple[str, ...] = ("svg", "png")

    def __post_init__(self) -> None:
        for kind in self.kinds:
            if kind not in FIGURE_KINDS:
                raise ValueError(f"unknown figure kind '{kind}' (choose from {FIGURE_KINDS})")
        if not self.kinds:
            raise ValueError("no figure kinds selected")
        for fmt in self.formats:
            if fmt not in ("svg", "png"):
                raise ValueError(f"unknown output format '{fmt}'")


def policy_sort_key(policy: str):
    try:
        return (POLICY_ORDER.index(policy), policy)
    except ValueError:
        return (len(POLICY_ORDER), policy)


def group_value(run: RunData, grouping: str):
    if grouping == "num_vehicles":
        return run.num_vehicles
    if grouping == "tx_power":
        return run.tx_power_dbm
    if grouping == "state_config":
        return run.state_config
    raise ValueError(f"unknown grouping '{grouping}' (choose from {GROUPINGS})")


def group_label(value) -> str:
    return f"{value:g}" if isinstance(value, float) else str(value)


def series_layout(runs: list[RunData], grouping: str):
    """Sorted group values and policies spanning the runs."""
    groups = sorted({group_value(r, grouping) for r in runs})
    policies = sorted({r.policy for r in runs}, key=policy_sort_key)
    return groups, policies


def matching_runs(runs, policy, grouping, group):
    return [r for r in runs if r.policy == policy and group_value(r, grouping) == group]


def bar_table(runs: list[RunData], metric: str, grouping: str) -> dict:
    """Mean `metric` per (policy, group); combos without runs are NaN."""
    groups, policies = series_layout(runs, grouping)
    values = np.full((len(policies), len(groups)), np.nan)
    for i, policy in enumerate(policies):
        for j, group in enumerate(groups):
            hits = matching_runs(runs, policy, grouping, group)
            if hits:
                values[i, j] = float(np.mean([r.metrics[metric] for r in hits]))
    return {"groups": groups, "policies": policies, "values": values}


def _bar_positions(n_groups: int, n_series: int):
    width = 0.8 / n_series
    offsets = [-0.4 + width * (s + 0.5) for s in range(n_series)]
    return width, offsets


def _grouped_bars(ax, table, ylabel: str, grouping: str) -> None:
    groups, policies, values = table["groups"], table["policies"], table["values"]
    width, offsets = _bar_positions(len(groups), len(policies))
    for i, policy in enumerate(policies):
        for j in range(len(groups)):
            if np.isnan(values[i, j]):
                continue
            ax.bar(
                j + offsets[i],
                values[i, j],
                width=width,
                color=SERIES_COLORS[i % len(SERIES_COLORS)],
                label=policy if j == np.flatnonzero(~np.isnan(values[i]))[0] else None,
            )
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels([group_label(g) for g in groups])
    ax.set_xlabel(GROUP_LABELS[grouping])
    ax.set_ylabel(ylabel)
    ax.legend()


def box_stats(sample: np.ndarray, label: str) -> dict:
    """bxp-style stats: box edges p25/p75, median line, whiskers p5/p95."""
    q5, q25, q50, q75, q95 = np.quantile(sample, [0.05, 0.25, 0.50, 0.75, 0.95])
    return {
        "label": label,
        "whislo": q5,
        "q1": q25,
        "med": q50,
        "q3": q75,
        "whishi": q95,
        "fliers": [],
    }


def _boxes(ax, runs, attr: str, ylabel: str, grouping: str) -> None:
    groups, policies = series_layout(runs, grouping)
    width, offsets = _bar_positions(len(groups), len(policies))
    for i, policy in enumerate(policies):
        stats, positions = [], []
        for j, group in enumerate(groups):
            pooled = [getattr(r, attr) for r in matching_runs(runs, policy, grouping, group)]
            if not pooled:
                continue
            stats.append(box_stats(np.concatenate(pooled), group_label(group)))
            positions.append(j + offsets[i])
        if not stats:
            continue
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        artists = ax.bxp(
            stats,
            positions=positions,
            widths=width * 0.9,
            patch_artist=True,
            showfliers=False,
            medianprops={"color": "black"},
        )
        for box in artists["boxes"]:
            box.set_facecolor(color)
        ax.plot([], [], color=color, linewidth=6, label=policy)
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels([group_label(g) for g in groups])
    ax.set_xlabel(GROUP_LABELS[grouping])
    ax.set_ylabel(ylabel)
    ax.legend()


def _mode_stacks(ax, runs, grouping: str) -> None:
    groups, policies = series_layout(runs, grouping)
    width, offsets = _bar_positions(len(groups), len(policies))
    positions, labels = [], []
    for j, group in enumerate(groups):
        for i, policy in enumerate(policies):
            hits = matching_runs(runs, policy, grouping, group)
            if not hits:
                continue
            x = j + offsets[i]
            bottom = 0.0
            for mode in ("R", "SC", "SA"):
                share = float(np.mean([r.metrics[f"share_{mode}"] for r in hits]))
                ax.bar(
                    x, share, width=width, bottom=bottom,
                    color=MODE_COLORS[mode],
                    label=mode if (i == 0 and j == 0) else None,
                )
                bottom += share
            positions.append(x)
            labels.append(f"{policy}\n{group_label(group)}")
    ax.set_xticks(positions)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_xlabel(f"policy / {GROUP_LABELS[grouping]}")
    ax.set_ylabel(KIND_LABELS["action_hist"])
    ax.set_ylim(0.0, 1.05)
    ax.legend(title="mode")


def build_figure(runs: list[RunData], kind: str, grouping: str):
    if grouping not in GROUPINGS:
        raise ValueError(f"unknown grouping '{grouping}' (choose from {GROUPINGS})")
    fig, ax = plt.subplots()
    if kind == "reward_bar":
        _grouped_bars(ax, bar_table(runs, "mean_reward", grouping), KIND_LABELS[kind], grouping)
    elif kind == "qos_bar":
        _grouped_bars(ax, bar_table(runs, "mean_qos", grouping), KIND_LABELS[kind], grouping)
    elif kind == "delay_box":
        _boxes(ax, runs, "tick_delay_s", KIND_LABELS[kind], grouping)
    elif kind == "prp_box":
        _boxes(ax, runs, "tick_prp", KIND_LABELS[kind], grouping)
    elif kind == "action_hist":
        _mode_stacks(ax, runs, grouping)
    else:
        raise ValueError(f"unknown figure kind '{kind}' (choose from {FIGURE_KINDS})")
    ax.set_title(f"{KIND_LABELS[kind]} by {GROUP_LABELS[grouping]}")
    fig.tight_layout()
    return fig


def config_digest(runs: list[RunData]) -> str:
    """Eight hex chars identifying the set of run configurations."""
    identity = "|".join(
        sorted(
            f"{r.policy},{r.num_vehicles},{r.tx_power_dbm:g},{r.state_config}" for r in runs
        )
    )
    return hashlib.sha256(identity.encode()).hexdigest()[:8]


def render(spec: ReportSpec) -> list[str]:
    """Write every requested (kind, grouping) figure; returns the file paths."""
    runs = discover_runs(spec.in_dir)
    os.makedirs(spec.out_dir, exist_ok=True)
    digest = config_digest(runs)
    paths = []
    with matplotlib.rc_context(STYLE):
        for kind in spec.kinds:
            for grouping in GROUPINGS:
                fig = build_figure(runs, kind, grouping)
                for fmt in spec.formats:
                    path = os.path.join(spec.out_dir, f"{kind}_{grouping}_{digest}.{fmt}")
                    fig.savefig(path, format=fmt, metadata=_SAVE_METADATA[fmt])
                    paths.append(path)
                plt.close(fig)
    return paths
