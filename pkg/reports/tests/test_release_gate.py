"""Release gate: figures from real campaign outputs, counted and reproducible.

The input tree is generated through the simulator's public CLI (three static
policies at two fleet sizes, test-only, short episodes), so this exercises
the real CSV contract end to end without importing the simulator package.
"""

import shutil
import subprocess
import time

import pytest

from tdreports.figures import GROUPINGS, ReportSpec, build_figure, group_value, render
from tdreports.loading import discover_runs

POLICIES = ("C-R", "C-SC", "C-SA")
FLEETS = (1, 3)


@pytest.fixture(scope="module")
def benchmark_tree(tmp_path_factory):
    tdsim = shutil.which("tdsim")
    assert tdsim, "simulator CLI not on PATH; install the tdsim package first"
    root = tmp_path_factory.mktemp("benchmark")
    config = root / "eval.yaml"
    config.write_text("episode_duration_s: 4.0\ntest_episodes: 3\nmaster_seed: 5\n")
    for policy in POLICIES:
        for fleet in FLEETS:
            out = root / f"{policy}_{fleet}v"
            subprocess.run(
                [
                    tdsim, "run", "--config", str(config),
                    "--policy", policy, "--num-vehicles", str(fleet),
                    "--tx-power-dbm", "23.0" if fleet == 1 else "30.0",
                    "--out", str(out),
                ],
                check=True,
                capture_output=True,
                text=True,
            )
    return root


def test_release_gate_report_generation(benchmark_tree, tmp_path, capsys):
    started = time.monotonic()
    out_a = tmp_path / "figs_a"
    out_b = tmp_path / "figs_b"
    paths_a = render(ReportSpec(str(benchmark_tree), str(out_a)))
    paths_b = render(ReportSpec(str(benchmark_tree), str(out_b)))

    files_ok = len(paths_a) == 5 * len(GROUPINGS) * 2

    runs = discover_runs(str(benchmark_tree))
    counts = {}
    for grouping in GROUPINGS:
        fig = build_figure(runs, "reward_bar", grouping)
        groups = {group_value(run, grouping) for run in runs}
        counts[grouping] = (len(fig.axes[0].patches), len(POLICIES) * len(groups))
    bars_ok = all(found == expected for found, expected in counts.values())

    identical = all(
        open(a, "rb").read() == open(b, "rb").read() for a, b in zip(paths_a, paths_b)
    )

    elapsed = time.monotonic() - started
    ok = files_ok and bars_ok and identical
    with capsys.disabled():
        print(
            f"[report-generation] {'PASS' if ok else 'FAIL'} "
            f"{len(paths_a)} files (5 kinds x {len(GROUPINGS)} groupings x 2 formats); "
            f"bar counts {dict((g, c[0]) for g, c in counts.items())} == policies x groups; "
            f"rerun byte-identical: {identical}; {elapsed:.1f}s"
        )
    assert ok, f"report generation gate failed: files={files_ok} bars={counts} identical={identical}"
