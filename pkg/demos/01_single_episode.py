"""
Anatomy of a single simulated episode
=====================================

One 20-second episode with two teleoperated vehicles, driven by the
delay-threshold heuristic.  We watch one vehicle tick by tick — which
segmentation mode the orchestrator picked, what the application-layer
delay looked like, and how that turned into QoS and reward — and then
check the episode's byte-conservation ledger.
"""

from tdsim import ExperimentConfig, run_episode
from tdsim.harness import policy_from_config

# A small, fast configuration: two vehicles, 20 s of simulated time,
# one orchestrator decision every 100 ms (so 200 decision ticks).
cfg = ExperimentConfig(
    policy="D-S",
    num_vehicles=2,
    episode_duration_s=20.0,
    master_seed=7,
)

policy = policy_from_config(cfg)
result = run_episode(cfg, policy, phase="test", episode_index=0)

# Each record is one (tick, vehicle) observation. Follow vehicle 0
# through the first two seconds.
print("tick  mode  delay[ms]  PRP    QoS  reward")
for rec in result.records:
    if rec.vehicle_id != 0 or rec.step_index >= 20:
        continue
    print(
        f"{rec.step_index:4d}  {('R', 'SC', 'SA')[rec.mode]:>4}"
        f"  {rec.app.delay_mean_s * 1e3:9.2f}  {rec.prp:5.3f}"
        f"  {rec.qos:3d}  {rec.reward:6.3f}"
    )

# Per-vehicle episode summaries: the same data the campaign harness
# writes to per_episode.csv.
print("\nvehicle  mean_reward  mean_QoS  p95_delay[ms]  mode shares (R/SC/SA)")
for vid in sorted(result.per_vehicle):
    stats = result.per_vehicle[vid]
    shares = "/".join(f"{s:.2f}" for s in stats.action_shares())
    print(
        f"{vid:7d}  {stats.mean_reward:11.3f}  {stats.mean_qos:8.3f}"
        f"  {stats.p95_delay_s * 1e3:13.1f}  {shares}"
    )

# Every byte the application offered must be accounted for: delivered,
# still queued, or dropped.  The simulator tracks this exactly.
print("\nbyte conservation:")
for vid, totals in sorted(result.byte_totals.items()):
    print(
        f"  vehicle {vid}: offered={totals.offered_bytes:,}  "
        f"served={totals.served_bytes:,}  dropped={totals.dropped_bytes:,}  "
        f"residual={totals.residual_bytes:,}  conserved={totals.conserved()}"
    )
assert all(t.conserved() for t in result.byte_totals.values())
