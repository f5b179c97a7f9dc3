"""Desk-scale simulator of a 5G teleoperated-driving cell.

A discrete-event radio/application model where an orchestrator picks a
LiDAR segmentation mode (raw / conservative / aggressive) per vehicle every
100 ms, trading perceived sensing quality against network load.  Constant,
heuristic, and reinforcement-learning policies are provided, along with a
campaign harness that writes reproducible CSV outputs.
"""

from .agents import (
    NUM_ACTIONS,
    ConstantPolicy,
    DelayHeuristicPolicy,
    DqlAgent,
    DqlConfig,
    HeuristicConfig,
    Policy,
    PpoAgent,
    PpoConfig,
    make_policy,
)
from .app import SegmentationMode, SegmentationProfile
from .channel import RadioConfig
from .config import ExperimentConfig
from .harness import (
    replay_check,
    restore_policy,
    run_campaign,
    run_episode,
    summarize_run,
    summarize_tree,
)
from .metrics import (
    KpiThresholds,
    StateConfig,
    StateScales,
    StepObservation,
    assemble_state,
    build_observation,
    chamfer_distance,
    prp,
    qoe,
    qos,
    reward,
)
from .simulation import ByteTotals, EpisodeResult, EpisodeRunner

__version__ = "0.1.0"

__all__ = [
    "NUM_ACTIONS",
    "ByteTotals",
    "ConstantPolicy",
    "DelayHeuristicPolicy",
    "DqlAgent",
    "DqlConfig",
    "EpisodeResult",
    "EpisodeRunner",
    "ExperimentConfig",
    "HeuristicConfig",
    "KpiThresholds",
    "Policy",
    "PpoAgent",
    "PpoConfig",
    "RadioConfig",
    "SegmentationMode",
    "SegmentationProfile",
    "StateConfig",
    "StateScales",
    "StepObservation",
    "assemble_state",
    "build_observation",
    "chamfer_distance",
    "make_policy",
    "prp",
    "qoe",
    "qos",
    "replay_check",
    "restore_policy",
    "reward",
    "run_campaign",
    "run_episode",
    "summarize_run",
    "summarize_tree",
    "__version__",
]
