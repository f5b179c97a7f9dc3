"""Experiment configuration: nested dataclasses with YAML round-trip.

A config file mirrors the dataclass tree section by section; CLI flags
override file values and the fully resolved config is echoed into every
output directory so a run can be reproduced from its artifacts alone.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import yaml

from .agents import POLICY_NAMES, DqlConfig, HeuristicConfig, PpoConfig
from .app import MODE_NAMES, SegmentationMode, SegmentationProfile
from .channel import MobilityConfig, RadioConfig
from .metrics import KpiThresholds, StateConfig, StateScales
from .ran import McsEntry, McsTable

FULL_TRAIN_BUDGET = 10_000
TEST_BUDGET = 500
SMOKE_TRAIN_EPISODES = 200
SMOKE_TEST_EPISODES = 20


@dataclass
class RanConfig:
    tti_s: float = 0.001
    core_delay_s: float = 0.005
    buffer_capacity_bytes: int = 2_000_000
    efficiency_cap: float = 7.4
    efficiency_overhead: float = 0.75
    outage_snr_db: float = -5.0
    # Optional explicit MCS table: list of {min_snr_db, efficiency, index}.
    mcs_table: tuple = ()

    def __post_init__(self) -> None:
        if self.tti_s <= 0 or self.core_delay_s < 0:
            raise ValueError("bad timing parameters")
        if self.buffer_capacity_bytes <= 0:
            raise ValueError("buffer capacity must be positive")

    def build_mcs_table(self) -> McsTable:
        if self.mcs_table:
            entries = tuple(
                McsEntry(
                    mcs_index=int(row["index"]),
                    min_snr_db=float(row["min_snr_db"]),
                    spectral_efficiency=float(row["efficiency"]),
                )
                for row in self.mcs_table
            )
            return McsTable(entries, self.efficiency_overhead, self.outage_snr_db)
        return McsTable.default(
            self.efficiency_cap, self.efficiency_overhead, self.outage_snr_db
        )


@dataclass
class ExperimentConfig:
    policy: str = "C-SC"
    num_vehicles: int = 5
    state_config: str = "FULL"
    initial_mode: str = "SC"
    episode_duration_s: float = 80.0
    update_period_s: float = 0.1
    profile: str = "full"
    train_episodes: int | None = None
    test_episodes: int | None = None
    master_seed: int = 1
    channel_trace: str | None = None
    frame_size_trace: str | None = None
    radio: RadioConfig = field(default_factory=RadioConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    ran: RanConfig = field(default_factory=RanConfig)
    app: SegmentationProfile = field(default_factory=SegmentationProfile)
    thresholds: KpiThresholds = field(default_factory=KpiThresholds)
    scales: StateScales = field(default_factory=StateScales)
    dql: DqlConfig = field(default_factory=DqlConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)

    def __post_init__(self) -> None:
        if self.policy not in POLICY_NAMES:
            raise ValueError(f"policy must be one of {POLICY_NAMES}")
        if self.num_vehicles < 1:
            raise ValueError("num_vehicles must be at least 1")
        if self.state_config not in StateConfig.__members__:
            raise ValueError(f"state_config must be one of {list(StateConfig.__members__)}")
        if self.initial_mode not in MODE_NAMES:
            raise ValueError(f"initial_mode must be one of {MODE_NAMES}")
        if self.profile not in ("full", "smoke"):
            raise ValueError("profile must be 'full' or 'smoke'")
        if self.episode_duration_s <= 0 or self.update_period_s <= 0:
            raise ValueError("durations must be positive")
        windows = self.episode_duration_s / self.update_period_s
        if abs(windows - round(windows)) > 1e-9:
            raise ValueError("episode duration must be a whole number of windows")
        ttis = self.update_period_s / self.ran.tti_s
        if abs(ttis - round(ttis)) > 1e-9:
            raise ValueError("update period must be a whole number of TTIs")
        if self.train_episodes is not None and self.train_episodes < 0:
            raise ValueError("train_episodes cannot be negative")
        if self.test_episodes is not None and self.test_episodes < 1:
            raise ValueError("test_episodes must be at least 1")

    @property
    def state_config_enum(self) -> StateConfig:
        return StateConfig[self.state_config]

    @property
    def initial_mode_enum(self) -> SegmentationMode:
        return SegmentationMode[self.initial_mode]

    @property
    def steps_per_episode(self) -> int:
        return round(self.episode_duration_s / self.update_period_s)

    def resolved_train_episodes(self, policy_learns: bool) -> int:
        if not policy_learns:
            return 0
        if self.train_episodes is not None:
            return self.train_episodes
        if self.profile == "smoke":
            return SMOKE_TRAIN_EPISODES
        return max(1, FULL_TRAIN_BUDGET // self.num_vehicles)

    def resolved_test_episodes(self) -> int:
        if self.test_episodes is not None:
            return self.test_episodes
        if self.profile == "smoke":
            return SMOKE_TEST_EPISODES
        return max(1, TEST_BUDGET // self.num_vehicles)

    def total_explore_steps(self, policy_learns: bool) -> int:
        return (
            self.resolved_train_episodes(policy_learns)
            * self.steps_per_episode
            * self.num_vehicles
        )

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return _build(cls, raw, path="")

    @classmethod
    def from_yaml(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"config root must be a mapping: {path}")
        return cls.from_dict(raw)

    def save_yaml(self, path: str) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


_NESTED = {
    "radio": RadioConfig,
    "mobility": MobilityConfig,
    "ran": RanConfig,
    "app": SegmentationProfile,
    "thresholds": KpiThresholds,
    "scales": StateScales,
    "dql": DqlConfig,
    "ppo": PpoConfig,
    "heuristic": HeuristicConfig,
}


def _build(cls: type, raw: dict, path: str) -> Any:
    if not isinstance(raw, dict):
        raise ValueError(f"config section '{path or 'root'}' must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ValueError(
            f"unknown config key(s) {sorted(unknown)} in section '{path or 'root'}'"
        )
    kwargs = {}
    for name, value in raw.items():
        where = f"{path}.{name}" if path else name
        if cls is ExperimentConfig and name in _NESTED:
            kwargs[name] = _build(_NESTED[name], value, where)
        elif isinstance(value, list):
            kwargs[name] = tuple(
                tuple(v) if isinstance(v, list) else v for v in value
            )
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid config section '{path or 'root'}': {exc}") from exc
