"""Service quality metrics, reward, and state-vector assembly.

QoS is a hard feasibility gate: a window passes only if its delay statistic
stays within the tolerated delay and packet reliability meets the floor.
QoE scores the fidelity of the delivered point cloud through its Chamfer
distance to the raw cloud, linearly from 1 (identical) down to 0 at the
tolerated maximum. The reward blends timeliness and fidelity inside the
QoS-feasible region and is zero outside it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .app import AppKpiWindow, SegmentationMode
from .engine import ContractViolation
from .ran import LinkStatsWindow


@dataclass
class KpiThresholds:
    """Service requirements: tolerated delay, reliability floor, fidelity cap.

    qoe_weight balances fidelity against timeliness inside the feasible
    region; at 1.0 the reward is pure fidelity.
    """

    max_delay_s: float = 0.050
    min_prp: float = 1.0
    max_chamfer: float = 45.0
    qoe_weight: float = 1.0
    qos_delay_statistic: str = "mean"

    def __post_init__(self) -> None:
        if self.max_delay_s <= 0:
            raise ValueError("max_delay_s must be positive")
        if not 0.0 <= self.min_prp <= 1.0:
            raise ValueError("min_prp must be in [0,1]")
        if self.max_chamfer <= 0:
            raise ValueError("max_chamfer must be positive")
        if not 0.0 <= self.qoe_weight <= 1.0:
            raise ValueError("qoe_weight must be in [0,1]")
        if self.qos_delay_statistic not in ("mean", "max"):
            raise ValueError("qos_delay_statistic must be 'mean' or 'max'")

    @property
    def sentinel_delay_s(self) -> float:
        return 2.0 * self.max_delay_s


def prp(n_rx: int, n_tx: int) -> float:
    """Packet reception ratio for one window, clamped to [0, 1].

    Carryover deliveries can push the raw ratio past 1; with no offered
    traffic the link cannot have failed, so 0/0 reads as 1.
    """
    if n_tx < 0 or n_rx < 0:
        raise ValueError("packet counts must be non-negative")
    if n_tx == 0:
        return 1.0
    return min(n_rx / n_tx, 1.0)


def qos(delay_s: float, prp_value: float, thr: KpiThresholds) -> int:
    return int(delay_s <= thr.max_delay_s and prp_value >= thr.min_prp)


def chamfer_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric sum of squared nearest-neighbor distances between clouds."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != 3 or b.shape[1] != 3:
        raise ValueError("point clouds must have shape (n, 3)")
    if len(a) == 0 or len(b) == 0:
        raise ValueError("point clouds must be non-empty")
    # Pairwise squared distances; clouds here are small enough for the dense
    # (n*m) matrix.
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    return float(d2.min(axis=1).sum() + d2.min(axis=0).sum())


def qoe(cd: float, thr: KpiThresholds) -> float:
    if cd < 0:
        raise ValueError("chamfer distance cannot be negative")
    if cd > thr.max_chamfer:
        warnings.warn(
            f"chamfer distance {cd} exceeds tolerated maximum {thr.max_chamfer}; QoE clamped to 0",
            stacklevel=2,
        )
        return 0.0
    return (thr.max_chamfer - cd) / thr.max_chamfer


def reward(delay_s: float, qos_flag: int, qoe_value: float, thr: KpiThresholds) -> float:
    """Timeliness/fidelity blend inside the QoS region, zero outside."""
    if qos_flag == 0:
        return 0.0
    timeliness = (thr.max_delay_s - delay_s) / thr.max_delay_s
    return (1.0 - thr.qoe_weight) * timeliness + thr.qoe_weight * qoe_value


class StateConfig(Enum):
    """Observable scopes for the orchestrator, by state vector length."""

    APP = "APP"
    PHY = "PHY"
    FULL = "FULL"
    APP_NET = "APP_NET"
    PHY_NET = "PHY_NET"

    @property
    def dim(self) -> int:
        return _STATE_DIMS[self]


_STATE_DIMS = {
    StateConfig.APP: 5,
    StateConfig.PHY: 8,
    StateConfig.FULL: 18,
    StateConfig.APP_NET: 10,
    StateConfig.PHY_NET: 16,
}


@dataclass
class StateScales:
    """Per-feature divisors mapping raw KPIs into [0, 1] before clipping."""

    delay_s: float = 0.1
    throughput_bps: float = 16e6
    sinr_floor_db: float = -10.0
    sinr_span_db: float = 50.0
    mcs_index: float = 28.0
    queue_bytes: float = 2e6
    queue_delay_s: float = 1.0
    window_pdus: float = 2400.0
    offered_pdus: float = 140.0

    def __post_init__(self) -> None:
        for name in ("delay_s", "throughput_bps", "sinr_span_db", "mcs_index",
                     "queue_bytes", "queue_delay_s", "window_pdus", "offered_pdus"):
            if getattr(self, name) <= 0:
                raise ValueError(f"scale {name} must be positive")


@dataclass
class StepObservation:
    """Everything the orchestrator knows about one vehicle for one window."""

    vehicle_id: int
    step_index: int
    app: AppKpiWindow
    link: LinkStatsWindow
    mode: SegmentationMode
    prp: float
    qos: int
    qoe: float
    reward: float


def build_observation(
    step_index: int,
    app: AppKpiWindow,
    link: LinkStatsWindow,
    mode: SegmentationMode,
    mode_chamfer: tuple[float, float, float],
    thr: KpiThresholds,
) -> StepObservation:
    prp_value = prp(app.n_rx, app.n_tx)
    delay_stat = app.delay_mean_s if thr.qos_delay_statistic == "mean" else app.delay_max_s
    qos_flag = qos(delay_stat, prp_value, thr)
    qoe_value = qoe(mode_chamfer[mode], thr)
    return StepObservation(
        vehicle_id=app.vehicle_id,
        step_index=step_index,
        app=app,
        link=link,
        mode=mode,
        prp=prp_value,
        qos=qos_flag,
        qoe=qoe_value,
        reward=reward(delay_stat, qos_flag, qoe_value, thr),
    )


def _app_features(obs: StepObservation, sc: StateScales) -> np.ndarray:
    a = obs.app
    return np.array(
        [
            a.delay_mean_s / sc.delay_s,
            a.delay_std_s / sc.delay_s,
            a.delay_min_s / sc.delay_s,
            a.delay_max_s / sc.delay_s,
            a.throughput_bps / sc.throughput_bps,
        ]
    )


def _phy_features(obs: StepObservation, sc: StateScales) -> np.ndarray:
    l = obs.link
    tail = np.array(
        [
            (l.mean_sinr_db - sc.sinr_floor_db) / sc.sinr_span_db,
            l.mean_mcs_index / sc.mcs_index,
            l.prb_utilization,
        ]
    )
    return np.concatenate([_app_features(obs, sc), tail])


def _full_features(obs: StepObservation, sc: StateScales) -> np.ndarray:
    l = obs.link
    tail = np.array(
        [
            l.rlc_queue_bytes / sc.queue_bytes,
            l.rlc_mean_queue_delay_s / sc.queue_delay_s,
            l.rlc_tx_pdus / sc.window_pdus,
            l.rlc_dropped_pdus / sc.offered_pdus,
            l.rlc_retx / sc.offered_pdus,
            l.pdcp_tx_pdus / sc.offered_pdus,
            l.pdcp_rx_pdus / sc.window_pdus,
            l.pdcp_mean_delay_s / sc.queue_delay_s,
            l.pdcp_throughput_bps / sc.throughput_bps,
            l.pdcp_loss_ratio,
        ]
    )
    return np.concatenate([_phy_features(obs, sc), tail])


def assemble_state(
    obs: StepObservation,
    peers: list[StepObservation],
    cfg: StateConfig,
    scales: StateScales,
) -> np.ndarray:
    """Normalized state vector for one vehicle, peers averaged when in scope."""
    if any(p.vehicle_id == obs.vehicle_id for p in peers):
        raise ContractViolation("peers must exclude the observed vehicle")
    if cfg is StateConfig.APP:
        vec = _app_features(obs, scales)
    elif cfg is StateConfig.PHY:
        vec = _phy_features(obs, scales)
    elif cfg is StateConfig.FULL:
        vec = _full_features(obs, scales)
    elif cfg is StateConfig.APP_NET:
        own = _app_features(obs, scales)
        peer = (
            np.mean([_app_features(p, scales) for p in peers], axis=0)
            if peers
            else np.zeros(5)
        )
        vec = np.concatenate([own, peer])
    elif cfg is StateConfig.PHY_NET:
        own = _phy_features(obs, scales)
        peer = (
            np.mean([_phy_features(p, scales) for p in peers], axis=0)
            if peers
            else np.zeros(8)
        )
        vec = np.concatenate([own, peer])
    else:  # pragma: no cover - exhaustive enum
        raise ContractViolation(f"unknown state config {cfg}")
    if vec.shape != (cfg.dim,):
        raise ContractViolation(f"state length {vec.shape} != {cfg.dim}")
    return np.clip(vec, 0.0, 1.0)
