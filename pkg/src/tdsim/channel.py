"""Radio channel and vehicle mobility.

Pathloss follows a log-distance law with spatially correlated (Gauss-Markov)
log-normal shadowing; vehicles bounce inside a square service area around the
base station. A recorded pathloss trace can replace the parametric model
behind the same per-vehicle query interface.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import RngStream

THERMAL_NOISE_DBM_PER_HZ = -174.0


@dataclass
class RadioConfig:
    carrier_frequency_hz: float = 3.5e9
    bandwidth_hz: float = 50e6
    tx_power_dbm: float = 30.0
    allowed_tx_powers_dbm: tuple[float, ...] = (23.0, 30.0)
    noise_figure_db: float = 5.0
    pathloss_exponent: float = 3.0
    reference_loss_db: float = 43.0
    shadowing_stddev_db: float = 4.0
    shadowing_correlation_m: float = 25.0

    def __post_init__(self) -> None:
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.pathloss_exponent < 2.0:
            raise ValueError("pathloss exponent below free space")
        if self.shadowing_stddev_db < 0 or self.shadowing_correlation_m <= 0:
            raise ValueError("bad shadowing parameters")
        if self.tx_power_dbm not in self.allowed_tx_powers_dbm:
            raise ValueError(
                f"tx power {self.tx_power_dbm} dBm not in {self.allowed_tx_powers_dbm}"
            )


@dataclass
class MobilityConfig:
    area_size_m: float = 600.0
    speed_min_mps: float = 10.0
    speed_max_mps: float = 15.0
    heading_jitter_std_rad: float = 0.1

    def __post_init__(self) -> None:
        if self.area_size_m <= 0:
            raise ValueError("area size must be positive")
        if not 0 < self.speed_min_mps <= self.speed_max_mps:
            raise ValueError("bad speed range")


@dataclass
class VehiclePose:
    vehicle_id: int
    x_m: float
    y_m: float
    speed_mps: float
    heading_rad: float


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def pathloss_db(distance_m: float, shadow_db: float, cfg: RadioConfig) -> float:
    """Log-distance pathloss plus the current shadowing state.

    Distances are clamped to 1 m (the reference distance) so a vehicle
    driving over the site cannot produce negative loss.
    """
    d = max(distance_m, 1.0)
    return cfg.reference_loss_db + 10.0 * cfg.pathloss_exponent * math.log10(d) + shadow_db


def shadowing_step(
    shadow_db: float, distance_moved_m: float, cfg: RadioConfig, rng: np.random.Generator
) -> float:
    """Advance the correlated shadowing process by one movement step.

    First-order Gauss-Markov: correlation decays as exp(-d/d_corr) with the
    distance travelled, and the stationary variance stays sigma^2 because the
    innovation is scaled by sqrt(1 - rho^2).
    """
    rho = math.exp(-distance_moved_m / cfg.shadowing_correlation_m)
    sigma = cfg.shadowing_stddev_db
    return rho * shadow_db + math.sqrt(1.0 - rho * rho) * sigma * rng.standard_normal()


def snr_db(pathloss_value_db: float, cfg: RadioConfig) -> float:
    return cfg.tx_power_dbm - pathloss_value_db - noise_power_dbm(
        cfg.bandwidth_hz, cfg.noise_figure_db
    )


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def step_pose(
    pose: VehiclePose, dt_s: float, cfg: MobilityConfig, rng: np.random.Generator
) -> float:
    """Move one vehicle for dt seconds, reflecting off the area walls.

    Mutates the pose in place and returns the distance travelled (the input
    to the shadowing correlation).
    """
    if cfg.heading_jitter_std_rad > 0.0:
        pose.heading_rad = _wrap_angle(
            pose.heading_rad + cfg.heading_jitter_std_rad * rng.standard_normal()
        )
    dist = pose.speed_mps * dt_s
    x = pose.x_m + dist * math.cos(pose.heading_rad)
    y = pose.y_m + dist * math.sin(pose.heading_rad)
    size = cfg.area_size_m
    heading = pose.heading_rad
    if x < 0.0:
        x = -x
        heading = _wrap_angle(math.pi - heading)
    elif x > size:
        x = 2.0 * size - x
        heading = _wrap_angle(math.pi - heading)
    if y < 0.0:
        y = -y
        heading = _wrap_angle(-heading)
    elif y > size:
        y = 2.0 * size - y
        heading = _wrap_angle(-heading)
    pose.x_m, pose.y_m, pose.heading_rad = x, y, heading
    return dist


class ParametricChannel:
    """Mobility plus stochastic pathloss for every vehicle in the cell.

    advance(dt) steps all vehicles and their shadowing states; pathloss
    queries then reflect the new positions until the next advance.
    """

    def __init__(
        self,
        num_vehicles: int,
        radio: RadioConfig,
        mobility: MobilityConfig,
        stream: RngStream,
    ) -> None:
        self.radio = radio
        self.mobility = mobility
        self._rng = stream.rng
        size = mobility.area_size_m
        self.site_x = size / 2.0
        self.site_y = size / 2.0
        self.poses: list[VehiclePose] = []
        self._shadow: list[float] = []
        for vid in range(num_vehicles):
            self.poses.append(
                VehiclePose(
                    vehicle_id=vid,
                    x_m=float(self._rng.uniform(0.0, size)),
                    y_m=float(self._rng.uniform(0.0, size)),
                    speed_mps=float(
                        self._rng.uniform(mobility.speed_min_mps, mobility.speed_max_mps)
                    ),
                    heading_rad=float(self._rng.uniform(-math.pi, math.pi)),
                )
            )
            self._shadow.append(
                float(self._rng.standard_normal() * radio.shadowing_stddev_db)
            )

    def advance(self, dt_s: float) -> None:
        for pose in self.poses:
            moved = step_pose(pose, dt_s, self.mobility, self._rng)
            self._shadow[pose.vehicle_id] = shadowing_step(
                self._shadow[pose.vehicle_id], moved, self.radio, self._rng
            )

    def distance_m(self, vehicle_id: int) -> float:
        pose = self.poses[vehicle_id]
        return math.hypot(pose.x_m - self.site_x, pose.y_m - self.site_y)

    def pathloss_db(self, vehicle_id: int) -> float:
        return pathloss_db(
            self.distance_m(vehicle_id), self._shadow[vehicle_id], self.radio
        )

    def snr_db(self, vehicle_id: int) -> float:
        return snr_db(self.pathloss_db(vehicle_id), self.radio)


TRACE_HEADER = ("time_s", "vehicle_id", "pathloss_db")


@dataclass
class ChannelTrace:
    """Recorded pathloss samples per vehicle, linearly interpolated in time."""

    times: dict[int, np.ndarray] = field(default_factory=dict)
    losses: dict[int, np.ndarray] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str) -> "ChannelTrace":
        by_vehicle: dict[int, list[tuple[float, float]]] = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
                raise ValueError(f"expected trace header {','.join(TRACE_HEADER)}")
            for row in reader:
                if not row:
                    continue
                t, vid, pl = float(row[0]), int(row[1]), float(row[2])
                by_vehicle.setdefault(vid, []).append((t, pl))
        trace = cls()
        for vid, samples in by_vehicle.items():
            samples.sort(key=lambda s: s[0])
            arr = np.asarray(samples, dtype=float)
            if len(arr) < 2:
                raise ValueError(f"vehicle {vid} trace needs at least two samples")
            trace.times[vid] = arr[:, 0]
            trace.losses[vid] = arr[:, 1]
        if not trace.times:
            raise ValueError("empty channel trace")
        return trace

    def covers(self, horizon_s: float, num_vehicles: int) -> bool:
        for vid in range(num_vehicles):
            if vid not in self.times:
                return False
            if self.times[vid][0] > 0.0 or self.times[vid][-1] < horizon_s:
                return False
        return True

    def pathloss_db(self, vehicle_id: int, t_s: float) -> float:
        return float(np.interp(t_s, self.times[vehicle_id], self.losses[vehicle_id]))


class TraceChannel:
    """Trace-driven replacement for ParametricChannel (same query surface)."""

    def __init__(self, trace: ChannelTrace, radio: RadioConfig, num_vehicles: int) -> None:
        self.radio = radio
        self._trace = trace
        self._now_s = 0.0
        missing = [v for v in range(num_vehicles) if v not in trace.times]
        if missing:
            raise ValueError(f"trace missing vehicles {missing}")

    def advance(self, dt_s: float) -> None:
        self._now_s += dt_s

    def pathloss_db(self, vehicle_id: int) -> float:
        return self._trace.pathloss_db(vehicle_id, self._now_s)

    def snr_db(self, vehicle_id: int) -> float:
        return snr_db(self.pathloss_db(vehicle_id), self.radio)
