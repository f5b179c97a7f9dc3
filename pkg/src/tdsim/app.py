"""Application layer: LiDAR frame traffic and delivery KPIs.

Each vehicle uploads one point-cloud frame per 100 ms. The active
segmentation mode fixes the frame payload (raw 200 KB, semantic 100 KB,
aggressive 18 KB), which is fragmented into fixed-size PDUs for the radio
queue. The receiving side counts packets: a packet's end-to-end delay runs
from the generation of its frame to its delivery plus the mode's decode
cost, and its PDUs become radio-eligible only after the encode cost.
Window KPIs (delay statistics, goodput, tx/rx counts) are packet-level;
frame completion is tracked separately for reporting.
"""

from __future__ import annotations

import csv
import math
from array import array
from dataclasses import dataclass
from enum import IntEnum

from .engine import ContractViolation


class SegmentationMode(IntEnum):
    """Point-cloud processing modes, ordered raw to most compressed."""

    R = 0
    SC = 1
    SA = 2


MODE_NAMES = tuple(m.name for m in SegmentationMode)


@dataclass
class SegmentationProfile:
    """Per-mode traffic volume, fidelity loss, and codec latencies."""

    frame_bytes: tuple[int, int, int] = (200_000, 100_000, 18_000)
    chamfer_distance: tuple[float, float, float] = (0.0, 13.5, 31.5)
    encode_delay_s: tuple[float, float, float] = (0.0, 0.003, 0.005)
    decode_delay_s: tuple[float, float, float] = (0.0, 0.003, 0.005)
    frame_rate_hz: float = 10.0
    pdu_payload_bytes: int = 1500

    def __post_init__(self) -> None:
        if len(self.frame_bytes) != 3 or len(self.chamfer_distance) != 3:
            raise ValueError("profiles cover exactly the three modes")
        if not (self.frame_bytes[0] > self.frame_bytes[1] > self.frame_bytes[2] > 0):
            raise ValueError("frame sizes must decrease with compression")
        if self.chamfer_distance[0] != 0.0:
            raise ValueError("raw mode is the fidelity reference (zero distance)")
        if not (self.chamfer_distance[0] < self.chamfer_distance[1] < self.chamfer_distance[2]):
            raise ValueError("fidelity loss must grow with compression")
        if self.frame_rate_hz <= 0 or self.pdu_payload_bytes <= 0:
            raise ValueError("bad traffic parameters")
        if any(d < 0 for d in self.encode_delay_s + self.decode_delay_s):
            raise ValueError("codec delays must be non-negative")

    def pdu_sizes(self, total_bytes: int) -> list[int]:
        payload = self.pdu_payload_bytes
        count = math.ceil(total_bytes / payload)
        sizes = [payload] * count
        sizes[-1] = total_bytes - (count - 1) * payload
        return sizes


@dataclass(frozen=True)
class Frame:
    frame_id: int
    vehicle_id: int
    mode: SegmentationMode
    generated_us: int
    total_bytes: int
    pdu_count: int


class FrameSizeTrace:
    """Optional recorded frame sizes keyed by (frame_index, mode)."""

    HEADER = ("frame_index", "mode", "bytes")

    def __init__(self, sizes: dict[tuple[int, int], int]) -> None:
        self._sizes = sizes

    @classmethod
    def load(cls, path: str) -> "FrameSizeTrace":
        sizes: dict[tuple[int, int], int] = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != cls.HEADER:
                raise ValueError(f"expected frame trace header {','.join(cls.HEADER)}")
            for row in reader:
                if not row:
                    continue
                idx = int(row[0])
                mode = SegmentationMode[row[1]] if row[1] in MODE_NAMES else SegmentationMode(int(row[1]))
                nbytes = int(row[2])
                if nbytes <= 0:
                    raise ValueError("frame bytes must be positive")
                sizes[(idx, int(mode))] = nbytes
        if not sizes:
            raise ValueError("empty frame-size trace")
        return cls(sizes)

    def bytes_for(self, frame_index: int, mode: SegmentationMode, default: int) -> int:
        return self._sizes.get((frame_index, int(mode)), default)


class TrafficSource:
    """Generates one frame per period in the currently commanded mode.

    Mode changes apply from the next generated frame; a frame in flight is
    never resized.
    """

    def __init__(
        self,
        vehicle_id: int,
        profile: SegmentationProfile,
        initial_mode: SegmentationMode,
        size_trace: FrameSizeTrace | None = None,
    ) -> None:
        self.vehicle_id = vehicle_id
        self.profile = profile
        self.mode = initial_mode
        self.next_frame_id = 0
        self._trace = size_trace

    def set_mode(self, mode: SegmentationMode) -> None:
        self.mode = mode

    def generate(self, now_us: int) -> Frame:
        mode = self.mode
        nbytes = self.profile.frame_bytes[mode]
        if self._trace is not None:
            nbytes = self._trace.bytes_for(self.next_frame_id, mode, nbytes)
        frame = Frame(
            frame_id=self.next_frame_id,
            vehicle_id=self.vehicle_id,
            mode=mode,
            generated_us=now_us,
            total_bytes=nbytes,
            pdu_count=math.ceil(nbytes / self.profile.pdu_payload_bytes),
        )
        self.next_frame_id += 1
        return frame


@dataclass
class AppKpiWindow:
    """Packet-level aggregates for one vehicle over one 100 ms window.

    n_tx counts packets generated in the window, n_rx packets delivered in
    it (carryover from earlier windows included), so the ratio may pass 1
    transiently and is clamped by the reliability metric downstream.
    """

    vehicle_id: int
    n_tx: int
    n_rx: int
    delay_mean_s: float
    delay_std_s: float
    delay_min_s: float
    delay_max_s: float
    throughput_bps: float
    valid: bool


class AppSink:
    """Counts packets for one vehicle, reassembles frames, aggregates KPIs."""

    def __init__(self, vehicle_id: int, profile: SegmentationProfile) -> None:
        self.vehicle_id = vehicle_id
        self.profile = profile
        self._pending: dict[int, list] = {}
        self.frames_generated = 0
        self.frames_completed = 0
        self.packets_generated = 0
        self.packets_delivered = 0
        self.packet_delays_s = array("d")
        self.frame_delays_s = array("d")
        self._win_tx = 0
        self._win_delays: list[float] = []
        self._win_bytes = 0

    def on_frame_generated(self, frame: Frame) -> None:
        if frame.frame_id in self._pending:
            raise ContractViolation(f"duplicate frame id {frame.frame_id}")
        # [expected pdu count, delivered mask, generated_us, mode]
        self._pending[frame.frame_id] = [frame.pdu_count, set(), frame.generated_us, frame.mode]
        self.frames_generated += 1
        self.packets_generated += frame.pdu_count
        self._win_tx += frame.pdu_count

    def on_pdu_delivered(
        self, frame_id: int, packet_index: int, pdu_bytes: int, delivery_us: int
    ) -> None:
        entry = self._pending.get(frame_id)
        if entry is None:
            raise ContractViolation(f"delivery for unknown frame {frame_id}")
        count, seen, generated_us, mode = entry
        if packet_index in seen or not 0 <= packet_index < count:
            raise ContractViolation(
                f"duplicate or out-of-range pdu {packet_index} of frame {frame_id}"
            )
        seen.add(packet_index)
        delay_s = (delivery_us - generated_us) / 1e6 + self.profile.decode_delay_s[mode]
        self.packets_delivered += 1
        self.packet_delays_s.append(delay_s)
        self._win_delays.append(delay_s)
        self._win_bytes += pdu_bytes
        if len(seen) == count:
            self.frames_completed += 1
            self.frame_delays_s.append(delay_s)
            del self._pending[frame_id]

    def incomplete_frames(self) -> int:
        return len(self._pending)

    def close_window(self, window_s: float, sentinel_delay_s: float) -> AppKpiWindow:
        delays = self._win_delays
        n_rx = len(delays)
        if n_rx:
            mean = sum(delays) / n_rx
            var = sum((d - mean) ** 2 for d in delays) / n_rx
            kpis = AppKpiWindow(
                vehicle_id=self.vehicle_id,
                n_tx=self._win_tx,
                n_rx=n_rx,
                delay_mean_s=mean,
                delay_std_s=math.sqrt(var),
                delay_min_s=min(delays),
                delay_max_s=max(delays),
                throughput_bps=self._win_bytes * 8.0 / window_s,
                valid=True,
            )
        else:
            kpis = AppKpiWindow(
                vehicle_id=self.vehicle_id,
                n_tx=self._win_tx,
                n_rx=0,
                delay_mean_s=sentinel_delay_s,
                delay_std_s=0.0,
                delay_min_s=sentinel_delay_s,
                delay_max_s=sentinel_delay_s,
                throughput_bps=0.0,
                valid=False,
            )
        self._win_tx = 0
        self._win_delays = []
        self._win_bytes = 0
        return kpis
