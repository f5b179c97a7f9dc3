"""Radio access model: link adaptation, downlink queues, TTI scheduling.

One shared carrier is split equally among backlogged vehicles every 1 ms
slot. Link adaptation picks the highest MCS whose SNR threshold is met; very
low SNR means outage and no scheduling. Each vehicle has a finite tail-drop
queue, and per-100 ms-window counters feed the orchestrator's state vector.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

# PDU layout inside a queue: (nbytes, enqueue_us, frame_id, packet_index).
Pdu = tuple[int, int, int, int]


@dataclass(frozen=True)
class McsEntry:
    mcs_index: int
    min_snr_db: float
    spectral_efficiency: float


@dataclass
class McsTable:
    entries: tuple[McsEntry, ...]
    efficiency_overhead: float = 0.75
    outage_snr_db: float = -5.0

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("empty MCS table")
        if not 0.0 < self.efficiency_overhead <= 1.0:
            raise ValueError("efficiency overhead must be in (0, 1]")
        prev = None
        for i, e in enumerate(self.entries):
            if e.mcs_index != i:
                raise ValueError("MCS indices must be 0..N-1 in order")
            if prev is not None:
                if e.min_snr_db <= prev.min_snr_db:
                    raise ValueError("min SNR thresholds must increase")
                if e.spectral_efficiency < prev.spectral_efficiency:
                    raise ValueError("spectral efficiency must not decrease")
            prev = e

    @classmethod
    def default(
        cls,
        efficiency_cap: float = 7.4,
        efficiency_overhead: float = 0.75,
        outage_snr_db: float = -5.0,
    ) -> "McsTable":
        """29 entries with thresholds -4..24 dB and Shannon efficiency.

        Efficiency is evaluated at each entry's own threshold and capped,
        so index 4 (0 dB) carries exactly 1.0 bit/s/Hz.
        """
        entries = []
        for i, snr in enumerate(range(-4, 25)):
            se = min(math.log2(1.0 + 10.0 ** (snr / 10.0)), efficiency_cap)
            entries.append(McsEntry(i, float(snr), se))
        return cls(tuple(entries), efficiency_overhead, outage_snr_db)


def mcs_from_snr(snr_value_db: float, table: McsTable) -> tuple[int, float, bool]:
    """Map SNR to (mcs_index, spectral_efficiency, outage).

    Outage reports index -1 and zero efficiency. SNR above the outage floor
    but below the lowest threshold falls back to the most robust entry.
    """
    if snr_value_db < table.outage_snr_db:
        return -1, 0.0, True
    chosen = table.entries[0]
    for e in table.entries:
        if e.min_snr_db <= snr_value_db:
            chosen = e
        else:
            break
    return chosen.mcs_index, chosen.spectral_efficiency, False


@dataclass
class UeQueue:
    """Per-vehicle downlink RLC buffer with tail drop and byte totals."""

    vehicle_id: int
    capacity_bytes: int = 2_000_000
    buffered: deque = field(default_factory=deque)
    buffered_bytes: int = 0
    credit_bytes: float = 0.0
    # Episode totals for the conservation identity.
    offered_pdus: int = 0
    offered_bytes: int = 0
    dropped_pdus: int = 0
    dropped_bytes: int = 0
    served_pdus: int = 0
    served_bytes: int = 0

    def enqueue_pdu(self, nbytes: int, now_us: int, frame_id: int, packet_index: int) -> bool:
        self.offered_pdus += 1
        self.offered_bytes += nbytes
        if self.buffered_bytes + nbytes <= self.capacity_bytes:
            self.buffered.append((nbytes, now_us, frame_id, packet_index))
            self.buffered_bytes += nbytes
            return True
        self.dropped_pdus += 1
        self.dropped_bytes += nbytes
        return False


@dataclass
class LinkStatsWindow:
    vehicle_id: int
    valid: bool
    mean_sinr_db: float
    mean_mcs_index: float
    prb_utilization: float
    rlc_queue_bytes: int
    rlc_mean_queue_delay_s: float
    rlc_tx_pdus: int
    rlc_dropped_pdus: int
    rlc_retx: int
    pdcp_tx_pdus: int
    pdcp_rx_pdus: int
    pdcp_mean_delay_s: float
    pdcp_throughput_bps: float
    pdcp_loss_ratio: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.prb_utilization <= 1.0 + 1e-9:
            raise ValueError("prb_utilization out of [0,1]")
        if not 0.0 <= self.pdcp_loss_ratio <= 1.0:
            raise ValueError("pdcp_loss_ratio out of [0,1]")


class LinkWindowAccumulator:
    """Collects one vehicle's RAN counters over the current 100 ms window."""

    def __init__(self, vehicle_id: int) -> None:
        self.vehicle_id = vehicle_id
        self.reset()

    def reset(self) -> None:
        self.sinr_sum = 0.0
        self.mcs_sum = 0.0
        self.channel_samples = 0
        self.prb_used_sum = 0.0
        self.tti_count = 0
        self.rlc_tx_pdus = 0
        self.rlc_queue_delay_sum_s = 0.0
        self.rlc_dropped_pdus = 0
        self.rlc_retx = 0
        self.pdcp_tx_pdus = 0
        self.pdcp_rx_pdus = 0
        self.pdcp_rx_bytes = 0
        self.pdcp_delay_sum_s = 0.0

    def record_channel(self, sinr_db: float, mcs_index: int) -> None:
        self.sinr_sum += sinr_db
        self.mcs_sum += mcs_index
        self.channel_samples += 1

    def close(self, queue: UeQueue, window_s: float) -> LinkStatsWindow:
        n = self.channel_samples
        served = self.rlc_tx_pdus
        rx = self.pdcp_rx_pdus
        offered = self.pdcp_tx_pdus
        stats = LinkStatsWindow(
            vehicle_id=self.vehicle_id,
            valid=bool(offered or served or rx),
            mean_sinr_db=self.sinr_sum / n if n else 0.0,
            mean_mcs_index=self.mcs_sum / n if n else 0.0,
            prb_utilization=min(self.prb_used_sum / self.tti_count, 1.0)
            if self.tti_count
            else 0.0,
            rlc_queue_bytes=queue.buffered_bytes,
            rlc_mean_queue_delay_s=self.rlc_queue_delay_sum_s / served if served else 0.0,
            rlc_tx_pdus=served,
            rlc_dropped_pdus=self.rlc_dropped_pdus,
            rlc_retx=self.rlc_retx,
            pdcp_tx_pdus=offered,
            pdcp_rx_pdus=rx,
            pdcp_mean_delay_s=self.pdcp_delay_sum_s / rx if rx else 0.0,
            pdcp_throughput_bps=self.pdcp_rx_bytes * 8.0 / window_s if window_s > 0 else 0.0,
            pdcp_loss_ratio=self.rlc_dropped_pdus / offered if offered else 0.0,
        )
        self.reset()
        return stats


def schedule_tti(
    queues: list[UeQueue],
    efficiency: dict[int, float],
    outage: dict[int, bool],
    accumulators: dict[int, LinkWindowAccumulator],
    bandwidth_hz: float,
    efficiency_overhead: float,
    tti_s: float,
    now_us: int,
) -> list[tuple[int, int, int, int, int]]:
    """Serve one 1 ms slot; returns (vehicle, frame, packet, bytes, enq_us) rows.

    The carrier is split equally among backlogged non-outage vehicles. Byte
    budgets below one PDU are carried as credit to later slots; credit is
    cleared when a queue drains so idle vehicles cannot bank capacity.
    """
    active = [
        q for q in queues if q.buffered_bytes and not outage[q.vehicle_id]
    ]
    for acc in accumulators.values():
        acc.tti_count += 1
    if not active:
        return []
    share = 1.0 / len(active)
    capacity_factor = bandwidth_hz * share * efficiency_overhead * tti_s / 8.0
    served: list[tuple[int, int, int, int, int]] = []
    for q in active:
        vid = q.vehicle_id
        budget = capacity_factor * efficiency[vid]
        q.credit_bytes += budget
        acc = accumulators[vid]
        buffered = q.buffered
        served_bytes = 0
        while buffered and buffered[0][0] <= q.credit_bytes:
            nbytes, enq_us, frame_id, packet_index = buffered.popleft()
            q.credit_bytes -= nbytes
            q.buffered_bytes -= nbytes
            q.served_pdus += 1
            q.served_bytes += nbytes
            served_bytes += nbytes
            acc.rlc_tx_pdus += 1
            acc.rlc_queue_delay_sum_s += (now_us - enq_us) / 1e6
            served.append((vid, frame_id, packet_index, nbytes, enq_us))
        if not buffered:
            q.credit_bytes = 0.0
        if budget > 0.0:
            acc.prb_used_sum += share * min(1.0, served_bytes / budget)
    return served
