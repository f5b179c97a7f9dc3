"""One 80-second episode: event wiring, accounting, and result digests.

Event order at shared instants is fixed by construction: at every 100 ms
boundary the decision tick (which closes the previous window) fires before
that instant's frame generation, which fires before its TTI, because each
handler schedules only its own successor and setup seeds them in that
order. Packet arrivals landing exactly on a boundary therefore count into
the next window (windows are half-open).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .agents import Policy
from .app import AppSink, FrameSizeTrace, SegmentationMode, TrafficSource
from .channel import ChannelTrace, ParametricChannel, TraceChannel
from .config import ExperimentConfig
from .engine import ContractViolation, EventKind, Simulator, make_stream, to_us
from .metrics import StepObservation
from .orchestrator import RanAi
from .ran import LinkWindowAccumulator, UeQueue, mcs_from_snr, schedule_tti


@dataclass
class VehicleEpisodeStats:
    vehicle_id: int
    mean_reward: float
    mean_qos: float
    mean_qoe: float
    delay_quantiles_s: tuple[float, float, float, float, float]
    prp_quantiles: tuple[float, float, float, float, float]
    action_counts: tuple[int, int, int]
    cumulative_reward: float

    @property
    def p50_delay_s(self) -> float:
        return self.delay_quantiles_s[2]

    @property
    def p95_delay_s(self) -> float:
        return self.delay_quantiles_s[4]

    @property
    def p50_prp(self) -> float:
        return self.prp_quantiles[2]

    def action_shares(self) -> tuple[float, float, float]:
        total = sum(self.action_counts)
        return tuple(c / total for c in self.action_counts)


@dataclass
class ByteTotals:
    offered_bytes: int
    served_bytes: int
    dropped_bytes: int
    residual_bytes: int
    offered_pdus: int
    served_pdus: int
    dropped_pdus: int
    residual_pdus: int

    def conserved(self) -> bool:
        return (
            self.offered_bytes == self.served_bytes + self.dropped_bytes + self.residual_bytes
            and self.offered_pdus == self.served_pdus + self.dropped_pdus + self.residual_pdus
        )


@dataclass
class EpisodeResult:
    episode_index: int
    seed: int
    training: bool
    records: list[StepObservation]
    per_vehicle: dict[int, VehicleEpisodeStats]
    byte_totals: dict[int, ByteTotals]
    frames_generated: int
    frames_completed: int
    packets_generated: int
    packets_delivered: int

    def mean_over_vehicles(self, attr: str) -> float:
        values = [getattr(s, attr) for s in self.per_vehicle.values()]
        return float(np.mean(values))


QUANTILE_POINTS = (0.05, 0.25, 0.50, 0.75, 0.95)


class EpisodeRunner:
    """Builds and runs a single episode deterministically from its seed."""

    def __init__(
        self,
        cfg: ExperimentConfig,
        policy: Policy,
        training: bool,
        episode_seed: int,
        episode_index: int = 0,
    ) -> None:
        self.cfg = cfg
        self.policy = policy
        self.training = training
        self.episode_seed = episode_seed
        self.episode_index = episode_index

        self.sim = Simulator()
        n = cfg.num_vehicles
        if cfg.channel_trace:
            trace = ChannelTrace.load(cfg.channel_trace)
            if not trace.covers(cfg.episode_duration_s, n):
                raise ValueError("channel trace does not cover the episode horizon")
            self.channel = TraceChannel(trace, cfg.radio, n)
        else:
            self.channel = ParametricChannel(
                n, cfg.radio, cfg.mobility, make_stream("channel", episode_seed)
            )
        size_trace = FrameSizeTrace.load(cfg.frame_size_trace) if cfg.frame_size_trace else None

        self.mcs_table = cfg.ran.build_mcs_table()
        self.queues = [UeQueue(v, cfg.ran.buffer_capacity_bytes) for v in range(n)]
        self.accumulators = {v: LinkWindowAccumulator(v) for v in range(n)}
        self.sources = [
            TrafficSource(v, cfg.app, cfg.initial_mode_enum, size_trace) for v in range(n)
        ]
        self.sinks = [AppSink(v, cfg.app) for v in range(n)]
        self.ranai = RanAi(
            policy=policy,
            state_config=cfg.state_config_enum,
            scales=cfg.scales,
            thresholds=cfg.thresholds,
            mode_chamfer=cfg.app.chamfer_distance,
            training=training,
        )
        for v in range(n):
            self.ranai.register_vehicle(v, cfg.initial_mode_enum)

        self._pending: list[deque] = [deque() for _ in range(n)]
        self._efficiency: dict[int, float] = {}
        self._outage: dict[int, bool] = {}
        self._records: list[StepObservation] = []
        self._ended = False

        self._update_us = to_us(cfg.update_period_s)
        self._tti_us = to_us(cfg.ran.tti_s)
        self._frame_us = to_us(1.0 / cfg.app.frame_rate_hz)
        self._core_us = to_us(cfg.ran.core_delay_s)
        self._end_us = to_us(cfg.episode_duration_s)
        self._encode_us = tuple(to_us(d) for d in cfg.app.encode_delay_s)
        self.windows_per_episode = self._end_us // self._update_us

        self.sim.on(EventKind.ORCHESTRATOR_TICK, self._on_decision_tick)
        self.sim.on(EventKind.FRAME_GENERATION, self._on_frame_generation)
        self.sim.on(EventKind.TTI_TICK, self._on_tti)
        self.sim.on(EventKind.PACKET_DELIVERY, self._on_delivery)
        self.sim.on(EventKind.EPISODE_END, self._on_episode_end)
        self.sim.schedule(0, EventKind.ORCHESTRATOR_TICK)
        self.sim.schedule(0, EventKind.FRAME_GENERATION)
        self.sim.schedule(0, EventKind.TTI_TICK)
        self.sim.schedule(self._end_us, EventKind.EPISODE_END)

    def _close_windows(self):
        cfg = self.cfg
        sentinel = cfg.thresholds.sentinel_delay_s
        return {
            v: (
                self.sinks[v].close_window(cfg.update_period_s, sentinel),
                self.accumulators[v].close(self.queues[v], cfg.update_period_s),
            )
            for v in range(cfg.num_vehicles)
        }

    def _refresh_link_state(self) -> None:
        for v in range(self.cfg.num_vehicles):
            snr = self.channel.snr_db(v)
            index, efficiency, outage = mcs_from_snr(snr, self.mcs_table)
            self._efficiency[v] = efficiency
            self._outage[v] = outage
            self.accumulators[v].record_channel(snr, index)

    def _on_decision_tick(self, event) -> None:
        tick = event.fire_us // self._update_us
        commands, records = self.ranai.on_update_tick(tick - 1, self._close_windows())
        self._records.extend(records)
        for vid, mode in commands:
            self.sources[vid].set_mode(mode)
        if tick > 0:
            self.channel.advance(self.cfg.update_period_s)
        self._refresh_link_state()
        nxt = event.fire_us + self._update_us
        if nxt < self._end_us:
            self.sim.schedule(nxt, EventKind.ORCHESTRATOR_TICK)

    def _on_frame_generation(self, event) -> None:
        now = event.fire_us
        for src, sink, pending in zip(self.sources, self.sinks, self._pending):
            frame = src.generate(now)
            sink.on_frame_generated(frame)
            eligible = now + self._encode_us[frame.mode]
            fid = frame.frame_id
            for i, nbytes in enumerate(self.cfg.app.pdu_sizes(frame.total_bytes)):
                pending.append((eligible, fid, i, nbytes))
        nxt = now + self._frame_us
        if nxt < self._end_us:
            self.sim.schedule(nxt, EventKind.FRAME_GENERATION)

    def _on_tti(self, event) -> None:
        now = event.fire_us
        for v, pending in enumerate(self._pending):
            if pending and pending[0][0] <= now:
                queue = self.queues[v]
                acc = self.accumulators[v]
                while pending and pending[0][0] <= now:
                    _, fid, idx, nbytes = pending.popleft()
                    acc.pdcp_tx_pdus += 1
                    if not queue.enqueue_pdu(nbytes, now, fid, idx):
                        acc.rlc_dropped_pdus += 1
        served = schedule_tti(
            self.queues,
            self._efficiency,
            self._outage,
            self.accumulators,
            self.cfg.radio.bandwidth_hz,
            self.mcs_table.efficiency_overhead,
            self.cfg.ran.tti_s,
            now,
        )
        if served:
            self.sim.schedule(now + self._tti_us + self._core_us, EventKind.PACKET_DELIVERY, served)
        nxt = now + self._tti_us
        if nxt < self._end_us:
            self.sim.schedule(nxt, EventKind.TTI_TICK)

    def _on_delivery(self, event) -> None:
        if self._ended:
            return
        now = event.fire_us
        for vid, fid, idx, nbytes, enqueued_us in event.payload:
            self.sinks[vid].on_pdu_delivered(fid, idx, nbytes, now)
            acc = self.accumulators[vid]
            acc.pdcp_rx_pdus += 1
            acc.pdcp_rx_bytes += nbytes
            acc.pdcp_delay_sum_s += (now - enqueued_us) / 1e6

    def _on_episode_end(self, event) -> None:
        _, records = self.ranai.on_update_tick(
            self.windows_per_episode - 1, self._close_windows(), terminal=True
        )
        self._records.extend(records)
        self._ended = True

    def run(self) -> EpisodeResult:
        self.sim.run_until(self._end_us)
        if not self._ended:
            raise ContractViolation("episode end event never fired")
        if self.ranai.windows_processed != self.windows_per_episode:
            raise ContractViolation(
                f"processed {self.ranai.windows_processed} windows, "
                f"expected {self.windows_per_episode}"
            )
        # Always close out per-episode policy state; learning updates are
        # internally gated on having collected transitions this episode.
        self.policy.end_episode()
        return self._build_result()

    def _build_result(self) -> EpisodeResult:
        cfg = self.cfg
        steps = self.windows_per_episode
        sentinel = cfg.thresholds.sentinel_delay_s
        by_vehicle: dict[int, list[StepObservation]] = {v: [] for v in range(cfg.num_vehicles)}
        for rec in self._records:
            by_vehicle[rec.vehicle_id].append(rec)
        per_vehicle = {}
        for v, recs in by_vehicle.items():
            if len(recs) != steps:
                raise ContractViolation(f"vehicle {v} has {len(recs)} windows, expected {steps}")
            counts = [0, 0, 0]
            for rec in recs:
                counts[rec.mode] += 1
            delays = np.frombuffer(self.sinks[v].packet_delays_s, dtype=float)
            if delays.size:
                delay_q = tuple(float(x) for x in np.quantile(delays, QUANTILE_POINTS))
            else:
                delay_q = (sentinel,) * len(QUANTILE_POINTS)
            prps = np.array([rec.prp for rec in recs])
            per_vehicle[v] = VehicleEpisodeStats(
                vehicle_id=v,
                mean_reward=float(np.mean([r.reward for r in recs])),
                mean_qos=float(np.mean([r.qos for r in recs])),
                mean_qoe=float(np.mean([r.qoe for r in recs])),
                delay_quantiles_s=delay_q,
                prp_quantiles=tuple(float(x) for x in np.quantile(prps, QUANTILE_POINTS)),
                action_counts=tuple(counts),
                cumulative_reward=self.ranai.vehicles[v].cumulative_reward,
            )
        byte_totals = {
            q.vehicle_id: ByteTotals(
                offered_bytes=q.offered_bytes,
                served_bytes=q.served_bytes,
                dropped_bytes=q.dropped_bytes,
                residual_bytes=q.buffered_bytes,
                offered_pdus=q.offered_pdus,
                served_pdus=q.served_pdus,
                dropped_pdus=q.dropped_pdus,
                residual_pdus=len(q.buffered),
            )
            for q in self.queues
        }
        return EpisodeResult(
            episode_index=self.episode_index,
            seed=self.episode_seed,
            training=self.training,
            records=self._records,
            per_vehicle=per_vehicle,
            byte_totals=byte_totals,
            frames_generated=sum(s.frames_generated for s in self.sinks),
            frames_completed=sum(s.frames_completed for s in self.sinks),
            packets_generated=sum(s.packets_generated for s in self.sinks),
            packets_delivered=sum(s.packets_delivered for s in self.sinks),
        )
