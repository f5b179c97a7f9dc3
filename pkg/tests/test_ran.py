"""Link adaptation, scheduler arithmetic, queue conservation, window stats."""

import math

import numpy as np
import pytest

from tdsim.ran import (
    LinkWindowAccumulator,
    McsTable,
    UeQueue,
    mcs_from_snr,
    schedule_tti,
)


def make_env(n, capacity=2_000_000):
    queues = [UeQueue(vid, capacity_bytes=capacity) for vid in range(n)]
    accs = {vid: LinkWindowAccumulator(vid) for vid in range(n)}
    return queues, accs


def run_tti(queues, accs, se, out, bandwidth=50e6, overhead=0.75, now_us=0):
    return schedule_tti(queues, se, out, accs, bandwidth, overhead, 0.001, now_us)


class TestMcsTable:
    def test_default_table_shape(self):
        table = McsTable.default()
        assert len(table.entries) == 29
        assert table.entries[0].min_snr_db == -4.0
        assert table.entries[-1].min_snr_db == 24.0
        assert [e.mcs_index for e in table.entries] == list(range(29))

    def test_efficiency_at_zero_db_is_exactly_one(self):
        table = McsTable.default()
        assert table.entries[4].min_snr_db == 0.0
        assert table.entries[4].spectral_efficiency == 1.0

    def test_efficiency_cap_binds_at_top(self):
        table = McsTable.default()
        # log2(1 + 10^2.4) = 7.98 and log2(1 + 10^2.3) = 7.65 both exceed 7.4.
        assert table.entries[28].spectral_efficiency == 7.4
        assert table.entries[27].spectral_efficiency == 7.4
        assert table.entries[26].spectral_efficiency == pytest.approx(
            math.log2(1 + 10**2.2)
        )

    def test_efficiency_monotone(self):
        table = McsTable.default()
        ses = [e.spectral_efficiency for e in table.entries]
        assert all(b >= a for a, b in zip(ses, ses[1:]))

    def test_selection_picks_highest_satisfied_threshold(self):
        table = McsTable.default()
        idx, se, outage = mcs_from_snr(10.5, table)
        assert (idx, outage) == (14, False)
        assert se == pytest.approx(math.log2(11.0))

    def test_outage_below_floor(self):
        table = McsTable.default()
        idx, se, outage = mcs_from_snr(-5.01, table)
        assert (idx, se, outage) == (-1, 0.0, True)

    def test_gap_between_outage_and_first_entry_uses_most_robust_mcs(self):
        table = McsTable.default()
        idx, se, outage = mcs_from_snr(-4.5, table)
        assert (idx, outage) == (0, False)
        assert se == table.entries[0].spectral_efficiency

    def test_snr_above_top_threshold_uses_top_entry(self):
        table = McsTable.default()
        assert mcs_from_snr(40.0, table)[0] == 28


class TestQueue:
    def test_accept_within_capacity(self):
        q = UeQueue(0)
        assert q.enqueue_pdu(1500, 0, 0, 0)
        assert q.buffered_bytes == 1500

    def test_exact_fit_accepted_then_next_dropped(self):
        q = UeQueue(0, capacity_bytes=3000)
        assert q.enqueue_pdu(1500, 0, 0, 0)
        assert q.enqueue_pdu(1500, 0, 0, 1)
        assert not q.enqueue_pdu(1, 0, 0, 2)
        assert q.dropped_pdus == 1
        assert q.buffered_bytes == 3000

    def test_totals_track_offered_split(self):
        q = UeQueue(0, capacity_bytes=1000)
        q.enqueue_pdu(800, 0, 0, 0)
        q.enqueue_pdu(800, 0, 0, 1)
        assert (q.offered_pdus, q.offered_bytes) == (2, 1600)
        assert (q.dropped_pdus, q.dropped_bytes) == (1, 800)


class TestScheduler:
    def test_single_ue_rate_by_hand(self):
        # 50 MHz * SE 1.0 * 0.75 * 1 ms / 8 = 4687.5 B per slot; 8 slots carry
        # 37500 B = exactly 25 PDUs of 1500 B.
        queues, accs = make_env(1)
        for i in range(100):
            queues[0].enqueue_pdu(1500, 0, 0, i)
        for t in range(8):
            run_tti(queues, accs, {0: 1.0}, {0: False}, now_us=t * 1000)
        assert queues[0].served_pdus == 25
        assert queues[0].served_bytes == 37500

    def test_credit_carries_fractional_budget(self):
        queues, accs = make_env(1)
        for i in range(10):
            queues[0].enqueue_pdu(1500, 0, 0, i)
        run_tti(queues, accs, {0: 1.0}, {0: False})
        # 4687.5 B budget serves 3 whole PDUs, 187.5 B remain as credit.
        assert queues[0].served_pdus == 3
        assert queues[0].credit_bytes == pytest.approx(187.5)

    def test_credit_cleared_when_queue_drains(self):
        queues, accs = make_env(1)
        queues[0].enqueue_pdu(100, 0, 0, 0)
        run_tti(queues, accs, {0: 1.0}, {0: False})
        assert queues[0].buffered_bytes == 0
        assert queues[0].credit_bytes == 0.0

    def test_equal_split_between_two_backlogged_ues(self):
        queues, accs = make_env(2)
        for q in queues:
            for i in range(200):
                q.enqueue_pdu(1500, 0, 0, i)
        for t in range(16):
            run_tti(queues, accs, {0: 1.0, 1: 1.0}, {0: False, 1: False}, now_us=t * 1000)
        # Each gets half of the 8-slot cycle rate: 25 PDUs per 16 slots.
        assert queues[0].served_pdus == 25
        assert queues[1].served_pdus == 25

    def test_outage_ue_excluded_from_split(self):
        queues, accs = make_env(2)
        for q in queues:
            for i in range(100):
                q.enqueue_pdu(1500, 0, 0, i)
        for t in range(8):
            run_tti(queues, accs, {0: 1.0, 1: 1.0}, {0: False, 1: True}, now_us=t * 1000)
        # Vehicle 0 sees the whole carrier; vehicle 1 is never scheduled.
        assert queues[0].served_pdus == 25
        assert queues[1].served_pdus == 0

    def test_fifo_order_preserved(self):
        queues, accs = make_env(1)
        for i in range(6):
            queues[0].enqueue_pdu(1500, 0, 7, i)
        rows = []
        for t in range(2):
            rows += run_tti(queues, accs, {0: 1.0}, {0: False}, now_us=t * 1000)
        assert [r[2] for r in rows] == list(range(len(rows)))

    def test_delivery_rows_carry_enqueue_time(self):
        queues, accs = make_env(1)
        queues[0].enqueue_pdu(1000, 123, 9, 0)
        rows = run_tti(queues, accs, {0: 1.0}, {0: False}, now_us=5000)
        assert rows == [(0, 9, 0, 1000, 123)]

    def test_byte_conservation_under_random_load(self):
        rng = np.random.default_rng(42)
        queues, accs = make_env(3, capacity=50_000)
        served_rows = []
        for t in range(1000):
            for q in queues:
                if rng.random() < 0.3:
                    q.enqueue_pdu(int(rng.integers(200, 1500)), t * 1000, t, 0)
            se = {v: float(rng.uniform(0.3, 5.0)) for v in range(3)}
            out = {v: bool(rng.random() < 0.1) for v in range(3)}
            served_rows += run_tti(queues, accs, se, out, now_us=t * 1000)
        for q in queues:
            assert q.offered_bytes == q.served_bytes + q.dropped_bytes + q.buffered_bytes
            assert q.offered_pdus == q.served_pdus + q.dropped_pdus + len(q.buffered)
        assert sum(r[3] for r in served_rows) == sum(q.served_bytes for q in queues)


class TestWindowStats:
    def test_empty_window_is_invalid_zeros(self):
        queues, accs = make_env(1)
        for t in range(100):
            run_tti(queues, accs, {0: 1.0}, {0: False}, now_us=t * 1000)
        stats = accs[0].close(queues[0], 0.1)
        assert not stats.valid
        assert stats.prb_utilization == 0.0
        assert stats.rlc_tx_pdus == 0
        assert stats.pdcp_throughput_bps == 0.0

    def test_half_share_every_tti_gives_half_utilization(self):
        # 64 MHz at half share and SE 1.0 gives exactly 3000 B per slot, so two
        # saturated queues of 1500 B PDUs use their share fully every slot.
        queues, accs = make_env(2)
        for q in queues:
            for i in range(2000):
                q.enqueue_pdu(1500, 0, 0, i)
        for t in range(100):
            run_tti(
                queues, accs, {0: 1.0, 1: 1.0}, {0: False, 1: False},
                bandwidth=64e6, now_us=t * 1000,
            )
        stats = accs[0].close(queues[0], 0.1)
        assert stats.prb_utilization == pytest.approx(0.5)

    def test_loss_ratio_from_offered_and_dropped(self):
        queues, accs = make_env(1, capacity=9 * 1500)
        q = queues[0]
        for i in range(10):
            accepted = q.enqueue_pdu(1500, 0, 0, i)
            accs[0].pdcp_tx_pdus += 1
            if not accepted:
                accs[0].rlc_dropped_pdus += 1
        stats = accs[0].close(q, 0.1)
        assert stats.pdcp_tx_pdus == 10
        assert stats.rlc_dropped_pdus == 1
        assert stats.pdcp_loss_ratio == pytest.approx(0.1)

    def test_queue_delay_mean(self):
        queues, accs = make_env(1)
        queues[0].enqueue_pdu(1000, 0, 0, 0)
        queues[0].enqueue_pdu(1000, 0, 0, 1)
        run_tti(queues, accs, {0: 1.0}, {0: False}, now_us=4000)
        stats = accs[0].close(queues[0], 0.1)
        assert stats.rlc_mean_queue_delay_s == pytest.approx(0.004)

    def test_close_resets_accumulator(self):
        queues, accs = make_env(1)
        queues[0].enqueue_pdu(1000, 0, 0, 0)
        run_tti(queues, accs, {0: 1.0}, {0: False})
        accs[0].record_channel(12.0, 16)
        accs[0].close(queues[0], 0.1)
        stats = accs[0].close(queues[0], 0.1)
        assert not stats.valid
        assert stats.mean_sinr_db == 0.0

    def test_channel_sample_means(self):
        queues, accs = make_env(1)
        accs[0].record_channel(10.0, 14)
        accs[0].record_channel(20.0, 20)
        accs[0].pdcp_tx_pdus = 1
        stats = accs[0].close(queues[0], 0.1)
        assert stats.mean_sinr_db == pytest.approx(15.0)
        assert stats.mean_mcs_index == pytest.approx(17.0)
