"""Decision-loop contract: windows in, commands out, transitions aligned.

The core test scripts a short episode with recognizable per-window rewards
and asserts every emitted transition carries the reward of exactly the
window during which its action was in force.
"""

import numpy as np
import pytest

from tdsim.agents import Policy
from tdsim.app import AppKpiWindow, SegmentationMode
from tdsim.engine import ContractViolation
from tdsim.metrics import KpiThresholds, StateConfig, StateScales, qoe
from tdsim.orchestrator import RanAi
from tdsim.ran import LinkStatsWindow

CHAMFER = (0.0, 13.5, 31.5)
GOOD_DELAY = 0.020
BAD_DELAY = 0.090


def app_window(vid=0, delay=GOOD_DELAY, n_tx=10, n_rx=10):
    return AppKpiWindow(
        vehicle_id=vid,
        n_tx=n_tx,
        n_rx=n_rx,
        delay_mean_s=delay,
        delay_std_s=0.0,
        delay_min_s=delay,
        delay_max_s=delay,
        throughput_bps=n_rx * 1500 * 8 / 0.1,
        valid=n_rx > 0,
    )


def link_window(vid=0):
    return LinkStatsWindow(
        vehicle_id=vid,
        valid=True,
        mean_sinr_db=10.0,
        mean_mcs_index=14.0,
        prb_utilization=0.5,
        rlc_queue_bytes=0,
        rlc_mean_queue_delay_s=0.0,
        rlc_tx_pdus=10,
        rlc_dropped_pdus=0,
        rlc_retx=0,
        pdcp_tx_pdus=10,
        pdcp_rx_pdus=10,
        pdcp_mean_delay_s=0.02,
        pdcp_throughput_bps=1.2e6,
        pdcp_loss_ratio=0.0,
    )


class ScriptedPolicy(Policy):
    """Plays a fixed per-vehicle action script and records every call."""

    name = "scripted"
    learns = True

    def __init__(self, scripts: dict[int, list[int]]):
        self.scripts = {v: list(a) for v, a in scripts.items()}
        self.act_calls: list[tuple[int, int, bool]] = []
        self.observed = []
        self.end_ticks = 0

    def act(self, state, obs, explore):
        self.act_calls.append((obs.vehicle_id, obs.step_index, explore))
        return self.scripts[obs.vehicle_id].pop(0)

    def observe(self, transition):
        self.observed.append(transition)

    def end_tick(self):
        self.end_ticks += 1


def make_ranai(policy, n=1, training=True, state_config=StateConfig.APP):
    ai = RanAi(
        policy=policy,
        state_config=state_config,
        scales=StateScales(),
        thresholds=KpiThresholds(),
        mode_chamfer=CHAMFER,
        training=training,
    )
    for v in range(n):
        ai.register_vehicle(v, SegmentationMode.R)
    return ai


def windows(n, delays):
    return {v: (app_window(v, delay=delays[v]), link_window(v)) for v in range(n)}


class TestRewardAttribution:
    def test_scripted_rewards_follow_actions(self):
        # Mode script R, SC, SA; window quality script good, bad, good.
        # Reward for the window following action a must be qos * qoe(mode a).
        pol = ScriptedPolicy({0: [0, 1, 2]})
        ai = make_ranai(pol)

        ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))          # pre-episode
        ai.on_update_tick(0, windows(1, [GOOD_DELAY]))           # window 0: R, good
        ai.on_update_tick(1, windows(1, [BAD_DELAY]))            # window 1: SC, bad
        ai.on_update_tick(2, windows(1, [GOOD_DELAY]), terminal=True)  # window 2: SA, good

        assert len(pol.observed) == 3
        expected = [
            qoe(CHAMFER[0], KpiThresholds()),  # R in force, qos 1
            0.0,                               # SC in force, qos 0
            qoe(CHAMFER[2], KpiThresholds()),  # SA in force, qos 1
        ]
        got = [t.reward for t in pol.observed]
        assert got == pytest.approx(expected)
        assert [t.action for t in pol.observed] == [0, 1, 2]
        assert [t.terminal for t in pol.observed] == [False, False, True]

    def test_transition_states_chain(self):
        pol = ScriptedPolicy({0: [0, 1, 2]})
        ai = make_ranai(pol)
        ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))
        ai.on_update_tick(0, windows(1, [GOOD_DELAY]))
        ai.on_update_tick(1, windows(1, [BAD_DELAY]))
        ai.on_update_tick(2, windows(1, [GOOD_DELAY]), terminal=True)
        t0, t1, t2 = pol.observed
        assert np.array_equal(t0.next_state, t1.state)
        assert np.array_equal(t1.next_state, t2.state)

    def test_records_carry_the_mode_in_force(self):
        pol = ScriptedPolicy({0: [0, 1, 2]})
        ai = make_ranai(pol)
        ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))
        _, recs0 = ai.on_update_tick(0, windows(1, [GOOD_DELAY]))
        _, recs1 = ai.on_update_tick(1, windows(1, [GOOD_DELAY]))
        _, recs2 = ai.on_update_tick(2, windows(1, [GOOD_DELAY]), terminal=True)
        assert recs0[0].mode == SegmentationMode.R
        assert recs1[0].mode == SegmentationMode.SC
        assert recs2[0].mode == SegmentationMode.SA

    def test_cumulative_reward_accumulates_within_bounds(self):
        pol = ScriptedPolicy({0: [0, 1, 2]})
        ai = make_ranai(pol)
        ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))
        ai.on_update_tick(0, windows(1, [GOOD_DELAY]))
        ai.on_update_tick(1, windows(1, [BAD_DELAY]))
        ai.on_update_tick(2, windows(1, [GOOD_DELAY]), terminal=True)
        total = ai.vehicles[0].cumulative_reward
        assert total == pytest.approx(1.0 + 0.0 + qoe(CHAMFER[2], KpiThresholds()))
        assert 0.0 <= total <= 3.0


class TestTickProtocol:
    def test_pre_episode_tick_emits_nothing(self):
        pol = ScriptedPolicy({0: [0]})
        ai = make_ranai(pol)
        commands, records = ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))
        assert records == []
        assert pol.observed == []
        assert pol.end_ticks == 0
        assert commands == [(0, SegmentationMode.R)]

    def test_one_transition_per_vehicle_per_window(self):
        n = 3
        pol = ScriptedPolicy({v: [1] * 6 for v in range(n)})
        ai = make_ranai(pol, n=n)
        delays = [GOOD_DELAY] * n
        ai.on_update_tick(-1, windows(n, delays))
        for k in range(5):
            ai.on_update_tick(k, windows(n, delays), terminal=(k == 4))
        assert len(pol.observed) == 5 * n
        for v in range(n):
            mine = [t for t in pol.observed if t.vehicle_id == v]
            assert len(mine) == 5
            assert [t.terminal for t in mine] == [False] * 4 + [True]
        assert ai.windows_processed == 5

    def test_terminal_tick_issues_no_commands(self):
        pol = ScriptedPolicy({0: [0, 0]})
        ai = make_ranai(pol)
        ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))
        ai.on_update_tick(0, windows(1, [GOOD_DELAY]))
        commands, _ = ai.on_update_tick(1, windows(1, [GOOD_DELAY]), terminal=True)
        assert commands == []
        assert len(pol.act_calls) == 2

    def test_end_tick_called_once_per_closed_window(self):
        pol = ScriptedPolicy({0: [0] * 4})
        ai = make_ranai(pol)
        ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))
        for k in range(4):
            ai.on_update_tick(k, windows(1, [GOOD_DELAY]), terminal=(k == 3))
        assert pol.end_ticks == 4

    def test_frozen_mode_never_trains(self):
        pol = ScriptedPolicy({0: [0, 1, 2]})
        ai = make_ranai(pol, training=False)
        ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))
        ai.on_update_tick(0, windows(1, [GOOD_DELAY]))
        ai.on_update_tick(1, windows(1, [GOOD_DELAY]), terminal=True)
        assert pol.observed == []
        assert pol.end_ticks == 0
        assert all(not explore for _, _, explore in pol.act_calls)

    def test_training_mode_explores(self):
        pol = ScriptedPolicy({0: [0, 0]})
        ai = make_ranai(pol, training=True)
        ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))
        ai.on_update_tick(0, windows(1, [GOOD_DELAY]))
        assert all(explore for _, _, explore in pol.act_calls)


class TestValidation:
    def test_duplicate_registration_rejected(self):
        ai = make_ranai(ScriptedPolicy({0: []}))
        with pytest.raises(ContractViolation):
            ai.register_vehicle(0, SegmentationMode.SC)

    def test_windows_must_cover_fleet(self):
        pol = ScriptedPolicy({v: [0] for v in range(2)})
        ai = make_ranai(pol, n=2)
        with pytest.raises(ContractViolation):
            ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))

    def test_invalid_action_rejected(self):
        pol = ScriptedPolicy({0: [7]})
        ai = make_ranai(pol)
        with pytest.raises(ContractViolation):
            ai.on_update_tick(-1, windows(1, [GOOD_DELAY]))

    def test_states_match_configured_dimension(self):
        pol = ScriptedPolicy({v: [0, 0] for v in range(2)})
        ai = make_ranai(pol, n=2, state_config=StateConfig.FULL)
        ai.on_update_tick(-1, windows(2, [GOOD_DELAY] * 2))
        ai.on_update_tick(0, windows(2, [GOOD_DELAY] * 2), terminal=True)
        assert all(t.state.shape == (18,) for t in pol.observed)
