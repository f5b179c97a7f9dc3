"""The per-cell decision entity driving segmentation-mode adaptation.

Every 100 ms it receives the just-closed KPI windows, scores them into
observations and rewards, hands the policy one transition per vehicle for
the action that was in force during that window, asks the policy for the
next action, and returns the mode commands. During evaluation the policy
is frozen: no transitions are emitted and no learning hooks run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import Policy, Transition
from .app import AppKpiWindow, SegmentationMode
from .engine import ContractViolation
from .metrics import (
    KpiThresholds,
    StateConfig,
    StateScales,
    StepObservation,
    assemble_state,
    build_observation,
)
from .ran import LinkStatsWindow


@dataclass
class VehicleContext:
    vehicle_id: int
    current_mode: SegmentationMode
    last_state: np.ndarray | None = None
    last_action: int | None = None
    cumulative_reward: float = 0.0


class RanAi:
    """Collects windows, emits transitions, and commands modes each tick."""

    def __init__(
        self,
        policy: Policy,
        state_config: StateConfig,
        scales: StateScales,
        thresholds: KpiThresholds,
        mode_chamfer: tuple[float, float, float],
        training: bool,
    ) -> None:
        self.policy = policy
        self.state_config = state_config
        self.scales = scales
        self.thresholds = thresholds
        self.mode_chamfer = mode_chamfer
        self.training = training
        self.vehicles: dict[int, VehicleContext] = {}
        self.windows_processed = 0

    def register_vehicle(self, vehicle_id: int, initial_mode: SegmentationMode) -> None:
        if vehicle_id in self.vehicles:
            raise ContractViolation(f"vehicle {vehicle_id} already registered")
        self.vehicles[vehicle_id] = VehicleContext(vehicle_id, initial_mode)

    def on_update_tick(
        self,
        window_index: int,
        windows: dict[int, tuple[AppKpiWindow, LinkStatsWindow]],
        terminal: bool = False,
    ) -> tuple[list[tuple[int, SegmentationMode]], list[StepObservation]]:
        """Process one decision instant.

        window_index is the index of the window just closed; -1 means the
        pre-episode instant whose pseudo-window only seeds the first states.
        Returns the mode commands and the loggable observations.
        """
        if set(windows) != set(self.vehicles):
            raise ContractViolation("windows must cover exactly the registered vehicles")
        ids = sorted(self.vehicles)
        observations: dict[int, StepObservation] = {}
        for vid in ids:
            app_win, link_win = windows[vid]
            observations[vid] = build_observation(
                window_index,
                app_win,
                link_win,
                self.vehicles[vid].current_mode,
                self.mode_chamfer,
                self.thresholds,
            )
        states = {
            vid: assemble_state(
                observations[vid],
                [observations[p] for p in ids if p != vid],
                self.state_config,
                self.scales,
            )
            for vid in ids
        }
        records: list[StepObservation] = []
        if window_index >= 0:
            self.windows_processed += 1
            for vid in ids:
                obs = observations[vid]
                ctx = self.vehicles[vid]
                ctx.cumulative_reward += obs.reward
                records.append(obs)
                if self.training:
                    if ctx.last_state is None or ctx.last_action is None:
                        raise ContractViolation("closed a window without a prior action")
                    self.policy.observe(
                        Transition(
                            vehicle_id=vid,
                            state=ctx.last_state,
                            action=ctx.last_action,
                            reward=obs.reward,
                            next_state=states[vid],
                            terminal=terminal,
                        )
                    )
        commands: list[tuple[int, SegmentationMode]] = []
        if not terminal:
            for vid in ids:
                ctx = self.vehicles[vid]
                action = self.policy.act(states[vid], observations[vid], explore=self.training)
                if not 0 <= action < len(SegmentationMode):
                    raise ContractViolation(f"policy returned invalid action {action}")
                ctx.last_state = states[vid]
                ctx.last_action = action
                ctx.current_mode = SegmentationMode(action)
                commands.append((vid, ctx.current_mode))
        if self.training and window_index >= 0:
            self.policy.end_tick()
        return commands, records
