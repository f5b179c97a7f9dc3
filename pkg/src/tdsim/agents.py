"""Mode-selection policies: constant, delay heuristic, Double Q, PPO.

All policies share one interface so the orchestrator can drive any of them:
act() picks a segmentation mode from a state vector, observe() receives the
resulting transition, end_tick()/end_episode() are the learning hooks. The
two learners are built directly on the numpy DenseNet; their update math
(double-Q targets, clipped surrogate, GAE) lives in standalone functions so
tests can check it against hand-computed oracles.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .app import SegmentationMode
from .engine import ContractViolation, make_stream
from .metrics import StepObservation
from .nn import DenseNet, TrainingDiverged, make_optimizer

NUM_ACTIONS = len(SegmentationMode)


@dataclass
class Transition:
    vehicle_id: int
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class Policy:
    """Interface shared by every mode-selection strategy."""

    name = "base"
    learns = False

    def act(self, state: np.ndarray, obs: StepObservation, explore: bool) -> int:
        raise NotImplementedError

    def observe(self, transition: Transition) -> None:
        pass

    def end_tick(self) -> None:
        pass

    def end_episode(self) -> None:
        pass

    def parameter_checksum(self) -> str:
        return hashlib.sha256(self.name.encode()).hexdigest()

    def diagnostics(self) -> dict[str, float]:
        """Scalar training indicators for progress logs; empty if static."""
        return {}

    def save(self, out_dir: str) -> None:
        pass


class ConstantPolicy(Policy):
    def __init__(self, mode: SegmentationMode) -> None:
        self.mode = SegmentationMode(mode)
        self.name = f"C-{self.mode.name}"

    def act(self, state, obs, explore):
        return int(self.mode)


@dataclass
class HeuristicConfig:
    """Smoothed-delay control thresholds for the switching baseline."""

    upper_delay_s: float = 0.0625
    lower_delay_s: float = 0.0375
    smoothing: float = 0.2

    def __post_init__(self) -> None:
        if not 0 < self.lower_delay_s < self.upper_delay_s:
            raise ValueError("need 0 < lower < upper delay threshold")
        if not 0 < self.smoothing <= 1:
            raise ValueError("smoothing coefficient must be in (0, 1]")

    @property
    def neutral_delay_s(self) -> float:
        return 0.5 * (self.upper_delay_s + self.lower_delay_s)


def heuristic_step(
    smoothed_s: float,
    delay_s: float,
    current: SegmentationMode,
    cfg: HeuristicConfig,
) -> tuple[SegmentationMode, float]:
    """One control step; returns (mode, updated smoothed delay).

    The new sample is folded into an exponentially smoothed delay which is
    compared against the two thresholds: above the upper one the mode is
    compressed one notch, below the lower one it is relaxed one notch,
    saturating at the ends. The accumulator restarts from the neutral
    midpoint whenever the mode actually changes, so one sustained overload
    triggers one transition rather than a cascade.
    """
    smoothed = (1.0 - cfg.smoothing) * smoothed_s + cfg.smoothing * delay_s
    if smoothed > cfg.upper_delay_s and current < SegmentationMode.SA:
        return SegmentationMode(current + 1), cfg.neutral_delay_s
    if smoothed < cfg.lower_delay_s and current > SegmentationMode.R:
        return SegmentationMode(current - 1), cfg.neutral_delay_s
    return current, smoothed


class DelayHeuristicPolicy(Policy):
    """Per-vehicle smoothed-delay control over the window delay statistic."""

    name = "D-S"

    def __init__(self, cfg: HeuristicConfig | None = None) -> None:
        self.cfg = cfg or HeuristicConfig()
        self._smoothed: dict[int, float] = {}

    def act(self, state, obs, explore):
        sm = self._smoothed.get(obs.vehicle_id, self.cfg.neutral_delay_s)
        mode, sm = heuristic_step(sm, obs.app.delay_mean_s, obs.mode, self.cfg)
        self._smoothed[obs.vehicle_id] = sm
        return int(mode)

    def end_episode(self) -> None:
        self._smoothed.clear()


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling."""

    def __init__(self, capacity: int) -> None:
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._write = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._write] = item
        self._write = (self._write + 1) % self.capacity

    def sample(self, rng: np.random.Generator, batch_size: int) -> list[Transition]:
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]


def double_q_targets(
    rewards: np.ndarray,
    terminals: np.ndarray,
    q_next_online: np.ndarray,
    q_next_target: np.ndarray,
    discount: float,
) -> np.ndarray:
    """Bootstrapped targets with the online argmax evaluated by the target net.

    Terminal transitions do not bootstrap.
    """
    best_actions = np.argmax(q_next_online, axis=1)
    bootstrap = q_next_target[np.arange(len(best_actions)), best_actions]
    return rewards + discount * bootstrap * (1.0 - terminals)


@dataclass
class DqlConfig:
    hidden_sizes: tuple[int, ...] = (64, 16)
    learning_rate: float = 1e-4
    discount: float = 0.95
    replay_capacity: int = 100_000
    batch_size: int = 32
    warmup_transitions: int = 1_000
    target_sync_period: int = 100
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_anneal_fraction: float = 0.5
    optimizer: str = "adam"

    def __post_init__(self) -> None:
        if not 0 <= self.epsilon_end <= self.epsilon_start <= 1:
            raise ValueError("bad epsilon schedule")
        if not 0 < self.epsilon_anneal_fraction <= 1:
            raise ValueError("anneal fraction must be in (0,1]")
        if self.batch_size > self.warmup_transitions:
            raise ValueError("warmup must cover at least one batch")
        if not 0 <= self.discount < 1:
            raise ValueError("discount must be in [0,1)")


class DqlAgent(Policy):
    """Double Q-learning with a replay ring and a hard-synced target net."""

    name = "DQL"
    learns = True

    def __init__(
        self,
        state_dim: int,
        cfg: DqlConfig,
        seed: int,
        total_explore_steps: int,
    ) -> None:
        self.cfg = cfg
        self.state_dim = state_dim
        layers = (state_dim, *cfg.hidden_sizes, NUM_ACTIONS)
        self.online = DenseNet.create(layers, make_stream("dql-init", seed))
        self.target = self.online.copy()
        self._opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
        self._explore_rng = make_stream("dql-explore", seed).rng
        self._sample_rng = make_stream("dql-sample", seed).rng
        self.replay = ReplayBuffer(cfg.replay_capacity)
        self.total_explore_steps = max(1, total_explore_steps)
        self.explore_calls = 0
        self.grad_steps = 0
        self.last_loss = 0.0

    def epsilon(self) -> float:
        cfg = self.cfg
        anneal = self.total_explore_steps * cfg.epsilon_anneal_fraction
        frac = min(1.0, self.explore_calls / anneal)
        return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac

    def act(self, state, obs, explore):
        if explore:
            eps = self.epsilon()
            self.explore_calls += 1
            if self._explore_rng.random() < eps:
                return int(self._explore_rng.integers(0, NUM_ACTIONS))
        return int(np.argmax(self.online.forward(state)))

    def observe(self, transition: Transition) -> None:
        self.replay.push(transition)

    def end_tick(self) -> None:
        if len(self.replay) < max(self.cfg.warmup_transitions, self.cfg.batch_size):
            return
        batch = self.replay.sample(self._sample_rng, self.cfg.batch_size)
        states = np.stack([t.state for t in batch])
        next_states = np.stack([t.next_state for t in batch])
        actions = np.array([t.action for t in batch])
        rewards = np.array([t.reward for t in batch])
        terminals = np.array([float(t.terminal) for t in batch])
        targets = double_q_targets(
            rewards,
            terminals,
            self.online.forward_batch(next_states)[0],
            self.target.forward_batch(next_states)[0],
            self.cfg.discount,
        )
        q, cache = self.online.forward_batch(states)
        rows = np.arange(len(batch))
        td_error = q[rows, actions] - targets
        self.last_loss = float(np.mean(td_error**2))
        if not np.isfinite(self.last_loss):
            raise TrainingDiverged(f"DQL loss {self.last_loss}")
        upstream = np.zeros_like(q)
        upstream[rows, actions] = 2.0 * td_error / len(batch)
        self._opt.step(self.online, self.online.backward_batch(cache, upstream))
        self.grad_steps += 1
        if self.grad_steps % self.cfg.target_sync_period == 0:
            self.target.copy_from(self.online)

    def parameter_checksum(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.online.checksum().encode())
        digest.update(self.target.checksum().encode())
        return digest.hexdigest()

    def diagnostics(self) -> dict[str, float]:
        return {"epsilon": self.epsilon(), "td_loss": self.last_loss}

    def save(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        self.online.save(os.path.join(out_dir, "dql_online.npz"))
        self.target.save(os.path.join(out_dir, "dql_target.npz"))
        meta = {
            "policy": self.name,
            "state_dim": self.state_dim,
            "config": asdict(self.cfg),
            "explore_calls": self.explore_calls,
            "grad_steps": self.grad_steps,
        }
        with open(os.path.join(out_dir, "policy.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @classmethod
    def restore(cls, out_dir: str) -> "DqlAgent":
        with open(os.path.join(out_dir, "policy.json")) as fh:
            meta = json.load(fh)
        cfg_kw = dict(meta["config"])
        cfg_kw["hidden_sizes"] = tuple(cfg_kw["hidden_sizes"])
        agent = cls(meta["state_dim"], DqlConfig(**cfg_kw), seed=0, total_explore_steps=1)
        agent.online = DenseNet.load(os.path.join(out_dir, "dql_online.npz"))
        agent.target = DenseNet.load(os.path.join(out_dir, "dql_target.npz"))
        agent.explore_calls = meta["explore_calls"]
        agent.grad_steps = meta["grad_steps"]
        return agent


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def gae_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    terminals: np.ndarray,
    discount: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and value targets for one sequence.

    values[t] is the critic's estimate at state t; the state after a
    terminal transition is worth zero and later steps (if any) do not leak
    backwards across it.
    """
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        next_value = 0.0 if terminals[t] or t == n - 1 else values[t + 1]
        delta = rewards[t] + discount * next_value - values[t]
        running = delta + discount * lam * running * (1.0 - terminals[t])
        adv[t] = running
    return adv, adv + values


def clipped_surrogate(
    ratio: np.ndarray, advantage: np.ndarray, clip_ratio: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample PPO objective and the mask of samples whose gradient flows.

    The objective is min(ratio*A, clip(ratio)*A); the gradient passes through
    the raw-ratio branch exactly where that branch attains the min.
    """
    clipped = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio)
    raw_term = ratio * advantage
    clip_term = clipped * advantage
    objective = np.minimum(raw_term, clip_term)
    return objective, (raw_term <= clip_term).astype(float)


@dataclass
class PpoConfig:
    hidden_sizes: tuple[int, ...] = (64, 16)
    actor_learning_rate: float = 1e-4
    critic_learning_rate: float = 5e-4
    discount: float = 0.95
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    entropy_coef: float = 0.01
    epochs: int = 32
    minibatch_size: int = 256
    normalize_advantages: bool = True
    optimizer: str = "adam"

    def __post_init__(self) -> None:
        if not 0 < self.clip_ratio < 1:
            raise ValueError("clip ratio must be in (0,1)")
        if self.epochs <= 0 or self.minibatch_size <= 0:
            raise ValueError("epochs and minibatch size must be positive")
        if not 0 <= self.discount < 1 or not 0 <= self.gae_lambda <= 1:
            raise ValueError("bad discount/lambda")


class PpoAgent(Policy):
    """Clipped-surrogate policy gradient with GAE, updated per episode."""

    name = "PPO"
    learns = True

    def __init__(self, state_dim: int, cfg: PpoConfig, seed: int) -> None:
        self.cfg = cfg
        self.state_dim = state_dim
        self.actor = DenseNet.create(
            (state_dim, *cfg.hidden_sizes, NUM_ACTIONS), make_stream("ppo-actor-init", seed)
        )
        self.critic = DenseNet.create(
            (state_dim, *cfg.hidden_sizes, 1), make_stream("ppo-critic-init", seed)
        )
        self._opt_actor = make_optimizer(cfg.optimizer, cfg.actor_learning_rate)
        self._opt_critic = make_optimizer(cfg.optimizer, cfg.critic_learning_rate)
        self._act_rng = make_stream("ppo-explore", seed).rng
        self._shuffle_rng = make_stream("ppo-shuffle", seed).rng
        # Set at act() time, consumed by observe(); keyed by vehicle.
        self._pending: dict[int, tuple[float, float]] = {}
        self._rollout: dict[int, list] = {}
        self.updates = 0
        self.last_actor_loss = 0.0
        self.last_critic_loss = 0.0

    def act(self, state, obs, explore):
        logits = self.actor.forward(state)
        probs = softmax(logits)
        if explore:
            action = int(self._act_rng.choice(NUM_ACTIONS, p=probs))
            logp = float(np.log(max(probs[action], 1e-300)))
            value = float(self.critic.forward(state)[0])
            self._pending[obs.vehicle_id] = (logp, value)
            return action
        return int(np.argmax(probs))

    def observe(self, transition: Transition) -> None:
        pending = self._pending.pop(transition.vehicle_id, None)
        if pending is None:
            raise ContractViolation(
                f"transition for vehicle {transition.vehicle_id} without a stored act"
            )
        logp, value = pending
        self._rollout.setdefault(transition.vehicle_id, []).append(
            (transition.state, transition.action, transition.reward, transition.terminal, logp, value)
        )

    def end_episode(self) -> None:
        if self._rollout:
            self._update()
        self._rollout = {}
        self._pending = {}

    def _update(self) -> None:
        cfg = self.cfg
        states, actions, logp_old, advs, rets = [], [], [], [], []
        for vid in sorted(self._rollout):
            rows = self._rollout[vid]
            rewards = np.array([r[2] for r in rows])
            terminals = np.array([float(r[3]) for r in rows])
            values = np.array([r[5] for r in rows])
            adv, ret = gae_advantages(rewards, values, terminals, cfg.discount, cfg.gae_lambda)
            states.extend(r[0] for r in rows)
            actions.extend(r[1] for r in rows)
            logp_old.extend(r[4] for r in rows)
            advs.append(adv)
            rets.append(ret)
        x = np.stack(states)
        a = np.array(actions)
        lp_old = np.array(logp_old)
        adv = np.concatenate(advs)
        ret = np.concatenate(rets)
        if cfg.normalize_advantages:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        n = len(a)
        rows_idx = np.arange(n)
        actor_losses, critic_losses = [], []
        for _ in range(cfg.epochs):
            perm = self._shuffle_rng.permutation(n)
            for lo in range(0, n, cfg.minibatch_size):
                mb = perm[lo : lo + cfg.minibatch_size]
                xb, ab, advb, retb, lpb = x[mb], a[mb], adv[mb], ret[mb], lp_old[mb]
                m = len(mb)
                mrows = np.arange(m)

                logits, cache = self.actor.forward_batch(xb)
                logp_all = log_softmax(logits)
                probs = np.exp(logp_all)
                ratio = np.exp(logp_all[mrows, ab] - lpb)
                objective, flow = clipped_surrogate(ratio, advb, cfg.clip_ratio)
                entropy = -np.sum(probs * logp_all, axis=1)
                actor_loss = float(-np.mean(objective) - cfg.entropy_coef * np.mean(entropy))
                one_hot = np.zeros_like(probs)
                one_hot[mrows, ab] = 1.0
                surrogate_grad = (
                    -(advb * ratio * flow)[:, None] * (one_hot - probs)
                )
                entropy_grad = cfg.entropy_coef * probs * (logp_all + entropy[:, None])
                upstream = (surrogate_grad + entropy_grad) / m
                self._opt_actor.step(self.actor, self.actor.backward_batch(cache, upstream))

                v, vcache = self.critic.forward_batch(xb)
                verr = v[:, 0] - retb
                critic_loss = float(np.mean(verr**2))
                vupstream = (2.0 * verr / m)[:, None]
                self._opt_critic.step(self.critic, self.critic.backward_batch(vcache, vupstream))

                if not np.isfinite(actor_loss) or not np.isfinite(critic_loss):
                    raise TrainingDiverged(
                        f"PPO losses actor={actor_loss} critic={critic_loss}"
                    )
                actor_losses.append(actor_loss)
                critic_losses.append(critic_loss)
        self.last_actor_loss = float(np.mean(actor_losses))
        self.last_critic_loss = float(np.mean(critic_losses))
        self.updates += 1

    def parameter_checksum(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.actor.checksum().encode())
        digest.update(self.critic.checksum().encode())
        return digest.hexdigest()

    def diagnostics(self) -> dict[str, float]:
        return {"actor_loss": self.last_actor_loss, "critic_loss": self.last_critic_loss}

    def save(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        self.actor.save(os.path.join(out_dir, "ppo_actor.npz"))
        self.critic.save(os.path.join(out_dir, "ppo_critic.npz"))
        meta = {
            "policy": self.name,
            "state_dim": self.state_dim,
            "config": asdict(self.cfg),
            "updates": self.updates,
        }
        with open(os.path.join(out_dir, "policy.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @classmethod
    def restore(cls, out_dir: str) -> "PpoAgent":
        with open(os.path.join(out_dir, "policy.json")) as fh:
            meta = json.load(fh)
        cfg_kw = dict(meta["config"])
        cfg_kw["hidden_sizes"] = tuple(cfg_kw["hidden_sizes"])
        agent = cls(meta["state_dim"], PpoConfig(**cfg_kw), seed=0)
        agent.actor = DenseNet.load(os.path.join(out_dir, "ppo_actor.npz"))
        agent.critic = DenseNet.load(os.path.join(out_dir, "ppo_critic.npz"))
        agent.updates = meta["updates"]
        return agent


POLICY_NAMES = ("C-R", "C-SC", "C-SA", "D-S", "DQL", "PPO")


def make_policy(
    policy_type: str,
    state_dim: int,
    seed: int,
    total_explore_steps: int,
    dql: DqlConfig | None = None,
    ppo: PpoConfig | None = None,
    heuristic: HeuristicConfig | None = None,
) -> Policy:
    if policy_type == "C-R":
        return ConstantPolicy(SegmentationMode.R)
    if policy_type == "C-SC":
        return ConstantPolicy(SegmentationMode.SC)
    if policy_type == "C-SA":
        return ConstantPolicy(SegmentationMode.SA)
    if policy_type == "D-S":
        return DelayHeuristicPolicy(heuristic)
    if policy_type == "DQL":
        return DqlAgent(state_dim, dql or DqlConfig(), seed, total_explore_steps)
    if policy_type == "PPO":
        return PpoAgent(state_dim, ppo or PpoConfig(), seed)
    raise ValueError(f"unknown policy type '{policy_type}' (choose from {POLICY_NAMES})")
