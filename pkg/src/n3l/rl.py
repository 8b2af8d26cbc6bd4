"""Point-placement MDP and a PPO learner with action masking.

Rewards per step: +1 for a placement creating no collinear triple, -10 for a
placement that creates one (the point is still placed), -1 for choosing an
occupied cell (nothing changes). The step that brings the count to 2n also
earns +100 if the grid has no violations, otherwise +10, and ends the episode.
"""

from __future__ import annotations

import copy
import csv
import json
import time
from dataclasses import asdict, dataclass, field, fields
from itertools import combinations

import numpy as np

from . import nn
from . import tensor as T
from .grid import ContractError, GridConfig, Point, collinear
from .tensor import Tensor, UsageError

REWARD_VALID = 1.0
REWARD_VIOLATION = -10.0
REWARD_OCCUPIED = -1.0
BONUS_PERFECT = 100.0
BONUS_COMPLETE = 10.0

MASK_FILL = -1e9


# -- environment ---------------------------------------------------------------------

@dataclass(frozen=True)
class EnvState:
    grid: GridConfig
    violations: int = 0
    done: bool = False

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def k(self) -> int:
        return len(self.grid)

    def observation(self) -> np.ndarray:
        return self.grid.occupancy().reshape(-1).astype(np.float64)


def reset(n: int) -> EnvState:
    return EnvState(GridConfig(n))


def new_triples(grid: GridConfig, p) -> int:
    return sum(1 for a, b in combinations(grid.points, 2) if collinear(a, b, p))


def action_mask(state: EnvState, strict: bool = False) -> np.ndarray:
    n = state.n
    mask = ~state.grid.occupancy().reshape(-1)
    if strict:
        for a in np.flatnonzero(mask):
            if new_triples(state.grid, Point(a // n, a % n)):
                mask[a] = False
    return mask


def env_step(state: EnvState, action: int, strict: bool = False) -> tuple[EnvState, float, bool]:
    n = state.n
    if state.done:
        raise UsageError("env_step() called on a finished episode")
    if not 0 <= action < n * n:
        raise ContractError(f"action {action} outside [0, {n * n})")
    p = Point(action // n, action % n)
    if p in state.grid:
        return state, REWARD_OCCUPIED, False
    created = new_triples(state.grid, p)
    grid = state.grid.with_point(p)
    violations = state.violations + created
    reward = REWARD_VIOLATION if created else REWARD_VALID
    done = len(grid) == 2 * n
    if done:
        reward += BONUS_PERFECT if violations == 0 else BONUS_COMPLETE
    nxt = EnvState(grid, violations, done)
    if strict and not done and not action_mask(nxt, strict=True).any():
        # dead end before 2n points: force-terminate without a bonus
        nxt = EnvState(grid, violations, True)
        done = True
    return nxt, reward, done


class Env:
    """Stateful wrapper over :func:`env_step`."""

    def __init__(self, n: int, strict: bool = False):
        self.n = n
        self.strict = strict
        self.state = reset(n)

    def reset(self) -> np.ndarray:
        self.state = reset(self.n)
        return self.state.observation()

    def mask(self) -> np.ndarray:
        return action_mask(self.state, self.strict)

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        self.state, reward, done = env_step(self.state, int(action), self.strict)
        return self.state.observation(), reward, done


# -- advantage estimation and losses ---------------------------------------------------

def gae(rewards, values, dones, gamma: float, lam: float, last_value=0.0):
    """Generalized advantage estimates over time axis 0.

    ``dones[t]`` marks that the episode ended with step t, so no value is
    bootstrapped across it. ``last_value`` is V of the state after the final
    step. Returns (advantages, returns).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if not (rewards.shape == values.shape == dones.shape):
        raise ContractError(f"gae: shapes {rewards.shape}, {values.shape}, {dones.shape} differ")
    adv = np.zeros_like(rewards)
    running = np.zeros_like(rewards[0]) if rewards.ndim > 1 else 0.0
    next_value = np.asarray(last_value, dtype=np.float64)
    for t in reversed(range(len(rewards))):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


def clipped_surrogate(ratio, adv, clip: float) -> np.ndarray:
    ratio = np.asarray(ratio, dtype=np.float64)
    adv = np.asarray(adv, dtype=np.float64)
    return np.minimum(ratio * adv, np.clip(ratio, 1 - clip, 1 + clip) * adv)


@dataclass
class PpoBatch:
    obs: np.ndarray
    masks: np.ndarray
    actions: np.ndarray
    old_logp: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)

    def subset(self, idx) -> "PpoBatch":
        return PpoBatch(*(getattr(self, f.name)[idx] for f in fields(self)))


def masked_log_probs(logits: Tensor, masks: np.ndarray) -> Tensor:
    return T.log_softmax(T.where(masks, logits, MASK_FILL), axis=-1)


def ppo_losses(batch: PpoBatch, logits: Tensor, values: Tensor, cfg: "PpoConfig") -> dict[str, Tensor]:
    """Clip objective (maximized), value loss, entropy and total (minimized)."""
    logp_all = masked_log_probs(logits, batch.masks)
    logp = T.take_last(logp_all, batch.actions)
    ratio = T.exp(logp - batch.old_logp)
    adv = batch.advantages
    unclipped = ratio * adv
    clipped = _clip_term(ratio, adv, 1.0 - cfg.clip, 1.0 + cfg.clip)
    take_unclipped = unclipped.data <= clipped.data
    surrogate = T.where(take_unclipped, unclipped, 0.0) + T.where(~take_unclipped, clipped, 0.0)
    clip_obj = surrogate.mean()
    value_loss = ((values - batch.returns) ** 2).mean()
    entropy = (-(T.exp(logp_all) * logp_all).sum(axis=-1)).mean()
    total = -clip_obj + cfg.vf_coef * value_loss - cfg.ent_coef * entropy
    return {"clip": clip_obj, "value": value_loss, "entropy": entropy, "total": total}


def _clip_term(ratio: Tensor, adv: np.ndarray, lo: float, hi: float) -> Tensor:
    r = ratio.data
    inside = (r >= lo) & (r <= hi)
    # outside the interval the clipped ratio is a constant with zero gradient
    return T.where(inside, ratio, 0.0) * adv + np.where(inside, 0.0, np.clip(r, lo, hi)) * adv


# -- networks and policies --------------------------------------------------------------

@dataclass
class PpoConfig:
    n: int = 3
    clip: float = 0.2
    vf_coef: float = 0.5
    ent_coef: float = 0.01
    gamma: float = 0.99
    gae_lambda: float = 0.95
    lr: float = 3e-4
    lr_decay: float = 0.8
    decay_interval: int = 1_000_000
    envs: int = 4
    rollout: int = 256
    minibatch: int = 256
    epochs: int = 4
    hidden: list[int] = field(default_factory=lambda: [128, 128])
    total_steps: int = 200_000
    eval_every: int = 5
    eval_episodes: int = 20
    normalize_advantages: bool = True
    max_grad_norm: float | None = 0.5
    strict: bool = False
    target_success: float | None = 1.0
    patience: int = 3

    def __post_init__(self):
        if not 0 < self.clip:
            raise ValueError(f"clip must be positive, got {self.clip}")
        if not (0 < self.gamma <= 1 and 0 < self.gae_lambda <= 1):
            raise ValueError("gamma and gae_lambda must lie in (0, 1]")

    @classmethod
    def full_scale(cls, n: int = 10, **kw) -> "PpoConfig":
        return cls(n=n, envs=30, rollout=2048, minibatch=1024, epochs=10, hidden=[512, 512],
                   total_steps=10_000_000, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "PpoConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown PPO config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


class ActorCritic(nn.Module):
    """Shared ReLU trunk feeding a policy head over n*n cells and a value head."""

    def __init__(self, n: int, hidden: list[int], seed: int = 0):
        rng = np.random.default_rng(seed)
        self.n = n
        self.trunk = nn.MLP([n * n, *hidden], rng)
        self.pi = nn.Linear(hidden[-1], n * n, rng, std=0.01)
        self.v = nn.Linear(hidden[-1], 1, rng)

    def __call__(self, obs) -> tuple[Tensor, Tensor]:
        h = self.trunk(T.tensor(obs))
        return self.pi(h), self.v(h).reshape(-1)


def _masked_probs(logits: np.ndarray, masks: np.ndarray) -> np.ndarray:
    z = np.where(masks, logits, MASK_FILL)
    z = z - z.max(axis=-1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=-1, keepdims=True)


def _sample_rows(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random((len(p), 1))
    idx = (p.cumsum(axis=1) < u).sum(axis=1)
    return np.minimum(idx, p.shape[1] - 1)


class NetPolicy:
    def __init__(self, net: ActorCritic):
        self.net = net

    def act(self, obs: np.ndarray, mask: np.ndarray, rng: np.random.Generator,
            deterministic: bool = True) -> int:
        with T.no_grad():
            logits, _ = self.net(obs[None, :])
        p = _masked_probs(logits.data, mask[None, :])[0]
        if deterministic:
            return int(np.argmax(np.where(mask, p, -1.0)))
        return int(_sample_rows(p[None, :], rng)[0])


class RandomPolicy:
    def act(self, obs, mask, rng, deterministic: bool = True) -> int:
        return int(rng.choice(np.flatnonzero(mask)))


class ScriptedPolicy:
    """Replays a fixed placement order, e.g. a known optimum."""

    def __init__(self, config: GridConfig):
        self.n = config.n
        self.order = [r * config.n + c for r, c in config.points]

    def act(self, obs, mask, rng, deterministic: bool = True) -> int:
        k = int(np.asarray(obs).sum())
        if k < len(self.order) and mask[self.order[k]]:
            return self.order[k]
        return int(np.flatnonzero(mask)[0])


# -- evaluation ------------------------------------------------------------------------

def composite_score(points: int, violations: int, success: bool) -> float:
    """Artifact-defined: points - 5 * violations + 20 * success."""
    return points - 5.0 * violations + 20.0 * float(success)


def run_episode(policy, n: int, rng: np.random.Generator, deterministic: bool = True,
                strict: bool = False) -> dict:
    state = reset(n)
    total = 0.0
    actions = []
    while not state.done:
        mask = action_mask(state, strict)
        if not mask.any():
            break
        a = policy.act(state.observation(), mask, rng, deterministic)
        actions.append(a)
        state, r, _ = env_step(state, a, strict)
        total += r
    success = state.k == 2 * n and state.violations == 0
    return {"points": state.k, "violations": state.violations, "success": success,
            "return": total, "actions": actions}


def evaluate(policy, n: int, episodes: int = 20, seed: int = 0, deterministic: bool = True,
             strict: bool = False) -> dict:
    rng = np.random.default_rng(seed)
    eps = [run_episode(policy, n, rng, deterministic, strict) for _ in range(episodes)]
    return {
        "episodes": episodes,
        "success_rate": float(np.mean([e["success"] for e in eps])),
        "mean_points": float(np.mean([e["points"] for e in eps])),
        "avg_violations": float(np.mean([e["violations"] for e in eps])),
        "mean_return": float(np.mean([e["return"] for e in eps])),
        "composite": float(np.mean([composite_score(e["points"], e["violations"], e["success"])
                                    for e in eps])),
    }


# -- training --------------------------------------------------------------------------

@dataclass
class Rollout:
    batch: PpoBatch
    episode_returns: list[float]
    episode_violations: list[int]
    episode_success: list[bool]


class PpoTrainer:
    def __init__(self, cfg: PpoConfig, seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        self.net = ActorCritic(cfg.n, cfg.hidden, seed)
        self.optimizer = nn.Adam(self.net.parameters(), lr=cfg.lr)
        self.rng = np.random.default_rng([seed, 1])
        self.envs = [Env(cfg.n, cfg.strict) for _ in range(cfg.envs)]
        self.obs = np.stack([e.reset() for e in self.envs])
        self.ep_return = np.zeros(cfg.envs)
        self.steps = 0
        self.updates = 0
        self.log: list[dict] = []
        self.evals: list[dict] = []
        self.best_state = self.net.state_dict()
        self.best_composite = -np.inf
        self.best_eval: dict | None = None

    def current_lr(self) -> float:
        return nn.step_decay(self.cfg.lr, self.steps, self.cfg.decay_interval, self.cfg.lr_decay)

    def collect(self) -> Rollout:
        cfg = self.cfg
        L, E, A = cfg.rollout, cfg.envs, cfg.n * cfg.n
        obs = np.zeros((L, E, A))
        masks = np.zeros((L, E, A), dtype=bool)
        actions = np.zeros((L, E), dtype=np.int64)
        logps = np.zeros((L, E))
        values = np.zeros((L, E))
        rewards = np.zeros((L, E))
        dones = np.zeros((L, E))
        ep_returns, ep_viol, ep_succ = [], [], []
        for t in range(L):
            m = np.stack([e.mask() for e in self.envs])
            with T.no_grad():
                logits, v = self.net(self.obs)
            p = _masked_probs(logits.data, m)
            a = _sample_rows(p, self.rng)
            obs[t], masks[t], actions[t], values[t] = self.obs, m, a, v.data
            logps[t] = np.log(p[np.arange(E), a])
            for i, env in enumerate(self.envs):
                o, r, d = env.step(a[i])
                rewards[t, i] = r
                dones[t, i] = d
                self.ep_return[i] += r
                if d:
                    st = env.state
                    ep_returns.append(self.ep_return[i])
                    ep_viol.append(st.violations)
                    ep_succ.append(st.k == 2 * cfg.n and st.violations == 0)
                    self.ep_return[i] = 0.0
                    o = env.reset()
                self.obs[i] = o
        with T.no_grad():
            _, last_v = self.net(self.obs)
        adv, ret = gae(rewards, values, dones, cfg.gamma, cfg.gae_lambda, last_v.data)
        self.steps += L * E
        flat = lambda x: x.reshape(L * E, *x.shape[2:])
        batch = PpoBatch(flat(obs), flat(masks), flat(actions), flat(logps), flat(adv), flat(ret))
        return Rollout(batch, ep_returns, ep_viol, ep_succ)

    def update(self, batch: PpoBatch) -> dict:
        cfg = self.cfg
        self.optimizer.lr = self.current_lr()
        params = self.net.parameters()
        stats = []
        for _ in range(cfg.epochs):
            order = self.rng.permutation(len(batch))
            for lo in range(0, len(batch), cfg.minibatch):
                mb = batch.subset(order[lo:lo + cfg.minibatch])
                if cfg.normalize_advantages and len(mb) > 1:
                    a = mb.advantages
                    mb.advantages = (a - a.mean()) / (a.std() + 1e-8)
                logits, values = self.net(mb.obs)
                losses = ppo_losses(mb, logits, values, cfg)
                self.optimizer.zero_grad()
                losses["total"].backward()
                if cfg.max_grad_norm is not None:
                    nn.clip_grad_norm(params, cfg.max_grad_norm)
                self.optimizer.step()
                stats.append({k: v.item() for k, v in losses.items()})
        self.updates += 1
        return {k: float(np.mean([s[k] for s in stats])) for k in stats[0]}

    def maybe_evaluate(self) -> dict | None:
        cfg = self.cfg
        if self.updates % cfg.eval_every:
            return None
        res = evaluate(NetPolicy(self.net), cfg.n, cfg.eval_episodes, seed=self.seed,
                       strict=cfg.strict)
        res["update"] = self.updates
        res["steps"] = self.steps
        self.evals.append(res)
        if res["composite"] > self.best_composite:
            self.best_composite = res["composite"]
            self.best_state = self.net.state_dict()
            self.best_eval = res
        return res

    def train(self) -> "PpoResult":
        cfg = self.cfg
        streak = 0
        while self.steps < cfg.total_steps:
            roll = self.collect()
            lr = self.optimizer.lr = self.current_lr()
            stats = self.update(roll.batch)
            self.log.append({
                "update": self.updates,
                "mean_return": float(np.mean(roll.episode_returns)) if roll.episode_returns else float("nan"),
                "success_rate": float(np.mean(roll.episode_success)) if roll.episode_success else float("nan"),
                "avg_violations": float(np.mean(roll.episode_violations)) if roll.episode_violations else float("nan"),
                "entropy": stats["entropy"],
                "lr": lr,
            })
            res = self.maybe_evaluate()
            if res is not None and cfg.target_success is not None:
                streak = streak + 1 if res["success_rate"] >= cfg.target_success else 0
                if streak >= cfg.patience:
                    break
        best = ActorCritic(cfg.n, cfg.hidden, self.seed)
        best.load_state_dict(self.best_state)
        return PpoResult(NetPolicy(best), self.log, self.evals, self.best_eval, self.steps)


@dataclass
class PpoResult:
    policy: NetPolicy
    log: list[dict]
    evals: list[dict]
    best_eval: dict | None
    steps: int

    def write_log(self, path) -> None:
        cols = ["update", "mean_return", "success_rate", "avg_violations", "entropy", "lr"]
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=cols)
            w.writeheader()
            for row in self.log:
                w.writerow({k: row[k] for k in cols})


def train_ppo(cfg: PpoConfig, seed: int = 0) -> PpoResult:
    return PpoTrainer(cfg, seed).train()


def save_policy(path, policy: NetPolicy, cfg: PpoConfig, seed: int, extra: dict | None = None) -> None:
    meta = {"ppo": cfg.to_dict(), "seed": seed, **(extra or {})}
    nn.save_checkpoint(path, policy.net, meta=meta)


def load_policy(path, cfg: PpoConfig | None = None) -> tuple[NetPolicy, PpoConfig]:
    doc = nn.read_checkpoint(path)
    saved = PpoConfig.from_dict(doc["meta"]["ppo"])
    if cfg is not None and (cfg.n != saved.n or list(cfg.hidden) != list(saved.hidden)):
        raise nn.CheckpointError(
            f"{path}: checkpoint is n={saved.n} hidden={saved.hidden}, config wants n={cfg.n} hidden={cfg.hidden}")
    net = ActorCritic(saved.n, saved.hidden)
    nn.load_checkpoint(path, net)
    return NetPolicy(net), saved
