"""Deep deterministic policy gradient machinery.

Actor maps 256 sensor readings to 36 actuator amplitudes through two swish
hidden layers and a tanh output scaled to +/-3; the critic scores the
concatenated (observation, action) pair. Exploration adds clipped Gaussian
noise whose scale parameter alpha decays per episode down to a task floor.
"""

from dataclasses import dataclass
import pickle

import numpy as np

from .mlp import Adam, Mlp, soft_update

OBS_DIM = 256
ACT_DIM = 36


@dataclass
class DdpgHyper:
    batch: int = 200
    lr: float = 0.001
    gamma: float = 0.99
    tau: float = 0.001
    update_every: int = 1        # target update frequency K
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    buffer_capacity: int = 1_000_000

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ValueError("tau must be in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")


def build_actor(rng, obs_dim: int = OBS_DIM, act_dim: int = ACT_DIM,
                a_max: float = 3.0) -> Mlp:
    return Mlp([obs_dim, 128, 64, act_dim],
               ["swish", "swish", ("tanh_scaled", a_max)], rng=rng)


def build_critic(rng, obs_dim: int = OBS_DIM, act_dim: int = ACT_DIM) -> Mlp:
    return Mlp([obs_dim + act_dim, 256, 128, 1],
               ["swish", "swish", "linear"], rng=rng)


class ReplayBuffer:
    """Uniform-sampling ring buffer of (s, a, r, s') transitions.

    Storage is float32 to keep a million-transition buffer affordable;
    samples are promoted back to float64 for the updates.
    """

    def __init__(self, capacity: int, obs_dim: int = OBS_DIM, act_dim: int = ACT_DIM):
        self.capacity = int(capacity)
        self.obs = np.empty((self.capacity, obs_dim), dtype=np.float32)
        self.act = np.empty((self.capacity, act_dim), dtype=np.float32)
        self.rew = np.empty(self.capacity, dtype=np.float64)
        self.nxt = np.empty((self.capacity, obs_dim), dtype=np.float32)
        self._head = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, obs, action, reward, next_obs):
        i = self._head
        self.obs[i] = obs
        self.act[i] = action
        self.rew[i] = reward
        self.nxt[i] = next_obs
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch: int, rng):
        """Uniform without replacement within the batch."""
        if batch > self._size:
            raise ValueError(f"cannot sample {batch} of {self._size} transitions")
        idx = rng.choice(self._size, size=batch, replace=False)
        return (self.obs[idx].astype(np.float64),
                self.act[idx].astype(np.float64),
                self.rew[idx].copy(),
                self.nxt[idx].astype(np.float64))


@dataclass
class NoiseSchedule:
    """Exploration scale: alpha decays multiplicatively to alpha_min."""

    alpha: float = 2.0
    alpha_min: float = 1.5
    decay: float = 0.995
    a_lim: float = 3.0

    def end_episode(self):
        self.alpha = max(self.alpha * self.decay, self.alpha_min)

    @property
    def sigma(self) -> float:
        """Per-component noise standard deviation alpha * a_lim."""
        return self.alpha * self.a_lim


def select_action(actor: Mlp, obs, noise: NoiseSchedule, rng) -> np.ndarray:
    """clip(mu(s) + eps, -1.2 a_lim, 1.2 a_lim), eps ~ N(0, (alpha a_lim)^2)."""
    mu, _ = actor.forward(obs)
    if noise is not None and noise.alpha > 0:
        mu = mu + rng.normal(0.0, noise.sigma, size=mu.shape)
        bound = 1.2 * noise.a_lim
        mu = np.clip(mu, -bound, bound)
    return mu


def critic_update(critic: Mlp, target_actor: Mlp, target_critic: Mlp,
                  batch, hyper: DdpgHyper, optimizer: Adam) -> float:
    """One Adam step on the mean squared Bellman error; returns the loss.

    Targets y = r + gamma * Q'(s', mu'(s')) are computed with the target
    networks and no gradient flows through them.
    """
    obs, act, rew, nxt = batch
    b = obs.shape[0]
    next_actions, _ = target_actor.forward(nxt)
    q_next, _ = target_critic.forward(np.hstack([nxt, next_actions]))
    y = rew + hyper.gamma * q_next[:, 0]
    q, cache = critic.forward(np.hstack([obs, act]))
    err = q[:, 0] - y
    loss = float(np.mean(err * err))
    gout = (2.0 / b) * err[:, None]
    w_grads, b_grads, _ = critic.backward(cache, gout)
    optimizer.step(critic.parameters(), w_grads + b_grads)
    return loss


def actor_update(actor: Mlp, critic: Mlp, batch, hyper: DdpgHyper,
                 optimizer: Adam) -> float:
    """Ascend mean_i Q(s_i, mu(s_i)); returns the pre-update objective.

    Implemented as one Adam step on -mean Q. The critic only provides the
    action gradient; its parameters are untouched.
    """
    obs = batch[0]
    b = obs.shape[0]
    actions, actor_cache = actor.forward(obs)
    q, critic_cache = critic.forward(np.hstack([obs, actions]))
    objective = float(np.mean(q[:, 0]))
    gq = np.full((b, 1), -1.0 / b)
    _, _, gin = critic.backward(critic_cache, gq)
    g_actions = gin[:, obs.shape[1]:]
    w_grads, b_grads, _ = actor.backward(actor_cache, g_actions)
    optimizer.step(actor.parameters(), w_grads + b_grads)
    return objective


class DdpgAgent:
    """Actor-critic pair with target twins, optimisers and exploration state."""

    def __init__(self, hyper: DdpgHyper, noise: NoiseSchedule, seed=0,
                 obs_dim: int = OBS_DIM, act_dim: int = ACT_DIM,
                 a_max: float = 3.0):
        self.hyper = hyper
        self.noise = noise
        ss = seed if isinstance(seed, np.random.SeedSequence) \
            else np.random.SeedSequence(seed)
        init_rng, self.sample_rng = (np.random.default_rng(s) for s in ss.spawn(2))
        self.actor = build_actor(init_rng, obs_dim, act_dim, a_max)
        self.critic = build_critic(init_rng, obs_dim, act_dim)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = Adam(self.actor.parameters(), lr=hyper.lr,
                              beta1=hyper.beta1, beta2=hyper.beta2, eps=hyper.adam_eps)
        self.critic_opt = Adam(self.critic.parameters(), lr=hyper.lr,
                               beta1=hyper.beta1, beta2=hyper.beta2, eps=hyper.adam_eps)
        self.episode = 0
        self.updates = 0

    def act(self, obs, rng, explore: bool = True) -> np.ndarray:
        return select_action(self.actor, obs, self.noise if explore else None, rng)

    def update(self, buffer: ReplayBuffer) -> tuple[float, float] | None:
        """One critic + actor + target update; None while the buffer is short."""
        if len(buffer) < self.hyper.batch:
            return None
        batch = buffer.sample(self.hyper.batch, self.sample_rng)
        loss = critic_update(self.critic, self.target_actor, self.target_critic,
                             batch, self.hyper, self.critic_opt)
        objective = actor_update(self.actor, self.critic, batch, self.hyper,
                                 self.actor_opt)
        self.updates += 1
        if self.updates % self.hyper.update_every == 0:
            soft_update(self.target_critic, self.critic, self.hyper.tau)
            soft_update(self.target_actor, self.actor, self.hyper.tau)
        return loss, objective

    def end_episode(self):
        self.noise.end_episode()
        self.episode += 1

    # -- checkpointing ---------------------------------------------------

    def save(self, path):
        state = {
            "hyper": self.hyper,
            "noise": self.noise,
            "episode": self.episode,
            "updates": self.updates,
            "actor": self.actor.state_dict(),
            "critic": self.critic.state_dict(),
            "target_actor": self.target_actor.state_dict(),
            "target_critic": self.target_critic.state_dict(),
            "actor_opt": self.actor_opt.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
            "sample_rng": self.sample_rng.bit_generator.state,
        }
        with open(path, "wb") as fh:
            pickle.dump(state, fh)

    @classmethod
    def load(cls, path) -> "DdpgAgent":
        with open(path, "rb") as fh:
            state = pickle.load(fh)
        agent = cls.__new__(cls)
        agent.hyper = state["hyper"]
        agent.noise = state["noise"]
        agent.episode = state["episode"]
        agent.updates = state["updates"]
        agent.actor = Mlp.from_state(state["actor"])
        agent.critic = Mlp.from_state(state["critic"])
        agent.target_actor = Mlp.from_state(state["target_actor"])
        agent.target_critic = Mlp.from_state(state["target_critic"])
        agent.actor_opt = Adam.from_state(state["actor_opt"], agent.actor.parameters())
        agent.critic_opt = Adam.from_state(state["critic_opt"], agent.critic.parameters())
        agent.sample_rng = np.random.default_rng()
        agent.sample_rng.bit_generator.state = state["sample_rng"]
        return agent
