"""The two control tasks: fixed-point identification and navigation.

One RL step is one dt = 0.05 simulation step. The identification reward is
the (negated) spectral distance travelled by one unforced probe step, which
is small exactly where the flow is slow, i.e. near equilibria; states whose
best reward clears the threshold are handed to the Newton solver. The
navigation reward is the negated physical-space distance to a goal
equilibrium.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _fft

from .actuation import ActuatorLayout, SensorLayout, forcing_half, observe
from .ddpg import DdpgAgent, ReplayBuffer
from .dynamics import (BlowUpError, EtdrkTables, SimState, _check_amplitude,
                       _step_half, full_from_half, half_from_full)
from .jfnk import JfnkConfig, newton_solve
from .spectral import GridSpec, idft2

BLOWUP_PENALTY = -1e4


@dataclass
class TaskSpec:
    kind: str                      # "identification" | "navigation"
    episode_steps: int = 500
    reward_threshold: float = -45.0
    n_parallel: int = 10
    episodes: int = 500
    goal: np.ndarray | None = None  # full goal spectrum, navigation only

    def __post_init__(self):
        if self.kind not in ("identification", "navigation"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == "navigation" and self.goal is None:
            raise ValueError("navigation requires a goal state")
        if self.kind == "identification" and self.goal is not None:
            raise ValueError("identification does not take a goal")
        if self.episode_steps < 1:
            raise ValueError("episode_steps must be >= 1")


@dataclass
class EpisodeResult:
    rewards: np.ndarray
    best_reward: float
    best_state: np.ndarray | None   # full spectrum at the max-reward step
    terminal_distance: float | None = None
    blew_up: bool = False


def _full_norm_from_half(dh: np.ndarray) -> float:
    """Full-spectrum Euclidean norm of a real field's rfft2 half-difference.

    Columns 1..n/2-1 appear twice in the full spectrum; the DC and Nyquist
    columns once.
    """
    total = 2.0 * np.sum(np.abs(dh) ** 2)
    total -= np.sum(np.abs(dh[:, 0]) ** 2) + np.sum(np.abs(dh[:, -1]) ** 2)
    return float(np.sqrt(max(total, 0.0)))


def random_initial_state(grid: GridSpec, tables: EtdrkTables, rng,
                         relax_steps: int = 1000) -> SimState:
    """Uniform-[0,1) field relaxed by ``relax_steps`` unforced steps.

    The relaxation pulls the state onto the unforced attractor, which is
    where both the solver benchmarks and the RL episodes start.
    """
    phi = rng.uniform(0.0, 1.0, size=(grid.n, grid.n))
    vh = _fft.rfft2(phi)
    vh[0, 0] = 0.0
    for _ in range(relax_steps):
        vh = _step_half(vh, tables)
    _check_amplitude(vh, grid.n, 0.0)
    return SimState(spec=full_from_half(vh), time=0.0)


def fixedpoint_reward(state: SimState, tables: EtdrkTables) -> float:
    """-||Phi^dt(u) - u|| in spectral space; the probe does not advance u."""
    vh = half_from_full(state.spec)
    probe = _step_half(vh, tables)
    return -_full_norm_from_half(probe - vh)


def navigation_reward(state: SimState, goal_spec: np.ndarray) -> float:
    """-||u - u_g||_2 over physical grid values."""
    diff = idft2(state.spec) - idft2(goal_spec)
    return -float(np.linalg.norm(diff))


class KseEnv:
    """Single forced KS environment; holds the state as an rfft2 half-spectrum."""

    def __init__(self, grid: GridSpec, tables: EtdrkTables,
                 layout: ActuatorLayout, sensors: SensorLayout,
                 task: TaskSpec, ic_rng, relax_steps: int = 1000):
        self.grid = grid
        self.tables = tables
        self.layout = layout
        self.sensors = sensors
        self.task = task
        self.ic_rng = ic_rng
        self.relax_steps = relax_steps
        self.vh = None
        self.time = 0.0
        self.done = False
        self.blew_up = False
        self._goal_phys = idft2(task.goal) if task.goal is not None else None

    def state(self) -> SimState:
        return SimState(spec=full_from_half(self.vh), time=self.time)

    def reset(self) -> np.ndarray:
        start = random_initial_state(self.grid, self.tables, self.ic_rng,
                                     self.relax_steps)
        return self.reset_to(start.spec)

    def reset_to(self, spec: np.ndarray) -> np.ndarray:
        self.vh = half_from_full(spec)
        self.time = 0.0
        self.done = False
        self.blew_up = False
        return self._observe()

    def _observe(self) -> np.ndarray:
        self._phys = _fft.irfft2(self.vh)
        return observe(self._phys, self.sensors)

    def _reward(self) -> float:
        if self.task.kind == "identification":
            probe = _step_half(self.vh, self.tables)
            return -_full_norm_from_half(probe - self.vh)
        return -float(np.linalg.norm(self._phys - self._goal_phys))

    def step(self, action: np.ndarray):
        """One forced dt step; returns (obs, reward, done)."""
        if self.done:
            raise RuntimeError("episode is over; reset the environment")
        fh = forcing_half(self.layout, action, self.grid)
        try:
            vh_new = _step_half(self.vh, self.tables, fh)
            self.time += self.tables.dt
            _check_amplitude(vh_new, self.grid.n, self.time)
        except BlowUpError:
            self.done = True
            self.blew_up = True
            return self._observe(), BLOWUP_PENALTY, True
        self.vh = vh_new
        obs = self._observe()
        return obs, self._reward(), False


def run_episode(task: TaskSpec, agent: DdpgAgent, envs, buffer: ReplayBuffer,
                noise_rngs, train: bool = True, explore: bool = True,
                threads: int = 1):
    """Roll all environments for one episode, training once per global step.

    Transitions from every live environment are pushed in environment order
    before the single network update of the step, so a run is deterministic
    for any thread count.
    """
    n_env = len(envs)
    obs = [env.reset() for env in envs]
    rewards = [[] for _ in range(n_env)]
    best_r = [-np.inf] * n_env
    best_state = [None] * n_env
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for _ in range(task.episode_steps):
            live = [i for i in range(n_env) if not envs[i].done]
            if not live:
                break
            actions = {i: agent.act(obs[i], noise_rngs[i], explore=explore)
                       for i in live}
            if pool is not None:
                outcomes = dict(zip(live, pool.map(
                    lambda i: envs[i].step(actions[i]), live)))
            else:
                outcomes = {i: envs[i].step(actions[i]) for i in live}
            for i in live:
                obs2, r, _ = outcomes[i]
                if buffer is not None:
                    buffer.push(obs[i], actions[i], r, obs2)
                rewards[i].append(r)
                if r > best_r[i]:
                    best_r[i] = r
                    best_state[i] = None if envs[i].blew_up else envs[i].state().spec
                obs[i] = obs2
            if train and buffer is not None:
                agent.update(buffer)
    finally:
        if pool is not None:
            pool.shutdown()

    results = []
    for i in range(n_env):
        trace = np.asarray(rewards[i])
        terminal = None
        if task.kind == "navigation" and trace.size:
            terminal = -trace[-1]
        results.append(EpisodeResult(
            rewards=trace, best_reward=best_r[i], best_state=best_state[i],
            terminal_distance=terminal, blew_up=envs[i].blew_up))
    return results


@dataclass
class SearchLogRow:
    episode: int
    best_reward: float
    alpha: float
    handoffs: int
    jfnk_converged: int
    admitted: int


def search_fixed_points(task: TaskSpec, agent: DdpgAgent, envs,
                        buffer: ReplayBuffer, store, jfnk_cfg: JfnkConfig,
                        noise_rngs, threads: int = 1, on_episode=None):
    """Algorithm: train, and hand each episode's best state to the Newton
    solver whenever its reward clears the threshold. Converged solutions are
    verified, deduplicated and admitted to the store with provenance."""
    admitted_records = []
    for episode in range(task.episodes):
        results = run_episode(task, agent, envs, buffer, noise_rngs,
                              train=True, explore=True, threads=threads)
        handoffs = 0
        converged = 0
        admitted = 0
        for env_idx, res in enumerate(results):
            if res.best_state is None or res.best_reward <= task.reward_threshold:
                continue
            handoffs += 1
            report = newton_solve(res.best_state, store.grid, jfnk_cfg)
            if not report.converged:
                continue
            converged += 1
            record, status = store.admit(
                report.final_state,
                provenance={"method": "drl+jfnk",
                            "seed": f"ep{agent.episode}env{env_idx}",
                            "episode": agent.episode,
                            "r_max": res.best_reward,
                            "newton_iterations": report.iterations})
            if status == "new":
                admitted += 1
                admitted_records.append(record)
        agent.end_episode()
        if on_episode is not None:
            on_episode(SearchLogRow(
                episode=episode, alpha=agent.noise.alpha,
                best_reward=max(r.best_reward for r in results),
                handoffs=handoffs, jfnk_converged=converged, admitted=admitted))
    return admitted_records


def navigate(task: TaskSpec, agent: DdpgAgent, envs, buffer: ReplayBuffer,
             noise_rngs, eval_env: KseEnv, threads: int = 1, on_episode=None):
    """Train the navigation task, then roll the deterministic policy.

    Returns (training_rows, evaluation_rows): per-episode end distances and
    the per-step evaluation trace (time, distance, max |action|).
    """
    training_rows = []
    for episode in range(task.episodes):
        results = run_episode(task, agent, envs, buffer, noise_rngs,
                              train=True, explore=True, threads=threads)
        distances = [r.terminal_distance for r in results
                     if r.terminal_distance is not None]
        row = (episode, float(np.median(distances)) if distances else np.nan,
               agent.noise.alpha)
        training_rows.append(row)
        agent.end_episode()
        if on_episode is not None:
            on_episode(row)

    eval_rows = []
    obs = eval_env.reset()
    rng = np.random.default_rng(0)  # unused at alpha = 0
    for _ in range(task.episode_steps):
        if eval_env.done:
            break
        action = agent.act(obs, rng, explore=False)
        obs, reward, _ = eval_env.step(action)
        eval_rows.append((eval_env.time, -reward, float(np.max(np.abs(action)))))
    return training_rows, eval_rows


@dataclass
class ComparisonReport:
    """Newton iteration counts for raw vs DRL-enhanced guesses."""

    raw_iterations: list = field(default_factory=list)      # None if failed
    drl_iterations: list = field(default_factory=list)
    raw_initial_residuals: list = field(default_factory=list)
    drl_initial_residuals: list = field(default_factory=list)
    raw_histories: list = field(default_factory=list)
    drl_histories: list = field(default_factory=list)

    @staticmethod
    def _mean(values):
        vals = [v for v in values if v is not None]
        return float(np.mean(vals)) if vals else np.nan

    @property
    def raw_mean_iterations(self):
        return self._mean(self.raw_iterations)

    @property
    def drl_mean_iterations(self):
        return self._mean(self.drl_iterations)

    @property
    def converged_pairs(self):
        return sum(1 for a, b in zip(self.raw_iterations, self.drl_iterations)
                   if a is not None and b is not None)


def compare_iterations(agent: DdpgAgent, grid: GridSpec, tables: EtdrkTables,
                       layout: ActuatorLayout, sensors: SensorLayout,
                       jfnk_cfg: JfnkConfig, n_pairs: int, seed: int,
                       episode_steps: int = 500,
                       relax_steps: int = 1000) -> ComparisonReport:
    """Solve from n_pairs relaxed-random guesses and from the best states of
    policy rollouts started at the same guesses (same seed stream)."""
    report = ComparisonReport()
    task = TaskSpec(kind="identification", episode_steps=episode_steps,
                    n_parallel=1, episodes=1)
    streams = np.random.SeedSequence(seed).spawn(n_pairs)
    for stream in streams:
        rng = np.random.default_rng(stream)
        start = random_initial_state(grid, tables, rng, relax_steps)

        raw = newton_solve(start.spec, grid, jfnk_cfg)
        report.raw_iterations.append(raw.iterations if raw.converged else None)
        report.raw_initial_residuals.append(raw.residual_history[0])
        report.raw_histories.append(raw.residual_history)

        env = KseEnv(grid, tables, layout, sensors, task, ic_rng=rng)
        obs = env.reset_to(start.spec)
        best_r, best_state = -np.inf, start.spec
        for _ in range(episode_steps):
            if env.done:
                break
            action = agent.act(obs, rng, explore=False)
            obs, r, _ = env.step(action)
            if r > best_r and not env.blew_up:
                best_r, best_state = r, env.state().spec
        drl = newton_solve(best_state, grid, jfnk_cfg)
        report.drl_iterations.append(drl.iterations if drl.converged else None)
        report.drl_initial_residuals.append(drl.residual_history[0])
        report.drl_histories.append(drl.residual_history)
    return report


def hyperparameter_sweep(m_values, sigma_values, episodes_per_cell: int,
                         goal: np.ndarray, grid: GridSpec, tables: EtdrkTables,
                         sensors: SensorLayout, make_agent, seed: int,
                         episode_steps: int = 500, n_parallel: int = 2,
                         threads: int = 1):
    """Grid sweep over actuator count and width for the navigation task.

    The objective of a cell is the accumulated per-step negative distance of
    the final training episode (averaged over environments). Returns rows
    (m, sigma, objective, diverged).
    """
    from .actuation import layout_for

    rows = []
    for m in m_values:
        for sigma in sigma_values:
            layout = layout_for(m=int(m), sigma=float(sigma))
            task = TaskSpec(kind="navigation", goal=goal,
                            episode_steps=episode_steps,
                            n_parallel=n_parallel, episodes=episodes_per_cell)
            agent = make_agent(layout, seed)
            ss = np.random.SeedSequence(seed)
            ic_seeds = ss.spawn(n_parallel)
            noise_seeds = ss.spawn(n_parallel)
            envs = [KseEnv(grid, tables, layout, sensors, task,
                           ic_rng=np.random.default_rng(s)) for s in ic_seeds]
            noise_rngs = [np.random.default_rng(s) for s in noise_seeds]
            buffer = ReplayBuffer(
                capacity=max(episodes_per_cell * episode_steps * n_parallel,
                             agent.hyper.batch),
                obs_dim=sensors.count, act_dim=layout.m ** 2)
            objective = np.nan
            diverged = False
            for _ in range(task.episodes):
                results = run_episode(task, agent, envs, buffer, noise_rngs,
                                      train=True, explore=True, threads=threads)
                agent.end_episode()
                diverged = diverged or any(r.blew_up for r in results)
                objective = float(np.mean([np.sum(r.rewards) for r in results]))
            rows.append((int(m), float(sigma), objective, diverged))
    return rows
