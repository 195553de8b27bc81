"""Flat key = value run configuration.

Every default reproduces the reference setup (64^2 grid on a side-20 box,
dt = 0.05, 6x6 actuators with sigma 2.4, the DDPG hyperparameters, and the
hookstep solver parameters). A fully resolved copy is written into each
run directory before execution.
"""

from dataclasses import dataclass, fields
import os
from pathlib import Path

from .actuation import SensorLayout, layout_for
from .ddpg import DdpgHyper
from .jfnk import JfnkConfig
from .spectral import GridSpec


@dataclass
class RunConfig:
    # grid / integrator
    grid_n: int = 64
    half_domain: float = 10.0
    dt: float = 0.05
    # actuation and sensing
    actuators_per_side: int = 6
    sigma: float = 2.4
    a_max: float = 3.0
    sensor_stride: int = 4
    # DDPG
    batch_size: int = 200
    learning_rate: float = 0.001
    discount: float = 0.99
    tau: float = 0.001
    target_update_every: int = 1
    buffer_capacity: int = 1_000_000
    noise_alpha: float = 2.0
    noise_decay: float = 0.995
    noise_alpha_min: float = -1.0   # negative: task default (1.5 ident, 1.2 nav)
    # episodes
    episode_steps: int = 500
    reward_threshold: float = -45.0
    n_parallel: int = 10
    episodes: int = 500
    relax_steps: int = 1000
    # Newton-Krylov
    m_gmres: int = 100
    newton_iterations: int = 100
    newton_tolerance: float = 1e-12
    delta_min: float = 1e-20
    delta_max: float = 1e20
    g_tol: float = 1e-3
    jacobian_eps: float = 1e-6
    residual_steps: int = 20
    gmres_tol: float = 1e-3
    # run control
    seed: int = 0
    threads: int = 1
    output_root: str = ""

    # -- derived objects --------------------------------------------------

    def grid(self) -> GridSpec:
        return GridSpec(n=self.grid_n, half_domain=self.half_domain)

    def actuator_layout(self):
        return layout_for(m=self.actuators_per_side, sigma=self.sigma,
                          a_max=self.a_max)

    def sensor_layout(self) -> SensorLayout:
        return SensorLayout(n=self.grid_n, stride=self.sensor_stride)

    def ddpg_hyper(self) -> DdpgHyper:
        return DdpgHyper(batch=self.batch_size, lr=self.learning_rate,
                         gamma=self.discount, tau=self.tau,
                         update_every=self.target_update_every,
                         buffer_capacity=self.buffer_capacity)

    def jfnk(self) -> JfnkConfig:
        return JfnkConfig(m_gmres=self.m_gmres, n_its=self.newton_iterations,
                          eps_err=self.newton_tolerance,
                          delta_min=self.delta_min, delta_max=self.delta_max,
                          g_tol=self.g_tol, eps_j=self.jacobian_eps,
                          n_dts=self.residual_steps, dt=self.dt,
                          gmres_tol=self.gmres_tol)

    def alpha_min_for(self, kind: str) -> float:
        if self.noise_alpha_min >= 0:
            return self.noise_alpha_min
        return 1.5 if kind == "identification" else 1.2

    def resolved_output_root(self) -> Path:
        root = self.output_root or os.environ.get("KSEFIX_OUTPUT", "runs")
        return Path(root)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


class ConfigError(ValueError):
    pass


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int" or kind is int:
            return int(raw)
        if kind == "float" or kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config(path) -> RunConfig:
    cfg = RunConfig()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = (part.strip() for part in line.split("=", 1))
            setattr(cfg, key, _coerce(key, raw))
    return cfg


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        setattr(cfg, key, _coerce(key, raw))
    return cfg


def write_config(cfg: RunConfig, path):
    with open(path, "w") as fh:
        fh.write("# resolved ksefix run configuration\n")
        for f in fields(RunConfig):
            fh.write(f"{f.name} = {getattr(cfg, f.name)}\n")
