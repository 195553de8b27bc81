"""Command-line front end tying the modules into reproducible experiments.

Subcommands: simulate, jfnk, find, navigate, compare, sweep, verify, export.
Exit codes: 0 success/converged, 1 usage error, 2 numerical failure,
3 non-convergence.
"""

import argparse
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .actuation import SensorLayout
from .config import (ConfigError, RunConfig, apply_overrides, parse_config,
                     write_config)
from .ddpg import DdpgAgent, NoiseSchedule, ReplayBuffer
from .dynamics import (BlowUpError, SimState, cached_tables, flow_map, step,
                       write_trajectory_csv)
from .jfnk import newton_solve
from .spectral import (GridSpec, energy, idft2, leading_coefficients,
                       read_spectral, write_spectral)
from .store import FixedPointStore, StoreError, verify as verify_residual
from .tasks import (KseEnv, TaskSpec, compare_iterations, hyperparameter_sweep,
                    navigate, random_initial_state, search_fixed_points)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_NOT_CONVERGED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_common(sub):
    sub.add_argument("-c", "--config", help="configuration file (key = value)")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a configuration key", default=[])
    sub.add_argument("--out", help="output directory")


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    return apply_overrides(cfg, args.set)


def _run_dir(args, cfg: RunConfig, default_name: str) -> Path:
    out = Path(args.out) if args.out else cfg.resolved_output_root() / default_name
    out.mkdir(parents=True, exist_ok=True)
    write_config(cfg, out / "config.resolved")
    return out


def _seed_streams(cfg: RunConfig, n: int, purpose: int):
    ss = np.random.SeedSequence([cfg.seed, purpose])
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def _build_agent(cfg: RunConfig, layout, kind: str) -> DdpgAgent:
    noise = NoiseSchedule(alpha=cfg.noise_alpha,
                          alpha_min=cfg.alpha_min_for(kind),
                          decay=cfg.noise_decay, a_lim=cfg.a_max)
    obs_dim = cfg.sensor_layout().count
    return DdpgAgent(cfg.ddpg_hyper(), noise,
                     seed=np.random.SeedSequence([cfg.seed, 1]),
                     obs_dim=obs_dim, act_dim=layout.m ** 2, a_max=cfg.a_max)


def _build_envs(cfg: RunConfig, task: TaskSpec, layout):
    grid = cfg.grid()
    tables = cached_tables(grid, cfg.dt)
    sensors = cfg.sensor_layout()
    ic_rngs = _seed_streams(cfg, task.n_parallel, purpose=2)
    envs = [KseEnv(grid, tables, layout, sensors, task, ic_rng=rng,
                   relax_steps=cfg.relax_steps) for rng in ic_rngs]
    noise_rngs = _seed_streams(cfg, task.n_parallel, purpose=3)
    return grid, tables, sensors, envs, noise_rngs


class _TrainingLog:
    """Streaming CSV: (episode, best_reward, terminal_distance, alpha,
    handoffs, jfnk_converged); missing entries are blank."""

    HEADER = "episode,best_reward,terminal_distance,alpha,handoffs,jfnk_converged\n"

    def __init__(self, path):
        self._fh = open(path, "w")
        self._fh.write(self.HEADER)
        self._fh.flush()

    def write(self, row):
        self._fh.write(",".join("" if v is None else
                                (f"{v:.10g}" if isinstance(v, float) else str(v))
                                for v in row) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()


# -- simulate ---------------------------------------------------------------

def _embed_spectrum(coarse: np.ndarray, fine_n: int) -> np.ndarray:
    """Zero-pad an n^2 spectrum onto a fine_n^2 grid (same physical field)."""
    n = coarse.shape[0]
    scale = (fine_n / n) ** 2
    fine = np.zeros((fine_n, fine_n), dtype=np.complex128)
    half = n // 2
    lo = list(range(0, half))        # non-negative signed indices
    hi = list(range(-half, 0))       # negative signed indices
    for block_x, src_x in ((lo, lo), (hi, [i % n for i in hi])):
        for block_y, src_y in ((lo, lo), (hi, [i % n for i in hi])):
            fine[np.ix_([i % fine_n for i in block_x],
                        [i % fine_n for i in block_y])] = \
                scale * coarse[np.ix_(src_x, src_y)]
    return fine


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _run_dir(args, cfg, "simulate")
    grid = cfg.grid()
    tables = cached_tables(grid, cfg.dt)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    steps = args.steps

    if args.check == "grid":
        state = random_initial_state(grid, tables, rng, cfg.relax_steps)
        fine_grid = GridSpec(n=2 * grid.n, half_domain=grid.half_domain)
        fine_tables = cached_tables(fine_grid, cfg.dt)
        fine_state = SimState(spec=_embed_spectrum(state.spec, fine_grid.n), time=0.0)
        horizon = steps * cfg.dt
        coarse = flow_map(state, horizon, tables)
        fine = flow_map(fine_state, horizon, fine_tables)
        stride = fine_grid.n // grid.n
        err = np.abs(idft2(fine.spec)[::stride, ::stride] - idft2(coarse.spec))
        max_err = float(err.max())
        ok = max_err < 1e-6
        print(f"grid check: {grid.n}^2 vs {fine_grid.n}^2 over {horizon:g} time "
              f"units, max pointwise error {max_err:.3e} -> "
              f"{'PASS' if ok else 'FAIL'} (tolerance 1e-6)")
        return EXIT_OK if ok else EXIT_NUMERICAL

    if args.check == "dt":
        state = random_initial_state(grid, tables, rng, cfg.relax_steps)
        fine_tables = cached_tables(grid, cfg.dt / 2)
        horizon = steps * cfg.dt
        coarse = flow_map(state, horizon, tables)
        fine = flow_map(SimState(spec=state.spec.copy(), time=0.0),
                        horizon, fine_tables)
        err = np.abs(idft2(fine.spec) - idft2(coarse.spec))
        max_err = float(err.max())
        med_err = float(np.median(err))
        ok = max_err < 1e-2 and med_err < 1e-3
        print(f"dt check: dt={cfg.dt} vs {cfg.dt / 2} over {horizon:g} time "
              f"units, max error {max_err:.3e}, median {med_err:.3e} -> "
              f"{'PASS' if ok else 'FAIL'} (tolerances 1e-2 / 1e-3)")
        return EXIT_OK if ok else EXIT_NUMERICAL

    if args.zero:
        state = SimState(spec=np.zeros((grid.n, grid.n), dtype=np.complex128))
    else:
        state = random_initial_state(grid, tables, rng, cfg.relax_steps)
    rows = []
    snap_dir = out / "snapshots"
    try:
        for k in range(steps + 1):
            lead = leading_coefficients(state.spec)
            rows.append((state.time, lead[0], lead[1], lead[2],
                         energy(idft2(state.spec), grid)))
            if args.snapshot_stride and k % args.snapshot_stride == 0:
                snap_dir.mkdir(exist_ok=True)
                write_spectral(snap_dir / f"state_{k:06d}.kse2", state.spec, grid)
            if k < steps:
                state = step(state, tables)
    except BlowUpError as exc:
        write_trajectory_csv(out / "trajectory.csv", rows)
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_trajectory_csv(out / "trajectory.csv", rows)
    print(f"wrote {out / 'trajectory.csv'} ({len(rows)} rows)")
    return EXIT_OK


# -- jfnk ---------------------------------------------------------------------

def cmd_jfnk(args) -> int:
    cfg = _load_config(args)
    guess_path = Path(args.guess)
    if not guess_path.exists():
        print(f"error: no such guess file {guess_path}", file=sys.stderr)
        return EXIT_USAGE
    out = _run_dir(args, cfg, "jfnk")
    guess, grid = read_spectral(guess_path)
    report = newton_solve(guess, grid, cfg.jfnk())

    with open(out / "residuals.csv", "w") as fh:
        fh.write("iteration,log10_relative_residual\n")
        for i, r in enumerate(report.residual_history):
            fh.write(f"{i},{math.log10(max(r, 1e-300)):.6f}\n")
    with open(out / "report.log", "w") as fh:
        fh.write(f"guess = {guess_path}\n")
        fh.write(f"converged = {report.converged}\n")
        fh.write(f"iterations = {report.iterations}\n")
        fh.write(f"final_relative_residual = {report.residual_history[-1]:.6e}\n")
        if report.failure_reason:
            fh.write(f"failure_reason = {report.failure_reason}\n")
    if report.converged:
        write_spectral(out / "converged.kse2", report.final_state, grid)
        print(f"converged in {report.iterations} iterations, "
              f"residual {report.residual_history[-1]:.3e}")
        return EXIT_OK
    print(f"did not converge ({report.failure_reason}) after "
          f"{report.iterations} iterations, residual "
          f"{report.residual_history[-1]:.3e}")
    return EXIT_NOT_CONVERGED


# -- find ---------------------------------------------------------------------

def cmd_find(args) -> int:
    cfg = _load_config(args)
    out = _run_dir(args, cfg, "find")
    task = TaskSpec(kind="identification", episode_steps=cfg.episode_steps,
                    reward_threshold=cfg.reward_threshold,
                    n_parallel=cfg.n_parallel, episodes=cfg.episodes)
    layout = cfg.actuator_layout()
    grid, tables, sensors, envs, noise_rngs = _build_envs(cfg, task, layout)
    agent = _build_agent(cfg, layout, "identification")
    buffer = ReplayBuffer(cfg.buffer_capacity, obs_dim=sensors.count,
                          act_dim=layout.m ** 2)
    store = FixedPointStore(grid, dt=cfg.dt)
    log = _TrainingLog(out / "training_log.csv")

    def on_episode(row):
        log.write((row.episode, row.best_reward, None, row.alpha,
                   row.handoffs, row.jfnk_converged))

    try:
        search_fixed_points(task, agent, envs, buffer, store, cfg.jfnk(),
                            noise_rngs, threads=cfg.threads,
                            on_episode=on_episode)
    finally:
        log.close()
    store.save(out / "store")
    store.export_table(out / "table.csv")
    agent.save(out / "checkpoint.pkl")
    print(f"admitted {len(store)} fixed point(s); store at {out / 'store'}")
    return EXIT_OK


# -- navigate -------------------------------------------------------------------

def _load_goal(store_dir, goal_id, dt):
    store = FixedPointStore.load(store_dir, dt=dt)
    wanted = goal_id.upper().lstrip("E")
    for rec in store.records:
        if str(rec.id) == wanted:
            return rec
    return None


def cmd_navigate(args) -> int:
    cfg = _load_config(args)
    try:
        goal = _load_goal(args.store, args.goal, cfg.dt)
    except (StoreError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if goal is None:
        print(f"error: goal {args.goal!r} not in store {args.store}",
              file=sys.stderr)
        return EXIT_USAGE
    out = _run_dir(args, cfg, "navigate")
    task = TaskSpec(kind="navigation", goal=goal.spec,
                    episode_steps=cfg.episode_steps,
                    n_parallel=cfg.n_parallel, episodes=cfg.episodes)
    layout = cfg.actuator_layout()
    grid, tables, sensors, envs, noise_rngs = _build_envs(cfg, task, layout)
    agent = _build_agent(cfg, layout, "navigation")
    buffer = ReplayBuffer(cfg.buffer_capacity, obs_dim=sensors.count,
                          act_dim=layout.m ** 2)
    eval_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 4]))
    eval_env = KseEnv(grid, tables, layout, sensors, task, ic_rng=eval_rng,
                      relax_steps=cfg.relax_steps)
    log = _TrainingLog(out / "training_log.csv")
    try:
        training_rows, eval_rows = navigate(
            task, agent, envs, buffer, noise_rngs, eval_env,
            threads=cfg.threads,
            on_episode=lambda row: log.write((row[0], None, row[1], row[2],
                                              None, None)))
    finally:
        log.close()
    with open(out / "eval_trace.csv", "w") as fh:
        fh.write("time,distance,action_max\n")
        for t, dist, amax in eval_rows:
            fh.write(f"{t:.6f},{dist:.10g},{amax:.10g}\n")
    agent.save(out / "checkpoint.pkl")
    print(f"trained {cfg.episodes} episodes; evaluation trace at "
          f"{out / 'eval_trace.csv'}")
    return EXIT_OK


# -- compare --------------------------------------------------------------------

def cmd_compare(args) -> int:
    cfg = _load_config(args)
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        print(f"error: no checkpoint at {ckpt}", file=sys.stderr)
        return EXIT_USAGE
    out = _run_dir(args, cfg, "compare")
    agent = DdpgAgent.load(ckpt)
    grid = cfg.grid()
    tables = cached_tables(grid, cfg.dt)
    report = compare_iterations(agent, grid, tables, cfg.actuator_layout(),
                                cfg.sensor_layout(), cfg.jfnk(), args.pairs,
                                seed=cfg.seed, episode_steps=cfg.episode_steps,
                                relax_steps=cfg.relax_steps)
    with open(out / "comparison.csv", "w") as fh:
        fh.write("pair,raw_iterations,raw_initial_residual,"
                 "drl_iterations,drl_initial_residual\n")
        for i in range(args.pairs):
            raw_it = report.raw_iterations[i]
            drl_it = report.drl_iterations[i]
            fh.write(f"{i},{'' if raw_it is None else raw_it},"
                     f"{report.raw_initial_residuals[i]:.6e},"
                     f"{'' if drl_it is None else drl_it},"
                     f"{report.drl_initial_residuals[i]:.6e}\n")
    curves = out / "curves"
    curves.mkdir(exist_ok=True)
    for tag, histories in (("raw", report.raw_histories),
                           ("drl", report.drl_histories)):
        for i, hist in enumerate(histories):
            with open(curves / f"{tag}_{i:03d}.csv", "w") as fh:
                fh.write("iteration,log10_relative_residual\n")
                for k, r in enumerate(hist):
                    fh.write(f"{k},{math.log10(max(r, 1e-300)):.6f}\n")
    print(f"raw mean iterations (converged): {report.raw_mean_iterations:.2f}")
    print(f"drl mean iterations (converged): {report.drl_mean_iterations:.2f}")
    print(f"converged pairs: {report.converged_pairs}")
    return EXIT_OK


# -- sweep ----------------------------------------------------------------------

def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        goal = _load_goal(args.store, args.goal, cfg.dt)
    except (StoreError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if goal is None:
        print(f"error: goal {args.goal!r} not in store {args.store}",
              file=sys.stderr)
        return EXIT_USAGE
    out = _run_dir(args, cfg, "sweep")
    grid = cfg.grid()
    tables = cached_tables(grid, cfg.dt)
    sensors = cfg.sensor_layout()
    m_values = [int(v) for v in args.m.split(",")]
    sigma_values = [float(v) for v in args.sigma.split(",")]

    def make_agent(layout, seed):
        noise = NoiseSchedule(alpha=cfg.noise_alpha,
                              alpha_min=cfg.alpha_min_for("navigation"),
                              decay=cfg.noise_decay, a_lim=cfg.a_max)
        return DdpgAgent(cfg.ddpg_hyper(), noise,
                         seed=np.random.SeedSequence([seed, 1]),
                         obs_dim=sensors.count, act_dim=layout.m ** 2,
                         a_max=cfg.a_max)

    rows = hyperparameter_sweep(m_values, sigma_values, args.episodes_per_cell,
                                goal.spec, grid, tables, sensors, make_agent,
                                seed=cfg.seed, episode_steps=cfg.episode_steps,
                                n_parallel=cfg.n_parallel, threads=cfg.threads)
    with open(out / "objective_table.csv", "w") as fh:
        fh.write("m,sigma,objective,diverged\n")
        for m, sigma, objective, diverged in rows:
            fh.write(f"{m},{sigma:.10g},{objective:.10g},{int(diverged)}\n")
    print(f"wrote {out / 'objective_table.csv'} ({len(rows)} cells)")
    return EXIT_OK


# -- verify / export --------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg = _load_config(args)
    if args.store:
        try:
            store = FixedPointStore.load(args.store, dt=cfg.dt)
        except StoreError as exc:
            print(f"verification failed: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        for rec in store.records:
            print(f"{rec.label}: residual {rec.relative_residual:.3e} OK")
        print(f"all {len(store)} record(s) verified")
        return EXIT_OK
    path = Path(args.field)
    if not path.exists():
        print(f"error: no such field file {path}", file=sys.stderr)
        return EXIT_USAGE
    spec, grid = read_spectral(path)
    residual = verify_residual(spec, grid, dt=cfg.dt)
    ok = residual <= 1e-10
    print(f"{path}: relative residual {residual:.3e} -> "
          f"{'fixed point' if ok else 'not a fixed point'}")
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_export(args) -> int:
    cfg = _load_config(args)
    try:
        store = FixedPointStore.load(args.store, dt=cfg.dt)
    except (StoreError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    did = False
    if args.table:
        store.export_table(args.table)
        print(f"wrote {args.table}")
        did = True
    if args.pgm:
        label, _, path = args.pgm.partition("=")
        if not path:
            print("error: --pgm expects LABEL=PATH", file=sys.stderr)
            return EXIT_USAGE
        wanted = label.upper().lstrip("E")
        rec = next((r for r in store.records if str(r.id) == wanted), None)
        if rec is None:
            print(f"error: no record {label!r} in store", file=sys.stderr)
            return EXIT_USAGE
        store.export_pgm(rec, path, tile=args.tile)
        print(f"wrote {path}")
        did = True
    if not did:
        print("error: nothing to export (use --table and/or --pgm)",
              file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


# -- entry point --------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="ksefix",
                     description="Fixed points of the 2D KS equation: "
                                 "simulation, Newton-Krylov search and "
                                 "RL-assisted initial guesses.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="integrate the PDE / run checks")
    _add_common(p)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--check", choices=["grid", "dt"])
    p.add_argument("--zero", action="store_true",
                   help="start from the zero field instead of a relaxed state")
    p.add_argument("--snapshot-stride", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("jfnk", help="Newton-Krylov solve from a guess file")
    _add_common(p)
    p.add_argument("guess", help="binary spectral field file")
    p.set_defaults(func=cmd_jfnk)

    p = subs.add_parser("find", help="train the identification task and "
                                     "collect fixed points")
    _add_common(p)
    p.set_defaults(func=cmd_find)

    p = subs.add_parser("navigate", help="train navigation to a goal fixed point")
    _add_common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--goal", required=True, metavar="E<id>")
    p.set_defaults(func=cmd_navigate)

    p = subs.add_parser("compare", help="raw vs DRL-enhanced guess statistics")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pairs", type=int, default=50)
    p.set_defaults(func=cmd_compare)

    p = subs.add_parser("sweep", help="actuator hyperparameter grid sweep")
    _add_common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--goal", required=True)
    p.add_argument("--m", default="4,6,8")
    p.add_argument("--sigma", default="1.2,2.4,3.6")
    p.add_argument("--episodes-per-cell", type=int, default=3)
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("verify", help="re-verify a store or one field file")
    _add_common(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--store")
    group.add_argument("--field")
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("export", help="export tables and graymaps")
    _add_common(p)
    p.add_argument("--store", required=True)
    p.add_argument("--table")
    p.add_argument("--pgm", metavar="LABEL=PATH")
    p.add_argument("--tile", action="store_true")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
