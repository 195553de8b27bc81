"""Matrix-free Newton-Krylov solver for equilibria of the KS flow map.

Solves G(u) = Phi^T(u) - u = 0 with T = n_dts * dt. Jacobian-vector
products come from forward differences of G, the linear solves from a
single-cycle GMRES whose Arnoldi factorisation is kept so that a hookstep
(trust-region constrained Gauss-Newton step inside the Krylov subspace)
can be re-extracted cheaply after a rejected step.

States are full (n, n) complex spectra; the solver treats them as real
vectors of dimension 2 n^2, so every inner product below takes the real
part.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import BlowUpError, SimState, cached_tables, flow_map
from .spectral import GridSpec

FAILURE_REASONS = ("stagnation", "max_iterations", "trust_region_collapse", "blow_up")


@dataclass(frozen=True)
class JfnkConfig:
    """Solver parameters; defaults follow the hookstep code lineage."""

    m_gmres: int = 100          # max GMRES iterations (one cycle, no restart)
    n_its: int = 100            # max Newton iterations
    eps_err: float = 1e-12      # relative residual tolerance
    delta_min: float = 1e-20    # trust-region collapse bound
    delta_max: float = 1e20
    g_tol: float = 1e-3         # model-gradient stagnation tolerance
    eps_j: float = 1e-6         # Jacobian finite-difference scale
    n_dts: int = 20             # flow-map steps per residual evaluation
    dt: float = 0.05
    gmres_tol: float = 1e-3     # inner relative tolerance (inexact Newton)
    shrink: float = 0.5
    grow: float = 2.0
    accept_ratio: float = 0.1
    good_ratio: float = 0.75
    stall_window: int = 8       # consecutive low-improvement iterations
    stall_improvement: float = 0.01

    def __post_init__(self):
        if not 0 < self.delta_min < self.delta_max:
            raise ValueError("need 0 < delta_min < delta_max")
        if self.eps_err <= 0 or self.dt <= 0 or self.n_dts < 1:
            raise ValueError("eps_err, dt and n_dts must be positive")

    @property
    def horizon(self) -> float:
        return self.n_dts * self.dt


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residual_history: list = field(default_factory=list)
    final_state: np.ndarray | None = None
    failure_reason: str | None = None


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b).real)


def _norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def residual(u: np.ndarray, grid: GridSpec, cfg: JfnkConfig,
             tables=None) -> np.ndarray:
    """G(u) = Phi^T(u) - u over the fixed-point horizon T = n_dts * dt."""
    if tables is None:
        tables = cached_tables(grid, cfg.dt)
    evolved = flow_map(SimState(spec=u, time=0.0), cfg.horizon, tables)
    return evolved.spec - u


def relative_residual(u: np.ndarray, grid: GridSpec, cfg: JfnkConfig,
                      tables=None) -> float:
    g = residual(u, grid, cfg, tables)
    return _norm(g) / max(_norm(u), 1e-30)


def jvp(u: np.ndarray, v: np.ndarray, g_u: np.ndarray, grid: GridSpec,
        cfg: JfnkConfig, tables=None) -> np.ndarray:
    """Forward-difference J(u) v using the precomputed residual G(u).

    The perturbation is eps_j along v-hat scaled by ||u||, falling back to an
    absolute perturbation at u = 0.
    """
    vnorm = _norm(v)
    if vnorm == 0.0:
        raise ValueError("jvp direction must be nonzero")
    unorm = _norm(u)
    h = cfg.eps_j * unorm if unorm > 0 else cfg.eps_j
    g_pert = residual(u + (h / vnorm) * v, grid, cfg, tables)
    return (g_pert - g_u) * (vnorm / h)


def gmres_arnoldi(matvec, rhs: np.ndarray, max_iter: int, tol: float):
    """Single-cycle GMRES with modified Gram-Schmidt Arnoldi.

    Returns (hessenberg, basis, y, solution, resnorms): the (k+1) x k
    Hessenberg factor, the k+1 Krylov vectors stacked as rows, the
    least-squares coefficients, the lifted solution and the per-iteration
    relative residual norms. The factorisation is exposed so a hookstep can
    re-solve the small problem under a trust-region constraint.
    """
    beta = _norm(rhs)
    if beta == 0.0:
        raise ValueError("gmres needs a nonzero right-hand side")
    shape = rhs.shape
    size = rhs.size
    basis = np.empty((max_iter + 1, size), dtype=rhs.dtype)
    basis[0] = (rhs / beta).ravel()
    hess = np.zeros((max_iter + 1, max_iter))
    resnorms = []
    y = None
    k = 0
    for j in range(max_iter):
        # copy: a matvec may hand back (a view of) its input
        w = np.array(matvec(basis[j].reshape(shape)), dtype=rhs.dtype).ravel()
        for i in range(j + 1):
            hij = _dot(basis[i], w)
            hess[i, j] = hij
            w -= hij * basis[i]
        hnorm = _norm(w)
        hess[j + 1, j] = hnorm
        k = j + 1
        e1 = np.zeros(k + 1)
        e1[0] = beta
        y, res2, *_ = np.linalg.lstsq(hess[: k + 1, :k], e1, rcond=None)
        resnorm = _norm(hess[: k + 1, :k] @ y - e1) / beta
        resnorms.append(resnorm)
        if hnorm <= 1e-14 * max(1.0, abs(hess[: k + 1, :k]).max()):
            break  # happy breakdown: rhs lies in the Krylov subspace
        basis[j + 1] = w / hnorm
        if resnorm <= tol:
            break
    solution = (y @ basis[:k]).reshape(shape)
    return hess[: k + 1, :k], basis[: k + 1], y, solution, resnorms


def hookstep(hessenberg: np.ndarray, rhs_norm: float, delta: float) -> np.ndarray:
    """Minimise ||H y - beta e1|| subject to ||y|| <= delta.

    Solved through the SVD of the small Hessenberg factor; when the
    constraint is active the Lagrange multiplier is found by bisection on
    the monotone secular equation ||y(mu)|| = delta.
    """
    kp1, k = hessenberg.shape
    e1 = np.zeros(kp1)
    e1[0] = rhs_norm
    u_svd, sig, vt = np.linalg.svd(hessenberg, full_matrices=False)
    d = u_svd.T @ e1
    cutoff = max(sig[0], 1.0) * 1e-14 if sig.size else 1.0
    safe = sig > cutoff

    coeff = np.zeros(k)
    coeff[safe] = d[safe] / sig[safe]
    y = vt.T @ coeff
    if _norm(y) <= delta:
        return y  # constraint inactive: plain Gauss-Newton step

    def step_norm(mu: float) -> float:
        return _norm(sig * d / (sig * sig + mu))

    lo, hi = 0.0, max(sig[0] ** 2, 1.0)
    while step_norm(hi) > delta:
        hi *= 4.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if step_norm(mid) > delta:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    return vt.T @ (sig * d / (sig * sig + mu))


def newton_solve(guess: np.ndarray, grid: GridSpec, cfg: JfnkConfig | None = None,
                 tables=None) -> NewtonReport:
    """Damped Newton iteration with hookstep trust region.

    Never raises on non-convergence; the failure mode is recorded in the
    report. Rejected steps reuse the current Arnoldi factorisation, so a
    shrink-and-retry costs one residual evaluation only.
    """
    cfg = cfg or JfnkConfig()
    if tables is None:
        tables = cached_tables(grid, cfg.dt)
    u = np.array(guess, dtype=np.complex128)
    if not np.all(np.isfinite(u)):
        raise ValueError("initial guess must be finite")

    def g_of(w):
        return residual(w, grid, cfg, tables)

    try:
        g = g_of(u)
    except BlowUpError:
        return NewtonReport(converged=False, iterations=0,
                            residual_history=[np.inf], final_state=u,
                            failure_reason="blow_up")
    gnorm = _norm(g)
    rel = gnorm / max(_norm(u), 1e-30)
    history = [rel]
    if rel <= cfg.eps_err:
        return NewtonReport(converged=True, iterations=0,
                            residual_history=history, final_state=u)

    delta = cfg.delta_max
    reason = "max_iterations"
    iterations = 0
    stall = 0
    for it in range(1, cfg.n_its + 1):
        iterations = it
        hess, basis, _, _, _ = gmres_arnoldi(
            lambda w: jvp(u, w, g, grid, cfg, tables),
            -g, cfg.m_gmres, cfg.gmres_tol)
        beta = gnorm  # ||rhs|| = ||G||
        # ||J^T G|| / ||G|| restricted to the Krylov space is the norm of the
        # first Hessenberg row, since G is beta * v_1
        model_grad = _norm(hess[0])

        accepted = False
        g_new = None
        gn_norm = None
        while delta >= cfg.delta_min:
            y = hookstep(hess, beta, delta)
            s = (y @ basis[:-1]).reshape(u.shape)
            try:
                g_new = g_of(u + s)
            except BlowUpError:
                g_new = None
            if g_new is not None:
                gn_norm = _norm(g_new)
                ared = gnorm - gn_norm
                e1 = np.zeros(hess.shape[0])
                e1[0] = beta
                pred = gnorm - _norm(hess @ y - e1)
                if ared > 0 and (pred <= 0 or ared / pred >= cfg.accept_ratio):
                    if pred > 0 and ared / pred >= cfg.good_ratio \
                            and _norm(y) >= 0.99 * delta:
                        delta = min(delta * cfg.grow, cfg.delta_max)
                    accepted = True
                    break
            delta = min(delta, _norm(y)) * cfg.shrink
        if not accepted:
            reason = "trust_region_collapse"
            break

        u = u + s
        g = g_new
        gnorm = gn_norm
        rel_new = gnorm / max(_norm(u), 1e-30)
        improvement = (history[-1] - rel_new) / history[-1]
        history.append(rel_new)
        if rel_new <= cfg.eps_err:
            return NewtonReport(converged=True, iterations=it,
                                residual_history=history, final_state=u)
        stall = stall + 1 if improvement < cfg.stall_improvement else 0
        if stall >= cfg.stall_window or (model_grad < cfg.g_tol and stall >= 1):
            reason = "stagnation"
            break

    return NewtonReport(converged=False, iterations=iterations,
                        residual_history=history, final_state=u,
                        failure_reason=reason)
