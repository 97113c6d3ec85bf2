"""Minimizers for the dual functionals, and an infeasibility certificate.

The exact and null kinds are quadratic-plus-linear and are minimized by
conjugate gradients on the normal-equations operator (the gradient of the
homogeneous quadratic part), with exact line search.  The approximate kinds
carry nonsmooth eps-weighted norm blocks and are minimized by proximal
gradient with Barzilai-Borwein steps, backtracking, and block soft
shrinkage, warm-started at the minimizer of the smooth part and
accelerated by direction-freezing linearized solves; the objective history
is monotone by construction and the stopping test is the proximal
fixed-point residual, so the eps terms are never smoothed.

Non-coercive instances (the uniqueness hypothesis fails, so the quadratic
form has a kernel the data pairs against) show up as diverging iterates;
they are reported with verdict ``diverged_infeasible`` once the iterate
norm passes a bound proportional to the data scale, or as soon as a
conjugate-gradient direction exposes a numerically vanishing curvature
against a nonzero residual.  The singular-value check in
:mod:`pccontrol.certificates` is the authoritative pre-check;
:func:`certify_infeasibility` converts its witness into an explicit
unreachable neighborhood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidWitnessError
from .functionals import (
    APPROX_KINDS,
    DualVariable,
    ProblemData,
    apply_quadratic,
    dual_dot,
    dual_norm,
    eval_smooth,
    grad_smooth,
    nonsmooth_value,
)

__all__ = ["SolverOptions", "SolveDiagnostics", "minimize", "certify_infeasibility"]

_RESIDUAL_REFRESH = 50
_MAX_BACKTRACKS = 60
_PROX_BURST = 25


@dataclass(frozen=True)
class SolverOptions:
    """Iteration limits and tolerances.

    ``grad_tol`` bounds the fixed-point residual norm in the dual inner
    product (for CG this is the gradient norm).  ``divergence_bound``
    defaults to 1e6 times the problem data scale.
    """

    max_iters: int = 5000
    grad_tol: float = 1e-9
    divergence_bound: float | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not (self.grad_tol > 0.0):
            raise ConfigError("grad_tol must be positive")
        if self.divergence_bound is not None and not (self.divergence_bound > 0.0):
            raise ConfigError("divergence_bound must be positive")


@dataclass
class SolveDiagnostics:
    iterations: int
    final_residual: float
    objective_history: list[float] = field(default_factory=list)
    verdict: str = "converged"  # converged | max_iters | diverged_infeasible


def _data_scale(p: ProblemData) -> float:
    dt = p.grid.dt
    scale = 1.0 + float(np.linalg.norm(p.y0))
    if p.y1 is not None:
        scale += float(np.linalg.norm(p.y1))
    scale += math.sqrt(dt * float(np.sum(p.g_star**2)))
    scale += math.sqrt(dt * float(np.sum(p.w_star**2)))
    return scale


def _divergence_bound(p: ProblemData, opts: SolverOptions) -> float:
    if opts.divergence_bound is not None:
        return opts.divergence_bound
    return 1e6 * _data_scale(p)


def minimize(
    p: ProblemData,
    opts: SolverOptions | None = None,
    kernel_basis: np.ndarray | None = None,
) -> tuple[DualVariable, SolveDiagnostics]:
    """Minimize the dual functional of ``p``.

    For the null kind, directions invisible to both the observation and the
    initial trace are quotiented out: the iterates are kept orthogonal to
    the kernel computed by :func:`pccontrol.certificates.kernel_N` (or to
    ``kernel_basis`` if supplied, which tests use to inject a degenerate
    propagator).  For every propagator built from a matrix exponential that
    kernel is empty.
    """
    opts = opts or SolverOptions()
    if p.kind in APPROX_KINDS:
        return _minimize_prox(p, opts)
    if p.kind == "null" and kernel_basis is None:
        from .certificates import kernel_N

        kernel_basis = kernel_N(p.system, p.grid, ops=p.ops)
    return _minimize_cg(p, opts, kernel_basis)


# ---------------------------------------------------------------------------
# conjugate gradients


def _cg_core(apply_S, b: DualVariable, x0: DualVariable, dt: float, tol: float,
             max_iters: int, bound: float):
    """CG for S x = b from x0 on the dual space.

    Returns (x, residual_norm, iterations, verdict, objective_increments)
    where the increments reproduce the exact decrease of the quadratic
    model per iteration.  Verdict 'diverged_infeasible' is raised by iterate
    blowup or by a vanishing-curvature direction against a nonzero
    residual (a numerically exposed kernel the data pairs against).
    """
    x = x0.copy()
    Sx0 = apply_S(x)
    r = b - Sx0
    rr = dual_dot(r, r, dt)
    decrements: list[float] = []
    if math.sqrt(rr) <= tol:
        return x, math.sqrt(rr), 0, "converged", decrements
    pdir = r.copy()
    curvature_scale = 0.0
    verdict = "max_iters"
    iters = 0
    for it in range(1, max_iters + 1):
        iters = it
        Sp = apply_S(pdir)
        pSp = dual_dot(pdir, Sp, dt)
        pp = dual_dot(pdir, pdir, dt)
        if pSp > 0.0:
            curvature_scale = max(curvature_scale, pSp / pp)
        if pSp <= 1e-14 * pp * max(curvature_scale, 1e-300):
            verdict = "diverged_infeasible"
            break
        alpha = rr / pSp
        x = x + alpha * pdir
        decrements.append(0.5 * alpha * rr)
        if dual_norm(x, dt) > bound:
            verdict = "diverged_infeasible"
            break
        if it % _RESIDUAL_REFRESH == 0:
            r = b - apply_S(x)
        else:
            r = r - alpha * Sp
        rr_new = dual_dot(r, r, dt)
        if math.sqrt(rr_new) <= tol:
            rr = rr_new
            verdict = "converged"
            break
        beta = rr_new / rr
        rr = rr_new
        pdir = r + beta * pdir
    return x, math.sqrt(rr), iters, verdict, decrements


def _project_out(v: DualVariable, kernel: np.ndarray | None):
    if kernel is not None and kernel.size:
        v.z_T -= kernel @ (kernel.T @ v.z_T)


def _minimize_cg(
    p: ProblemData, opts: SolverOptions, kernel: np.ndarray | None
) -> tuple[DualVariable, SolveDiagnostics]:
    dt = p.grid.dt
    bound = _divergence_bound(p, opts)

    def apply_S(x: DualVariable) -> DualVariable:
        if kernel is not None and kernel.size:
            x = x.copy()
            _project_out(x, kernel)
        out = apply_quadratic(p, x)
        _project_out(out, kernel)
        return out

    grad0, _ = grad_smooth(p, p.zero_variable())
    b = -1.0 * grad0
    _project_out(b, kernel)
    v, res, iters, verdict, decrements = _cg_core(
        apply_S, b, p.zero_variable(), dt, opts.grad_tol, opts.max_iters, bound
    )
    _project_out(v, kernel)
    history = [0.0]
    for dec in decrements:
        history.append(history[-1] - dec)
    return v, SolveDiagnostics(iters, res, history, verdict)


# ---------------------------------------------------------------------------
# proximal gradient for the approximate kinds


def _shrink(x: np.ndarray, amount: float) -> np.ndarray:
    nrm = float(np.linalg.norm(x))
    if nrm <= amount or nrm == 0.0:
        return np.zeros_like(x)
    return (1.0 - amount / nrm) * x


def _apply_prox(p: ProblemData, v: DualVariable, terms, tau: float) -> DualVariable:
    out = v.copy()
    for term in terms:
        amount = tau * term.weight
        if term.block == "z_T_perp_E":
            z_in = p.E.project(out.z_T)
            out.z_T = z_in + _shrink(out.z_T - z_in, amount)
        elif term.block == "w_coef":
            out.w_coef = _shrink(out.w_coef, amount)
        else:  # pragma: no cover - descriptor blocks are fixed by the kind
            raise ConfigError(f"unknown prox block {term.block!r}")
    return out


def _frozen_subgradient(p: ProblemData, v: DualVariable, terms):
    """Directions of the active norm blocks, or None per frozen (zero) block."""
    d_z = None
    d_w = None
    for term in terms:
        if term.block == "z_T_perp_E":
            z_perp = v.z_T - p.E.project(v.z_T)
            nrm = float(np.linalg.norm(z_perp))
            if nrm > 1e-14 * max(1.0, float(np.linalg.norm(v.z_T))):
                d_z = z_perp / nrm
        elif term.block == "w_coef":
            nrm = float(np.linalg.norm(v.w_coef))
            if nrm > 1e-14:
                d_w = v.w_coef / nrm
    return d_z, d_w


def _accelerated_candidate(p, v, terms, ell, dt, bound, tol, max_iters):
    """Solve the stationarity system with the norm directions frozen.

    Away from the nondifferentiable points the optimality condition reads
    S v + ell + eps * (active directions) = 0; freezing the directions at
    the current iterate gives a linear system solved by CG (blocks
    currently at zero are constrained to stay there).  The caller accepts
    the candidate only if it decreases the full objective.
    """
    d_z, d_w = _frozen_subgradient(p, v, terms)
    has_w_term = any(t.block == "w_coef" for t in terms)

    def restrict(x: DualVariable) -> DualVariable:
        out = x.copy()
        if d_z is None:
            out.z_T = p.E.project(out.z_T)
        if has_w_term and d_w is None:
            out.w_coef = np.zeros_like(out.w_coef)
        return out

    def apply_S(x: DualVariable) -> DualVariable:
        return restrict(apply_quadratic(p, restrict(x)))

    rhs = -1.0 * ell
    for term in terms:
        if term.block == "z_T_perp_E" and d_z is not None:
            rhs.z_T = rhs.z_T - term.weight * d_z
        if term.block == "w_coef" and d_w is not None:
            rhs.w_coef = rhs.w_coef - term.weight * d_w
    rhs = restrict(rhs)
    x, _, _, verdict, _ = _cg_core(apply_S, rhs, restrict(v), dt, tol, max_iters, bound)
    if verdict == "diverged_infeasible":
        return None
    return restrict(x)


def _minimize_prox(p: ProblemData, opts: SolverOptions) -> tuple[DualVariable, SolveDiagnostics]:
    dt = p.grid.dt
    bound = _divergence_bound(p, opts)
    ell, terms = grad_smooth(p, p.zero_variable())

    warm, _, _, warm_verdict, _ = _cg_core(
        lambda x: apply_quadratic(p, x),
        -1.0 * ell,
        p.zero_variable(),
        dt,
        max(opts.grad_tol, 1e-12),
        opts.max_iters,
        bound,
    )
    # A non-coercive smooth part does not decide the full functional (the
    # eps terms may restore coercivity), so fall back to the origin.
    v = p.zero_variable() if warm_verdict == "diverged_infeasible" else warm

    grad, _ = grad_smooth(p, v)
    J_v = eval_smooth(p, v)
    F_v = J_v + nonsmooth_value(p, v)
    history = [F_v]
    Sg = apply_quadratic(p, grad)
    gSg = dual_dot(grad, Sg, dt)
    gg = dual_dot(grad, grad, dt)
    tau = gg / gSg if gSg > 0.0 else 1.0
    prev_step: DualVariable | None = None
    prev_Sstep: DualVariable | None = None
    residual = math.inf
    verdict = "max_iters"
    iters = 0
    it = 0
    accel_budget = 50
    while it < opts.max_iters:
        stop = False
        for _ in range(_PROX_BURST):
            if it >= opts.max_iters:
                break
            it += 1
            iters = it
            if prev_step is not None:
                denom = dual_dot(prev_step, prev_Sstep, dt)
                if denom > 0.0:
                    tau = min(max(dual_dot(prev_step, prev_step, dt) / denom, 1e-12), 1e12)
            accepted = None
            for _ in range(_MAX_BACKTRACKS):
                trial = _apply_prox(p, v - tau * grad, terms, tau)
                step = trial - v
                step_sq = dual_dot(step, step, dt)
                if step_sq == 0.0:
                    accepted = (trial, step, step_sq, None)
                    break
                Sstep = apply_quadratic(p, step)
                curvature = dual_dot(step, Sstep, dt)
                if tau * curvature <= step_sq * (1.0 + 1e-12):
                    accepted = (trial, step, step_sq, Sstep)
                    break
                tau = 0.8 * step_sq / curvature
            if accepted is None:  # pragma: no cover - reachable only on NaNs
                stop = True
                break
            trial, step, step_sq, Sstep = accepted
            residual = math.sqrt(step_sq) / tau
            if Sstep is None:
                history.append(F_v)
                verdict = "converged"
                stop = True
                break
            J_v += dual_dot(grad, step, dt) + 0.5 * dual_dot(step, Sstep, dt)
            v = trial
            grad = grad + Sstep
            F_v = J_v + nonsmooth_value(p, v)
            history.append(F_v)
            prev_step, prev_Sstep = step, Sstep
            if it % _RESIDUAL_REFRESH == 0:
                grad, _ = grad_smooth(p, v)
                J_v = eval_smooth(p, v)
            if dual_norm(v, dt) > bound:
                verdict = "diverged_infeasible"
                stop = True
                break
            if residual <= opts.grad_tol:
                verdict = "converged"
                stop = True
                break
        if stop:
            break
        if accel_budget > 0:
            accel_budget -= 1
            candidate = _accelerated_candidate(
                p, v, terms, ell, dt, bound, 0.1 * opts.grad_tol, opts.max_iters
            )
            if candidate is not None:
                J_c = eval_smooth(p, candidate)
                F_c = J_c + nonsmooth_value(p, candidate)
                if F_c <= F_v:
                    v, J_v, F_v = candidate, J_c, F_c
                    grad, _ = grad_smooth(p, v)
                    history.append(F_v)
                    prev_step = prev_Sstep = None
    return v, SolveDiagnostics(iters, residual, history, verdict)


def certify_infeasibility(p: ProblemData, witness) -> float:
    """Radius of a neighborhood of -z_T unreachable under the constraints.

    For a kernel witness (z_T, g, w) of the uniqueness map, every trajectory
    from y0 = 0 whose control and trajectory projections equal g and w
    satisfies ||y(T) + z_T|| >= (||z_T||^2 + ||w||^2 + ||g||^2) / ||z_T||.
    Returns that radius; returns +inf when z_T = 0 but (g, w) != 0 (the
    constraints alone are contradictory).  Subspace coefficients are taken
    in orthonormal coordinates, so their Euclidean norms are the L2 norms of
    the lifted signals.
    """
    z_T, g_coef, w_coef = (np.asarray(part, dtype=float).reshape(-1) for part in witness)
    nz = float(np.linalg.norm(z_T))
    ng = float(np.linalg.norm(g_coef))
    nw = float(np.linalg.norm(w_coef))
    if nz == 0.0 and ng == 0.0 and nw == 0.0:
        raise InvalidWitnessError("witness must be nonzero")
    if nz == 0.0:
        return math.inf
    return (nz**2 + ng**2 + nw**2) / nz
