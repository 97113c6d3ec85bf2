"""Discrete certificates for uniqueness and observability hypotheses.

The solvability of the constrained control problems rests on a uniqueness
property of the backward equation: if z' + A* z = w with z(T) = z_T and
B* z = g on (0, T) for subspace elements g, w, then (z_T, g, w) = 0.  At
the discrete level this is the kernel-freeness of an assembled linear map,
decided by its smallest singular value against a fixed threshold; the
companion observability constants are inverses of (generalized) smallest
singular values.

Every report produced here is a discrete-level certificate: it speaks
about the discretized system on its grid, not about any continuous limit.

Coordinates are orthonormal everywhere (Euclidean state coordinates,
orthonormal subspace coefficients, and signals scaled by sqrt(dt)), so
singular values measure exactly the norms used by the inequalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LinearSystem, StepOperator, TimeGrid, adjoint_solve, build_propagator
from .errors import FrequencyInputError, ProblemTooLargeError, ShapeError
from .subspaces import SignalAmbient, Subspace, VectorAmbient, orthonormalize

__all__ = [
    "UCReport",
    "ObservabilityReport",
    "TwoTimeReport",
    "ModalFrequencyCheck",
    "ModalUCReport",
    "SpectralClassification",
    "assemble_uc_map",
    "uc_check",
    "observability_constant",
    "kernel_N",
    "two_time_check",
    "restriction_kernel_check",
    "spectral_uc_classify",
    "modal_uc_check",
]

DEFAULT_UC_TOL = 1e-8
KERNEL_RTOL = 1e-10
OBS_KINDS = ("final_state", "initial_state", "general_final", "general_initial", "tilde_T")


@dataclass
class UCReport:
    """Singular-value verdict on a uniqueness map.

    ``witness`` is the unit-norm right singular vector of the smallest
    singular value, present only when the property fails; its block
    structure (z_T, g coefficients, w coefficients) is available through
    :meth:`witness_parts` when the map was assembled with known block dims.
    """

    sigma_min: float
    holds: bool
    witness: np.ndarray | None
    map_dims: tuple[int, int]
    block_dims: tuple[int, int, int] | None = None

    def witness_parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
        if self.witness is None or self.block_dims is None:
            return None
        n, p_g, p_w = self.block_dims
        w = self.witness
        return w[:n], w[n:n + p_g], w[n + p_g:n + p_g + p_w]


@dataclass
class ObservabilityReport:
    """Constant C of one observability inequality; C = 1/sigma_min.

    ``constant_C`` is +inf when the inequality fails at the discrete level
    (the observation map has a kernel the measured quantity sees).
    """

    kind: str
    constant_C: float
    sigma_min: float


@dataclass
class TwoTimeReport:
    """Outcome of the intermediate-time reduction for null controllability."""

    restriction_ok: bool
    uc_tilde: UCReport
    obs_tilde: ObservabilityReport
    certified: bool


@dataclass
class ModalFrequencyCheck:
    value: float
    role: str  # 'mu' | 'rho' | 'combined'
    ok: bool
    sigma_min: float
    witness: np.ndarray | None


@dataclass
class ModalUCReport:
    ok: bool
    checks: list[ModalFrequencyCheck]


@dataclass
class SpectralClassification:
    verdict: str  # UC_holds_nonresonant | UC_holds_no_solution | UC_holds_inf_positive | UC_fails
    quantity: float


def _ops_or_build(system: LinearSystem, grid: TimeGrid, ops: StepOperator | None) -> StepOperator:
    return ops if ops is not None else build_propagator(system, grid)


def _singular_values_and_v(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Singular values and the complete right singular basis (cols x cols),
    without forming the large left factor of tall matrices."""
    rows, cols = M.shape
    if rows >= cols:
        _, s, vt = np.linalg.svd(M, full_matrices=False)
    else:
        _, s, vt = np.linalg.svd(M, full_matrices=True)
    return s, vt


def _check_spaces(system: LinearSystem, grid: TimeGrid, G: Subspace, W: Subspace):
    for space, dim, name in ((G, system.m, "G"), (W, system.n, "W")):
        amb = space.ambient
        if not isinstance(amb, SignalAmbient) or amb.dim != dim or amb.grid != grid:
            raise ShapeError(f"{name} must be a signal subspace of dimension {dim} on the grid")


def _observation_columns(system, ops, z_T, f, sqrt_dt) -> tuple[np.ndarray, np.ndarray]:
    """sqrt(dt)-scaled B* z signal (flattened) and z(0) for one adjoint solve."""
    z = adjoint_solve(system, ops, z_T, f)
    return sqrt_dt * (z.interval_averages @ system.B).ravel(), z.initial


def assemble_uc_map(
    system: LinearSystem,
    grid: TimeGrid,
    G: Subspace,
    W: Subspace,
    ops: StepOperator | None = None,
) -> np.ndarray:
    """Matrix of (z_T, g, w) -> B* z - g, with z driven by the source w.

    Domain coordinates are orthonormal (state Euclidean, subspace
    coefficients); the output signal is scaled by sqrt(dt).  The uniqueness
    property holds at the discrete level iff this map has trivial kernel.
    """
    _check_spaces(system, grid, G, W)
    ops = _ops_or_build(system, grid, ops)
    n, m, N = system.n, system.m, grid.n_steps
    sqrt_dt = math.sqrt(grid.dt)
    zero_f = np.zeros((N, n))
    cols: list[np.ndarray] = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        obs, _ = _observation_columns(system, ops, e, zero_f, sqrt_dt)
        cols.append(obs)
    for j in range(G.dim):
        cols.append(-sqrt_dt * G.basis[j].ravel())
    for j in range(W.dim):
        obs, _ = _observation_columns(system, ops, np.zeros(n), W.basis[j], sqrt_dt)
        cols.append(obs)
    return np.column_stack(cols) if cols else np.zeros((N * m, 0))


def uc_check(
    M: np.ndarray,
    tol_uc: float = DEFAULT_UC_TOL,
    block_dims: tuple[int, int, int] | None = None,
) -> UCReport:
    """SVD verdict on an assembled uniqueness map."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    if cols == 0:
        return UCReport(math.inf, True, None, (rows, cols), block_dims)
    if rows == 0:
        witness = np.zeros(cols)
        witness[0] = 1.0
        return UCReport(0.0, False, witness, (rows, cols), block_dims)
    s, vt = _singular_values_and_v(M)
    if rows < cols:
        sigma_min = 0.0
    else:
        sigma_min = float(s[-1])
    holds = sigma_min > tol_uc
    witness = None if holds else vt[-1].copy()
    return UCReport(sigma_min, holds, witness, (rows, cols), block_dims)


def _homogeneous_observation_matrix(system, grid, ops) -> tuple[np.ndarray, np.ndarray]:
    """Columns sqrt(dt) B* z per unit z_T, plus the map z_T -> z(0)."""
    n, m, N = system.n, system.m, grid.n_steps
    sqrt_dt = math.sqrt(grid.dt)
    zero_f = np.zeros((N, n))
    theta = np.zeros((N * m, n))
    z0_map = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        theta[:, i], z0_map[:, i] = _observation_columns(system, ops, e, zero_f, sqrt_dt)
    return theta, z0_map


def _general_maps(system, grid, G, W, ops, want_initial: bool):
    """Stacked observation map over (z_T, g, w, f) and, optionally, the
    measured map (z(0), g, w, f); f enters in sqrt(dt)-scaled coordinates."""
    n, m, N = system.n, system.m, grid.n_steps
    p_g, p_w = G.dim, W.dim
    sqrt_dt = math.sqrt(grid.dt)
    n_cols = n + p_g + p_w + n * N
    obs_rows = N * m + N * n
    M = np.zeros((obs_rows, n_cols))
    D = np.zeros((n + p_g + p_w + n * N, n_cols)) if want_initial else None
    zero_f = np.zeros((N, n))

    def fill(col, a_signal, b_signal, z0):
        M[:N * m, col] = a_signal
        M[N * m:, col] = b_signal
        if D is not None:
            D[:n, col] = z0

    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        obs, z0 = _observation_columns(system, ops, e, zero_f, sqrt_dt)
        fill(i, obs, np.zeros(N * n), z0)
    for j in range(p_g):
        col = n + j
        fill(col, sqrt_dt * G.basis[j].ravel(), np.zeros(N * n), np.zeros(n))
        if D is not None:
            D[n + j, col] = 1.0
    for j in range(p_w):
        col = n + p_g + j
        fill(col, np.zeros(N * m), sqrt_dt * W.basis[j].ravel(), np.zeros(n))
        if D is not None:
            D[n + p_g + j, col] = 1.0
    inv_sqrt_dt = 1.0 / sqrt_dt
    for k in range(N):
        for i in range(n):
            col = n + p_g + p_w + k * n + i
            f = np.zeros((N, n))
            f[k, i] = inv_sqrt_dt  # unit norm in sqrt(dt)-scaled coordinates
            obs, z0 = _observation_columns(system, ops, np.zeros(n), f, sqrt_dt)
            b = sqrt_dt * f.ravel()
            fill(col, obs, b, z0)
            if D is not None:
                D[n + p_g + p_w + k * n + i, col] = 1.0
    return M, D


def _split_constant(M: np.ndarray, D: np.ndarray, kernel_rtol: float) -> tuple[float, float]:
    """Best C with ||D x|| <= C ||M x||, via an SVD split of M.

    Returns (C, sigma) with sigma = 1/C the smallest generalized singular
    value; C = +inf when M has a kernel direction that D does not annihilate.
    """
    s, vt = _singular_values_and_v(M)
    cols = M.shape[1]
    n_sing = s.shape[0]
    smax = float(s[0]) if n_sing else 0.0
    cutoff = kernel_rtol * max(smax, 1e-300)
    keep = [i for i in range(n_sing) if s[i] > cutoff]
    null_idx = [i for i in range(cols) if i >= n_sing or s[i] <= cutoff]
    d_scale = max(float(np.linalg.norm(D, 2)), 1e-300)
    if null_idx:
        V0 = vt[null_idx].T
        if float(np.linalg.norm(D @ V0, 2)) > kernel_rtol * d_scale:
            return math.inf, 0.0
    if not keep:
        return 0.0, math.inf  # M and D both vanish; inequality is trivial
    Vp = vt[keep].T
    C = float(np.linalg.norm((D @ Vp) / s[keep], 2))
    if C == 0.0:
        return 0.0, math.inf
    return C, 1.0 / C


def observability_constant(
    system: LinearSystem,
    grid: TimeGrid,
    G: Subspace,
    W: Subspace,
    kind: str,
    t_tilde: float | None = None,
    cap: int = 20000,
    ops: StepOperator | None = None,
    kernel_rtol: float = KERNEL_RTOL,
) -> ObservabilityReport:
    """Constant of one observability inequality, as 1/(generalized sigma_min).

    Kinds 'final_state', 'initial_state' and 'tilde_T' quantify over the
    homogeneous backward solutions (G, W do not enter).  The 'general_*'
    kinds quantify over (z_T, g, w, f) with f ranging over the whole signal
    space; the observed pair is (B* z + g, f + w) stacked in the product
    norm, which bounds the sum-of-norms form of the inequality as well.
    Dense assembly; refuses when n * n_steps exceeds ``cap``.
    """
    if kind not in OBS_KINDS:
        raise ShapeError(f"kind must be one of {OBS_KINDS}, got {kind!r}")
    _check_spaces(system, grid, G, W)
    ops = _ops_or_build(system, grid, ops)
    n, N = system.n, grid.n_steps
    if kind in ("general_final", "general_initial") and n * N > cap:
        raise ProblemTooLargeError(
            f"dense observability assembly needs n*n_steps <= {cap}, got {n * N}"
        )
    if kind in ("final_state", "initial_state", "tilde_T"):
        theta, z0_map = _homogeneous_observation_matrix(system, grid, ops)
        if kind == "final_state":
            svals = np.linalg.svd(theta, compute_uv=False)
            smax = float(svals[0]) if svals.size else 0.0
            smin = float(svals[-1]) if (svals.size and theta.shape[0] >= n) else 0.0
            if smin <= kernel_rtol * max(smax, 1e-300):
                return ObservabilityReport(kind, math.inf, 0.0)
            return ObservabilityReport(kind, 1.0 / smin, smin)
        if kind == "initial_state":
            D = z0_map
        else:
            if t_tilde is None:
                raise ShapeError("kind 'tilde_T' requires t_tilde")
            k_t = grid.node_index(t_tilde)
            D = np.linalg.matrix_power(ops.E.T, N - k_t)
        C, sigma = _split_constant(theta, D, kernel_rtol)
        return ObservabilityReport(kind, C, sigma)
    want_initial = kind == "general_initial"
    M, D = _general_maps(system, grid, G, W, ops, want_initial)
    if not want_initial:
        svals = np.linalg.svd(M, compute_uv=False)
        smax = float(svals[0]) if svals.size else 0.0
        smin = float(svals[-1]) if (svals.size and M.shape[0] >= M.shape[1]) else 0.0
        if smin <= kernel_rtol * max(smax, 1e-300):
            return ObservabilityReport(kind, math.inf, 0.0)
        return ObservabilityReport(kind, 1.0 / smin, smin)
    C, sigma = _split_constant(M, D, kernel_rtol)
    return ObservabilityReport(kind, C, sigma)


def kernel_N(
    system: LinearSystem,
    grid: TimeGrid,
    ops: StepOperator | None = None,
    threshold: float = KERNEL_RTOL,
) -> np.ndarray:
    """Orthonormal basis (n, k) of the invisible final data.

    Kernel of z_T -> (B* z on (0, T), z(0)) for the homogeneous backward
    solution.  A propagator built from a matrix exponential is invertible,
    so this is empty for every finite-dimensional system; a degenerate
    injected propagator can make it nontrivial.
    """
    ops = _ops_or_build(system, grid, ops)
    n = system.n
    theta, z0_map = _homogeneous_observation_matrix(system, grid, ops)
    M = np.vstack([theta, z0_map])
    s, vt = _singular_values_and_v(M)
    smax = float(s[0]) if s.size else 0.0
    if smax == 0.0:
        return np.eye(n)
    null_rows = [i for i in range(n) if i >= s.shape[0] or s[i] <= threshold * smax]
    if not null_rows:
        return np.zeros((n, 0))
    return vt[null_rows].T.copy()


def _restriction_injective(space: Subspace, k_cut: int, dt: float) -> bool:
    if space.dim == 0:
        return True
    cols = math.sqrt(dt) * space.basis[:, :k_cut, :].reshape(space.dim, -1).T
    s = np.linalg.svd(cols, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    smin = float(s[-1]) if (s.size and cols.shape[0] >= cols.shape[1]) else 0.0
    return smin > 1e-10 * max(smax, 1e-300)


def two_time_check(
    system: LinearSystem,
    grid: TimeGrid,
    G: Subspace,
    W: Subspace,
    t_tilde: float,
    tol_uc: float = DEFAULT_UC_TOL,
    ops: StepOperator | None = None,
) -> TwoTimeReport:
    """Certify observability of the initial trace from an intermediate time.

    Three ingredients are checked: the restrictions of G and W to (0, t~)
    must be injective (elements supported past t~ would escape the
    uniqueness conclusion); the uniqueness map assembled on (0, t~), with
    the source restricted to (0, t~) and the subspace coefficients measured
    over the whole of (0, T), must have trivial kernel; and the
    intermediate-time trace must be observable from the full-horizon
    observation.  All three together certify the general initial-trace
    observability inequality at the discrete level, which is what the
    null-control solve needs.
    """
    _check_spaces(system, grid, G, W)
    ops = _ops_or_build(system, grid, ops)
    if not (0.0 < t_tilde <= grid.horizon):
        raise ShapeError(f"t_tilde must lie in (0, T], got {t_tilde}")
    k_cut = grid.node_index(t_tilde)
    n, m = system.n, system.m
    sqrt_dt = math.sqrt(grid.dt)
    restriction_ok = _restriction_injective(G, k_cut, grid.dt) and _restriction_injective(
        W, k_cut, grid.dt
    )
    zero_f = np.zeros((k_cut, n))
    cols: list[np.ndarray] = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        obs, _ = _observation_columns(system, ops, e, zero_f, sqrt_dt)
        cols.append(obs)
    for j in range(G.dim):
        cols.append(-sqrt_dt * G.basis[j][:k_cut].ravel())
    for j in range(W.dim):
        obs, _ = _observation_columns(system, ops, np.zeros(n), W.basis[j][:k_cut], sqrt_dt)
        cols.append(obs)
    M = np.column_stack(cols) if cols else np.zeros((k_cut * m, 0))
    uc_tilde = uc_check(M, tol_uc, block_dims=(n, G.dim, W.dim))
    obs_tilde = observability_constant(system, grid, G, W, "tilde_T", t_tilde=t_tilde, ops=ops)
    certified = restriction_ok and uc_tilde.holds and math.isfinite(obs_tilde.constant_C)
    return TwoTimeReport(restriction_ok, uc_tilde, obs_tilde, certified)


def restriction_kernel_check(W: Subspace, omega_mask, G: Subspace | None = None) -> bool:
    """Injectivity of the spatial restriction on W (and of the stacked map).

    With only W: full column rank of the restriction of W's basis to the
    masked quadrature nodes (trapezoid weights on the model's spatial grid).
    With G as well: the combined condition, injectivity of
    (w, g) -> restriction(w) + (d_t + Laplace) g, is tested in weak form
    against tensor test functions (interior time hats times interior space
    hats on the masked grid), the space operator realized by lumped P1 mass
    and stiffness pairings.
    """
    amb = W.ambient
    if not isinstance(amb, SignalAmbient):
        raise ShapeError("W must be a signal subspace")
    grid = amb.grid
    dt = grid.dt
    node_vals = omega_mask.state_values_at_masked_nodes  # (n_masked, n_state)
    h = omega_mask.node_spacing
    if W.dim and node_vals.shape[1] != amb.dim:
        raise ShapeError("omega_mask does not match the state dimension of W")
    if G is None:
        if W.dim == 0:
            return True
        cols = np.stack(
            [math.sqrt(dt) * (W.basis[j] @ node_vals.T).ravel() for j in range(W.dim)],
            axis=1,
        )
        cols *= math.sqrt(h)
        return _full_column_rank(cols)
    if not isinstance(G.ambient, SignalAmbient):
        raise ShapeError("G must be a signal subspace")
    if W.dim == 0 and G.dim == 0:
        return True
    rows = _weak_stacked_map(W, G, omega_mask, grid)
    return _full_column_rank(rows)


def _full_column_rank(Mat: np.ndarray) -> bool:
    if Mat.shape[1] == 0:
        return True
    s = np.linalg.svd(Mat, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    smin = float(s[-1]) if (s.size and Mat.shape[0] >= Mat.shape[1]) else 0.0
    # the max(smax, 1) floor keeps an all-zero map (every column annihilated)
    # from passing the relative test vacuously
    return smin > 1e-10 * max(smax, 1.0)


def _weak_stacked_map(W: Subspace, G: Subspace, mask, grid: TimeGrid) -> np.ndarray:
    """Rows indexed by (interior time hat, interior space hat); columns by
    the W basis (restriction pairing) then the G basis (heat-operator
    pairing, integrated by parts onto the test functions)."""
    N = grid.n_steps
    dt = grid.dt
    h = mask.node_spacing
    node_vals = mask.state_values_at_masked_nodes  # (n_masked, n_state)
    interp = mask.control_to_masked_nodes  # (n_masked, m)
    n_masked = node_vals.shape[0]
    if n_masked < 3 or N < 2:
        raise ShapeError("mask/grid too coarse for the stacked restriction test")
    cols: list[np.ndarray] = []
    for j in range(W.dim):
        w_nodes = W.basis[j] @ node_vals.T  # (N, n_masked)
        rows = []
        for r in range(1, N):
            pair = 0.5 * dt * h * (w_nodes[r - 1] + w_nodes[r])
            rows.append(pair[1:-1])
        cols.append(np.concatenate(rows))
    for j in range(G.dim):
        g_nodes = G.basis[j] @ interp.T  # (N, n_masked)
        lap = np.zeros_like(g_nodes)
        lap[:, 1:-1] = (g_nodes[:, :-2] - 2.0 * g_nodes[:, 1:-1] + g_nodes[:, 2:]) / h
        rows = []
        for r in range(1, N):
            time_deriv = h * (g_nodes[r] - g_nodes[r - 1])
            stiffness = 0.5 * dt * (lap[r - 1] + lap[r])
            rows.append((time_deriv + stiffness)[1:-1])
        cols.append(np.concatenate(rows))
    return np.column_stack(cols)


def spectral_uc_classify(
    mu: float,
    w_mu: np.ndarray,
    model,
    mask=None,
    tol: float = DEFAULT_UC_TOL,
    resonance_rtol: float = 1e-9,
) -> SpectralClassification:
    """Classify the stationary uniqueness question for one frequency.

    Solves (mu + Laplace) Z = w in modal coordinates, distinguishing the
    resonance cases of the Fredholm alternative:

    * mu off the spectrum: unique Z; holds iff its restricted norm exceeds
      ``tol`` (verdict UC_holds_nonresonant);
    * mu = lambda_j and the eigenspace component of w is nonzero: no
      solution exists at all (UC_holds_no_solution);
    * mu = lambda_j with w orthogonal to the eigenspace: the solutions are
      Z* + eigenspace; holds iff the minimized restricted norm over the
      eigenspace exceeds ``tol`` (UC_holds_inf_positive).

    The restricted norm is the quadrature L2 norm over the control window.
    """
    if mask is None:
        mask = model.omega_mask
    lam = np.asarray(model.eigenvalues, dtype=float)
    w_mu = np.asarray(w_mu, dtype=float).reshape(-1)
    if w_mu.shape[0] != lam.shape[0]:
        raise ShapeError("w_mu must have one coefficient per mode")
    vals = mask.mode_values_omega  # (n_modes, n_quad_omega)
    wq = mask.omega_weights

    def omega_norm(coeffs: np.ndarray) -> float:
        field = coeffs @ vals
        return float(np.sqrt(np.sum(wq * field**2)))

    resonant = np.abs(mu - lam) <= resonance_rtol * np.maximum(1.0, np.abs(lam))
    if not resonant.any():
        Z = w_mu / (mu - lam)
        q = omega_norm(Z)
        verdict = "UC_holds_nonresonant" if q > tol else "UC_fails"
        return SpectralClassification(verdict, q)
    p_eig = float(np.linalg.norm(w_mu[resonant]))
    if p_eig > tol:
        return SpectralClassification("UC_holds_no_solution", p_eig)
    Z_star = np.zeros_like(w_mu)
    off = ~resonant
    Z_star[off] = w_mu[off] / (mu - lam[off])
    base = Z_star @ vals
    V = vals[resonant]  # eigenspace directions evaluated on the window
    gram = (V * wq) @ V.T
    rhs = -(V * wq) @ base
    coeffs, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    best = base + coeffs @ V
    q = float(np.sqrt(np.sum(wq * best**2)))
    verdict = "UC_holds_inf_positive" if q > tol else "UC_fails"
    return SpectralClassification(verdict, q)


def _vector_basis(space, dim: int, name: str) -> np.ndarray:
    """Columns (dim, p) of an orthonormal basis for a vector-space subspace."""
    if space is None:
        return np.zeros((dim, 0))
    if isinstance(space, Subspace):
        if not isinstance(space.ambient, VectorAmbient) or space.ambient.dim != dim:
            raise ShapeError(f"{name} must be a subspace of R^{dim}")
        return space.basis.T.copy()
    arr = np.asarray(space, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape[0] != dim:
        raise ShapeError(f"{name} basis must have {dim}-dimensional columns")
    sub = orthonormalize(list(arr.T), VectorAmbient(dim))
    return sub.basis.T.copy()


def _kernel_verdict(M: np.ndarray) -> tuple[bool, float, np.ndarray | None]:
    s = np.linalg.svd(M, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    if M.shape[0] >= M.shape[1] and s.size:
        smin = float(s[-1])
    else:
        smin = 0.0
    ok = smin > 1e-10 * max(smax, 1e-300)
    if ok:
        return True, smin, None
    _, vt = _singular_values_and_v(M)
    return False, smin, vt[-1].copy()


def modal_uc_check(system: LinearSystem, mus=(), rhos=()) -> ModalUCReport:
    """Frequency-by-frequency uniqueness test for exponential-profile spans.

    For each (mu_k, W_k): only z = 0 may satisfy (mu_k I + A^T) z in W_k and
    B^T z = 0 (kernel test on the stacked matrix).  For each (rho_j, G_j):
    only z = 0 may satisfy (rho_j I + A^T) z = 0 with B^T z in G_j.  A value
    appearing in both lists is handled by the combined condition.  All
    checks passing realizes, mode by mode, the time-differentiation
    reduction to the classical uniqueness property.
    """
    n, m = system.n, system.m
    mus = [(float(v), s) for v, s in mus]
    rhos = [(float(v), s) for v, s in rhos]

    def _check_distinct(values, label):
        for i in range(len(values)):
            for j in range(i + 1, len(values)):
                if abs(values[i] - values[j]) <= 1e-12 * max(1.0, abs(values[i])):
                    raise FrequencyInputError(f"duplicate {label} value {values[i]}")

    _check_distinct([v for v, _ in mus], "mu")
    _check_distinct([v for v, _ in rhos], "rho")
    At = system.A.T
    Bt = system.B.T
    rho_left = list(rhos)
    checks: list[ModalFrequencyCheck] = []
    for mu, W_k in mus:
        Wb = _vector_basis(W_k, n, "W_k")
        partner = next(
            (pair for pair in rho_left if abs(pair[0] - mu) <= 1e-12 * max(1.0, abs(mu))), None
        )
        shifted = mu * np.eye(n) + At
        top = shifted - Wb @ (Wb.T @ shifted)
        if partner is not None:
            rho_left.remove(partner)
            Gb = _vector_basis(partner[1], m, "G_j")
            bottom = Bt - Gb @ (Gb.T @ Bt)
            role = "combined"
        else:
            bottom = Bt
            role = "mu"
        ok, smin, wit = _kernel_verdict(np.vstack([top, bottom]))
        checks.append(ModalFrequencyCheck(mu, role, ok, smin, wit))
    for rho, G_j in rho_left:
        Gb = _vector_basis(G_j, m, "G_j")
        top = rho * np.eye(n) + At
        bottom = Bt - Gb @ (Gb.T @ Bt)
        ok, smin, wit = _kernel_verdict(np.vstack([top, bottom]))
        checks.append(ModalFrequencyCheck(rho, "rho", ok, smin, wit))
    return ModalUCReport(ok=all(c.ok for c in checks), checks=checks)
