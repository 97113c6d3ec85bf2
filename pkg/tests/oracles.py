"""Independent oracles used by the test suite.

The dense KKT oracle assembles the discretized primal program

    min 1/2 int ||y||^2 + 1/2 int ||u||^2
    s.t. dynamics, final-state condition, P_G u = g*, P_W y_avg = w*

directly from the step matrices (block-Toeplitz impulse responses, not the
library's forward solver) and solves its optimality system by a dense
factorization.  The dual-method control must agree with it to solver
tolerance because the discretization keeps the forward/adjoint pairing
exact.
"""

from __future__ import annotations

import numpy as np

from pccontrol import (
    ProblemData,
    SignalAmbient,
    TimeGrid,
    make_ode,
    orthonormalize,
)


def impulse_responses(ops, B: np.ndarray, n_steps: int):
    """Interval-average and final-state responses to a unit control interval.

    avg[j] is the (n, m) map from the control value on interval 0 to the
    trajectory average on interval j; fin[j] maps it to the state at the
    final node when the impulse sits j intervals before the end.
    """
    E, Phi, Psi, dt = ops.E, ops.Phi, ops.Psi, ops.dt
    PhiB = Phi @ B
    avg = [Psi @ B]
    node = PhiB.copy()
    for _ in range(1, n_steps):
        avg.append((Phi / dt) @ node)
        node = E @ node
    fin = [PhiB]
    for _ in range(1, n_steps):
        fin.append(E @ fin[-1])
    return avg, fin


def primal_matrices(p: ProblemData):
    """Dense maps u -> (trajectory averages, final state) plus free responses."""
    n, m, N = p.system.n, p.system.m, p.grid.n_steps
    ops = p.ops
    avg, fin = impulse_responses(ops, p.system.B, N)
    L = np.zeros((N * n, N * m))
    Theta = np.zeros((n, N * m))
    for k in range(N):  # impulse on interval k
        for j in range(k, N):
            L[j * n:(j + 1) * n, k * m:(k + 1) * m] = avg[j - k]
        Theta[:, k * m:(k + 1) * m] = fin[N - 1 - k]
    free_nodes = [np.asarray(p.y0, dtype=float)]
    for _ in range(N):
        free_nodes.append(ops.E @ free_nodes[-1])
    h = np.concatenate([(ops.Phi / ops.dt) @ free_nodes[j] for j in range(N)])
    theta0 = free_nodes[-1]
    return L, Theta, h, theta0


def kkt_control(p: ProblemData) -> np.ndarray:
    """Solve the equality-constrained quadratic program for the control."""
    if p.kind not in ("exact", "null"):
        raise ValueError("the KKT oracle covers the exact and null kinds")
    n, m, N = p.system.n, p.system.m, p.grid.n_steps
    dt = p.grid.dt
    L, Theta, h, theta0 = primal_matrices(p)
    Q = dt * (L.T @ L + np.eye(N * m))
    c = dt * (L.T @ h)
    target = p.y1 if p.kind == "exact" else np.zeros(n)
    rows = [Theta]
    rhs = [target - theta0]
    if p.G.dim:
        G_flat = p.G.basis.reshape(p.G.dim, -1)
        rows.append(dt * G_flat)
        rhs.append(p.G.coords(p.g_star))
    if p.W.dim:
        W_flat = p.W.basis.reshape(p.W.dim, -1)
        rows.append(dt * (W_flat @ L))
        rhs.append(p.W.coords(p.w_star) - dt * (W_flat @ h))
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    k = A.shape[0]
    kkt = np.block([[Q, A.T], [A, np.zeros((k, k))]])
    sol = np.linalg.solve(kkt, np.concatenate([-c, b]))
    return sol[:N * m].reshape(N, m)


def random_system(rng: np.random.Generator, n: int, m: int):
    A = 0.5 * rng.normal(size=(n, n))
    B = rng.normal(size=(n, m))
    return make_ode(A, B, name=f"random({n},{m})")


def random_signal_subspace(rng, dim: int, grid: TimeGrid, p: int):
    raw = [rng.normal(size=(grid.n_steps, dim)) for _ in range(p)]
    return orthonormalize(raw, SignalAmbient(dim, grid))


def random_problem(rng, kind: str, n: int = 3, m: int = 2, n_steps: int = 16,
                   horizon: float = 1.0, p_g: int = 1, p_w: int = 1):
    system = random_system(rng, n, m)
    grid = TimeGrid(horizon, n_steps)
    G = random_signal_subspace(rng, m, grid, p_g)
    W = random_signal_subspace(rng, n, grid, p_w)
    kwargs = dict(
        system=system,
        grid=grid,
        y0=rng.normal(size=n),
        G=G,
        W=W,
        g_star=G.lift(0.3 * rng.normal(size=G.dim)),
        w_star=W.lift(0.3 * rng.normal(size=W.dim)),
    )
    if kind != "null":
        kwargs["y1"] = rng.normal(size=n)
    if kind in ("approx", "approx_relaxed"):
        kwargs["epsilon"] = 0.05 + 0.1 * rng.random()
        from pccontrol import VectorAmbient

        kwargs["E"] = orthonormalize([rng.normal(size=n)], VectorAmbient(n))
    return ProblemData(kind=kind, **kwargs)
