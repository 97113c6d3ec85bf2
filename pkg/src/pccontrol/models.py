"""Concrete systems in coordinates where every inner product is Euclidean.

Two PDE families on the unit interval with Dirichlet conditions are built
by spectral (modal) truncation: heat (A = Laplacian) and wave in
first-order form.  The Dirichlet eigenpairs are lambda_j = (j pi)^2 with
phi_j = sqrt(2) sin(j pi x).  The control acts through the indicator of a
window omega = (a, b); the control space is discretized on a composite
Gauss-Legendre quadrature of omega with the weights absorbed into the
coordinates (u_q * sqrt(w_q)), so B^T is the exact transpose of B.

For the wave family each mode contributes a 2x2 block [[0, s], [-s, 0]]
with s = sqrt(lambda_j), acting on the energy-normalized pair
(sqrt(lambda_j) a_j, a_j'); A is then skew-symmetric and the natural
energy norm of the wave equation is the Euclidean norm of the
coordinates.  (The dual pairing shift used for wave adjoint states in
weaker norms is absorbed by this normalization and needs no extra
bookkeeping here.)

Restriction operators to omega on the state side are realized by masking
a uniform trapezoid grid on (0, 1); the descriptor carries both
quadratures so uniqueness checks can restrict states and controls
consistently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import LinearSystem, TimeGrid
from .errors import InvalidSystemError, ShapeError

__all__ = [
    "ModelDescriptor",
    "OmegaRestriction",
    "make_heat1d",
    "make_wave1d",
    "make_ode",
    "exponential_profile_signal",
]

_GL_POINTS = 4


@dataclass
class OmegaRestriction:
    """Everything needed to restrict states or controls to the window omega."""

    node_spacing: float
    masked_nodes: np.ndarray  # (n_masked,) positions inside omega
    state_values_at_masked_nodes: np.ndarray  # (n_masked, n_state)
    control_to_masked_nodes: np.ndarray  # (n_masked, m) linear interpolation
    mode_values_omega: np.ndarray  # (n_modes, n_quad_omega) at the GL nodes
    omega_weights: np.ndarray  # (n_quad_omega,) GL weights


@dataclass
class ModelDescriptor:
    """Reporting and certification metadata for a constructed model."""

    family: str
    n_modes: int
    omega: tuple[float, float] | None
    eigenvalues: np.ndarray
    x_full: np.ndarray
    w_full: np.ndarray
    mask: np.ndarray  # bool over x_full
    x_omega: np.ndarray
    w_omega: np.ndarray
    mode_values_full: np.ndarray  # (n_modes, len(x_full))
    mode_values_omega: np.ndarray  # (n_modes, len(x_omega))
    state_value_matrix: np.ndarray  # (len(x_full), n_state)
    extras: dict = field(default_factory=dict)

    @property
    def omega_mask(self) -> OmegaRestriction:
        x_masked = self.x_full[self.mask]
        h = float(self.x_full[1] - self.x_full[0])
        return OmegaRestriction(
            node_spacing=h,
            masked_nodes=x_masked,
            state_values_at_masked_nodes=self.state_value_matrix[self.mask],
            control_to_masked_nodes=self._control_interpolation(x_masked),
            mode_values_omega=self.mode_values_omega,
            omega_weights=self.w_omega,
        )

    def _control_interpolation(self, targets: np.ndarray) -> np.ndarray:
        """Linear interpolation from absorbed control coordinates to node values."""
        xq = self.x_omega
        inv_sqrt_w = 1.0 / np.sqrt(self.w_omega)
        m = xq.shape[0]
        out = np.zeros((targets.shape[0], m))
        for r, x in enumerate(targets):
            j = int(np.clip(np.searchsorted(xq, x) - 1, 0, m - 2))
            x0, x1 = xq[j], xq[j + 1]
            # linear, extrapolating at the window edges so affine profiles
            # reproduce exactly on the masked nodes
            lam = 0.0 if x1 == x0 else (x - x0) / (x1 - x0)
            out[r, j] = (1.0 - lam) * inv_sqrt_w[j]
            out[r, j + 1] = lam * inv_sqrt_w[j + 1]
        return out

    def control_vector(self, profile) -> np.ndarray:
        """Absorbed control coordinates of a spatial profile on omega."""
        return np.sqrt(self.w_omega) * np.asarray([profile(x) for x in self.x_omega])


def _gauss_legendre_composite(a: float, b: float, n_sub: int) -> tuple[np.ndarray, np.ndarray]:
    ref_x, ref_w = np.polynomial.legendre.leggauss(_GL_POINTS)
    edges = np.linspace(a, b, n_sub + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * ref_x[None, :]).ravel()
    weights = (half[:, None] * ref_w[None, :]).ravel()
    return nodes, weights


def _dirichlet_modes(n_modes: int, x: np.ndarray) -> np.ndarray:
    j = np.arange(1, n_modes + 1)
    return math.sqrt(2.0) * np.sin(np.outer(j, np.pi * x))


def _check_window(omega) -> tuple[float, float]:
    a, b = float(omega[0]), float(omega[1])
    if not (0.0 <= a < b <= 1.0):
        raise ShapeError(f"omega must satisfy 0 <= a < b <= 1, got {(a, b)}")
    return a, b


def _quadratures(n_modes: int, omega, n_quad: int):
    a, b = _check_window(omega)
    if n_quad < 4 * n_modes:
        raise InvalidSystemError(f"n_quad must be at least 4*n_modes = {4 * n_modes}")
    x_full = np.linspace(0.0, 1.0, n_quad)
    w_full = np.full(n_quad, 1.0 / (n_quad - 1))
    w_full[0] *= 0.5
    w_full[-1] *= 0.5
    tol = 0.25 / (n_quad - 1)
    mask = (x_full >= a - tol) & (x_full <= b + tol)
    n_sub = max(n_modes, int(round((n_quad - 1) * (b - a) / 4.0)))
    x_omega, w_omega = _gauss_legendre_composite(a, b, n_sub)
    return a, b, x_full, w_full, mask, x_omega, w_omega


def make_heat1d(
    n_modes: int, omega=(0.3, 0.7), n_quad: int = 201
) -> tuple[LinearSystem, ModelDescriptor]:
    """Heat equation on (0, 1), distributed control on omega, modal coordinates.

    A = diag(-lambda_j); B_{j,q} = sqrt(w_q) phi_j(x_q) over the omega
    quadrature nodes.
    """
    a, b, x_full, w_full, mask, x_omega, w_omega = _quadratures(n_modes, omega, n_quad)
    lam = (np.arange(1, n_modes + 1) * math.pi) ** 2
    A = np.diag(-lam)
    modes_omega = _dirichlet_modes(n_modes, x_omega)
    B = modes_omega * np.sqrt(w_omega)[None, :]
    modes_full = _dirichlet_modes(n_modes, x_full)
    system = LinearSystem(
        A=A,
        B=B,
        name=f"heat1d(n_modes={n_modes}, omega=({a}, {b}))",
        metadata={"family": "heat1d", "omega": (a, b), "eigenvalues": lam.tolist()},
    )
    descriptor = ModelDescriptor(
        family="heat1d",
        n_modes=n_modes,
        omega=(a, b),
        eigenvalues=lam,
        x_full=x_full,
        w_full=w_full,
        mask=mask,
        x_omega=x_omega,
        w_omega=w_omega,
        mode_values_full=modes_full,
        mode_values_omega=modes_omega,
        state_value_matrix=modes_full.T.copy(),
    )
    return system, descriptor


def make_wave1d(
    n_modes: int, omega=(0.3, 0.7), n_quad: int = 201
) -> tuple[LinearSystem, ModelDescriptor]:
    """Wave equation on (0, 1) in first-order energy-normalized modal form.

    Mode j contributes the skew block [[0, j pi], [-j pi, 0]]; the control
    acts on the velocity component with the same absorbed quadrature rows
    as the heat family.
    """
    a, b, x_full, w_full, mask, x_omega, w_omega = _quadratures(n_modes, omega, n_quad)
    lam = (np.arange(1, n_modes + 1) * math.pi) ** 2
    freqs = np.sqrt(lam)
    n = 2 * n_modes
    A = np.zeros((n, n))
    modes_omega = _dirichlet_modes(n_modes, x_omega)
    rows = modes_omega * np.sqrt(w_omega)[None, :]
    B = np.zeros((n, x_omega.shape[0]))
    for j in range(n_modes):
        A[2 * j, 2 * j + 1] = freqs[j]
        A[2 * j + 1, 2 * j] = -freqs[j]
        B[2 * j + 1, :] = rows[j]
    modes_full = _dirichlet_modes(n_modes, x_full)
    # displacement read-out: position coordinate 2j holds sqrt(lambda_j) a_j
    state_values = np.zeros((x_full.shape[0], n))
    for j in range(n_modes):
        state_values[:, 2 * j] = modes_full[j] / freqs[j]
    system = LinearSystem(
        A=A,
        B=B,
        name=f"wave1d(n_modes={n_modes}, omega=({a}, {b}))",
        metadata={"family": "wave1d", "omega": (a, b), "eigenvalues": lam.tolist()},
    )
    descriptor = ModelDescriptor(
        family="wave1d",
        n_modes=n_modes,
        omega=(a, b),
        eigenvalues=lam,
        x_full=x_full,
        w_full=w_full,
        mask=mask,
        x_omega=x_omega,
        w_omega=w_omega,
        mode_values_full=modes_full,
        mode_values_omega=modes_omega,
        state_value_matrix=state_values,
        extras={"frequencies": freqs},
    )
    return system, descriptor


def make_ode(A, B, name: str = "ode") -> LinearSystem:
    """Explicit finite-dimensional system; validation only."""
    return LinearSystem(A=A, B=B, name=name, metadata={"family": "ode"})


def exponential_profile_signal(
    grid: TimeGrid,
    rate: float,
    vector,
    support: tuple[float, float] | None = None,
) -> np.ndarray:
    """Signal with exact interval averages of exp(rate * t) * vector.

    With a support window (t0, t1), intervals not fully inside the window
    are zeroed (window ends should be grid-aligned for a sharp cutoff).
    """
    vector = np.asarray(vector, dtype=float).reshape(-1)
    N = grid.n_steps
    dt = grid.dt
    t_left = np.arange(N) * dt
    if rate == 0.0:
        profile = np.ones(N)
    else:
        profile = np.exp(rate * t_left) * (np.expm1(rate * dt) / (rate * dt))
    if support is not None:
        t0, t1 = float(support[0]), float(support[1])
        tol = 1e-9 * max(1.0, grid.horizon)
        keep = (t_left >= t0 - tol) & (t_left + dt <= t1 + tol)
        profile = np.where(keep, profile, 0.0)
    return profile[:, None] * vector[None, :]
