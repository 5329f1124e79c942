"""
One time step of the Darcy-Forchheimer-Brinkman momentum equation.

The step is a predictor followed by a pressure projection:

    u* = [u^n + dt (mu_e lap_h u^n + f)] / [1 + dt (mu(c)/K + beta |u^n|)]
    lap_h phi = div_h u* / dt,   u^{n+1} = u* - dt grad_h phi

Darcy and Forchheimer drag are implicit with the coefficient frozen at
|u^n| (a pointwise divide), the Brinkman term is explicit and no-slip walls
enter through odd ghost values. There is no convective (u . grad) u term.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import SimConfig, StaggeredGrid, State, apply_no_slip, cell_field, forcing_cells
from .exceptions import InstabilityException
from .linsolve import DEFAULT_TOL, poisson_neumann

logger = logging.getLogger(__name__)

# Below this divergence the projection solve is skipped.
DIVERGENCE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class MomentumParams:
    """
    Momentum coefficients on a grid, extracted from a SimConfig.

    Attributes:
        grid (StaggeredGrid): Grid the fields live on.
        K (float): Permeability.
        beta (np.ndarray): Forchheimer coefficient per cell.
        mu_e (float): Effective (Brinkman) viscosity.
        R (float): Viscosity contrast.
        truncation (float | None): Viscosity clamp level.
        fx (np.ndarray): Body force x-component per cell.
        fy (np.ndarray): Body force y-component per cell.
        dt (float): Step size.
    """
    grid: StaggeredGrid
    K: float
    beta: np.ndarray
    mu_e: float
    R: float
    truncation: Optional[float]
    fx: np.ndarray
    fy: np.ndarray
    dt: float

    @classmethod
    def from_config(cls, config: SimConfig, grid: StaggeredGrid, dt: float) -> "MomentumParams":
        fx, fy = forcing_cells(config, grid)
        return cls(
            grid=grid,
            K=config.permeability,
            beta=cell_field(config.forchheimer, grid, "beta"),
            mu_e=config.effective_viscosity,
            R=config.viscosity_contrast,
            truncation=config.viscosity_truncation,
            fx=fx,
            fy=fy,
            dt=dt,
        )

    def with_dt(self, dt: float) -> "MomentumParams":
        return MomentumParams(self.grid, self.K, self.beta, self.mu_e, self.R,
                              self.truncation, self.fx, self.fy, dt)


def viscosity(c: np.ndarray, R: float, truncation: Optional[float] = None) -> np.ndarray:
    """
    Concentration-dependent viscosity mu(c) = exp(R c).

    With a truncation level l the argument is clamped to [0, l] first.

    Args:
        c (np.ndarray): Concentration.
        R (float): Viscosity contrast.
        truncation (float | None): Clamp level l.

    Returns:
        np.ndarray: Strictly positive viscosity.
    """
    c = np.asarray(c, dtype=float)
    if truncation is not None:
        c = np.clip(c, 0.0, truncation)
    return np.exp(R * c)


def divergence(u: np.ndarray, v: np.ndarray, grid: StaggeredGrid) -> np.ndarray:
    """Discrete cell divergence of a face velocity."""
    return (u[1:, :] - u[:-1, :]) / grid.hx + (v[:, 1:] - v[:, :-1]) / grid.hy


def _laplacian_u(u: np.ndarray, grid: StaggeredGrid) -> np.ndarray:
    """Five-point Laplacian at interior u-faces, no-slip ghosts at y-walls."""
    lap_x = (u[2:, :] - 2.0 * u[1:-1, :] + u[:-2, :]) / grid.hx ** 2
    padded = np.concatenate([-u[1:-1, :1], u[1:-1, :], -u[1:-1, -1:]], axis=1)
    lap_y = (padded[:, 2:] - 2.0 * u[1:-1, :] + padded[:, :-2]) / grid.hy ** 2
    return lap_x + lap_y


def _laplacian_v(v: np.ndarray, grid: StaggeredGrid) -> np.ndarray:
    """Five-point Laplacian at interior v-faces, no-slip ghosts at x-walls."""
    lap_y = (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) / grid.hy ** 2
    padded = np.concatenate([-v[:1, 1:-1], v[:, 1:-1], -v[-1:, 1:-1]], axis=0)
    lap_x = (padded[2:, :] - 2.0 * v[:, 1:-1] + padded[:-2, :]) / grid.hx ** 2
    return lap_x + lap_y


def _x_face_average(a: np.ndarray) -> np.ndarray:
    """Two-cell average onto interior u-faces."""
    return 0.5 * (a[1:, :] + a[:-1, :])


def _y_face_average(a: np.ndarray) -> np.ndarray:
    """Two-cell average onto interior v-faces."""
    return 0.5 * (a[:, 1:] + a[:, :-1])


def face_speeds(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Local speed |u| at interior u-faces and interior v-faces.

    The tangential component is the average of the four neighbouring faces
    of the other family.
    """
    v_at_u = 0.25 * (v[:-1, :-1] + v[1:, :-1] + v[:-1, 1:] + v[1:, 1:])
    u_at_v = 0.25 * (u[:-1, :-1] + u[1:, :-1] + u[:-1, 1:] + u[1:, 1:])
    speed_u = np.sqrt(u[1:-1, :] ** 2 + v_at_u ** 2)
    speed_v = np.sqrt(v[:, 1:-1] ** 2 + u_at_v ** 2)
    return speed_u, speed_v


def predictor(state: State, params: MomentumParams) -> tuple[np.ndarray, np.ndarray]:
    """
    Predict face velocities with implicit drag and explicit viscosity.

    Args:
        state (State): Current state (u, v, c are read).
        params (MomentumParams): Momentum coefficients and step size.

    Returns:
        tuple[np.ndarray, np.ndarray]: (u*, v*) with wall faces at zero.

    Raises:
        InstabilityException: If the prediction contains NaN or Inf.
    """
    grid, dt = params.grid, params.dt
    u, v = state.u, state.v
    c_u, c_v = _x_face_average(state.c), _y_face_average(state.c)
    mu_u = viscosity(c_u, params.R, params.truncation)
    mu_v = viscosity(c_v, params.R, params.truncation)
    beta_u, beta_v = _x_face_average(params.beta), _y_face_average(params.beta)
    f_u, f_v = _x_face_average(params.fx), _y_face_average(params.fy)
    speed_u, speed_v = face_speeds(u, v)

    u_star = np.zeros_like(u)
    v_star = np.zeros_like(v)
    u_star[1:-1, :] = (
        (u[1:-1, :] + dt * (params.mu_e * _laplacian_u(u, grid) + f_u))
        / (1.0 + dt * (mu_u / params.K + beta_u * speed_u))
    )
    v_star[:, 1:-1] = (
        (v[:, 1:-1] + dt * (params.mu_e * _laplacian_v(v, grid) + f_v))
        / (1.0 + dt * (mu_v / params.K + beta_v * speed_v))
    )
    if not (np.all(np.isfinite(u_star)) and np.all(np.isfinite(v_star))):
        raise InstabilityException("momentum predictor produced non-finite velocity", dt)
    return u_star, v_star


def project(
    u_star: np.ndarray,
    v_star: np.ndarray,
    grid: StaggeredGrid,
    dt: float,
    tol: float = DEFAULT_TOL,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Project a predicted velocity onto the discretely divergence-free fields.

    Solves lap_h phi = div_h u* / dt with Neumann walls and subtracts
    dt grad_h phi on interior faces. The cell-wise divergence left over is at
    most 10 * tol * max|div_h u*| + 1e-12.

    Args:
        u_star (np.ndarray): Predicted u-face velocity (zero on walls).
        v_star (np.ndarray): Predicted v-face velocity (zero on walls).
        grid (StaggeredGrid): The grid.
        dt (float): Step size.
        tol (float): Target for the divergence reduction.

    Returns:
        tuple[np.ndarray, np.ndarray, np.ndarray]: (u, v, p) with p = phi.

    Raises:
        LinearSolverException: If the Poisson solve fails.
    """
    div = divergence(u_star, v_star, grid)
    if float(np.max(np.abs(div))) <= DIVERGENCE_FLOOR:
        return u_star.copy(), v_star.copy(), np.zeros(grid.cell_shape)

    # ||r||_inf <= ||r||_2, so scale the 2-norm target by the cell count.
    cg_tol = min(tol, 10.0 * tol / math.sqrt(grid.nx * grid.ny))
    phi = poisson_neumann(grid, div / dt, tol=cg_tol)
    u = u_star.copy()
    v = v_star.copy()
    u[1:-1, :] -= dt * (phi[1:, :] - phi[:-1, :]) / grid.hx
    v[:, 1:-1] -= dt * (phi[:, 1:] - phi[:, :-1]) / grid.hy
    apply_no_slip(u, v)
    return u, v, phi


def momentum_step(state: State, params: MomentumParams, tol: float = DEFAULT_TOL) -> State:
    """
    Advance the velocity by one step (predictor then projection).

    The returned state shares the concentration of the input and keeps its
    time; the caller advances time.
    """
    u_star, v_star = predictor(state, params)
    u, v, p = project(u_star, v_star, params.grid, params.dt, tol)
    return State(u=u, v=v, p=p, c=state.c, t=state.t)


def kinetic_energy(u: np.ndarray, v: np.ndarray, grid: StaggeredGrid) -> float:
    """
    Discrete kinetic energy 1/2 ||u||^2 over face control volumes.

    Args:
        u (np.ndarray): u-face velocity.
        v (np.ndarray): v-face velocity.
        grid (StaggeredGrid): The grid.

    Returns:
        float: Half the face-measure weighted sum of squares.
    """
    return 0.5 * float(np.sum(grid.u_face_measure() * u ** 2) + np.sum(grid.v_face_measure() * v ** 2))


def velocity_l2(u: np.ndarray, v: np.ndarray, grid: StaggeredGrid) -> float:
    """L2 norm of the face velocity, sqrt(2 * kinetic energy)."""
    return math.sqrt(2.0 * kinetic_energy(u, v, grid))
