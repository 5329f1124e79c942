"""
One time step of the convection-diffusion-reaction equation.

The concentration is advanced by first-order splitting:

    c' = c + dt (advect(c) + diffuse(c))      explicit, monotone under stable_dt
    c  = react(c', kappa, dt)                 exact logistic solution per cell

Convection is conservative donor-cell upwinding on the MAC face velocities,
diffusion the five-point Laplacian with mirrored (zero-flux) ghosts. The
reaction kappa c (c - 1) is integrated exactly, so a cell whose value exceeds
1 by enough blows up inside the step and is reported with its critical time.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import SimConfig, StaggeredGrid, State, cell_field
from .exceptions import BlowUpDetected, InstabilityException
from .linsolve import neumann_laplacian

logger = logging.getLogger(__name__)

CFL_SAFETY = 0.9
BLOWUP_CAP = 1e6


@dataclass(frozen=True, eq=False)
class TransportParams:
    """
    Transport coefficients on a grid, extracted from a SimConfig.

    Attributes:
        grid (StaggeredGrid): Grid the fields live on.
        D (float): Diffusion coefficient.
        kappa (np.ndarray): Reaction rate per cell.
        dt (float): Step size.
        mu_e (float): Brinkman viscosity, for the viscous step bound.
    """
    grid: StaggeredGrid
    D: float
    kappa: np.ndarray
    dt: float
    mu_e: float = 1.0

    @classmethod
    def from_config(cls, config: SimConfig, grid: StaggeredGrid, dt: float) -> "TransportParams":
        return cls(
            grid=grid,
            D=config.diffusion,
            kappa=cell_field(config.reaction_rate, grid, "kappa"),
            dt=dt,
            mu_e=config.effective_viscosity,
        )

    def with_dt(self, dt: float) -> "TransportParams":
        return TransportParams(self.grid, self.D, self.kappa, dt, self.mu_e)


def advect(c: np.ndarray, u: np.ndarray, v: np.ndarray, grid: StaggeredGrid) -> np.ndarray:
    """
    Conservative upwind approximation of -u . grad(c).

    Args:
        c (np.ndarray): Cell concentration.
        u (np.ndarray): u-face velocity, discretely divergence-free, zero on walls.
        v (np.ndarray): v-face velocity, zero on walls.
        grid (StaggeredGrid): The grid.

    Returns:
        np.ndarray: Cell rate of change; its measure-weighted sum is zero.
    """
    fx = np.zeros(grid.u_shape)
    fy = np.zeros(grid.v_shape)
    ui = u[1:-1, :]
    vi = v[:, 1:-1]
    fx[1:-1, :] = ui * np.where(ui > 0.0, c[:-1, :], c[1:, :])
    fy[:, 1:-1] = vi * np.where(vi > 0.0, c[:, :-1], c[:, 1:])
    return -(fx[1:, :] - fx[:-1, :]) / grid.hx - (fy[:, 1:] - fy[:, :-1]) / grid.hy


def diffuse(c: np.ndarray, D: float, grid: StaggeredGrid) -> np.ndarray:
    """
    Diffusion D lap_h c with zero normal gradient on the walls.

    Returns:
        np.ndarray: Cell rate of change; its measure-weighted sum is zero.
    """
    return D * neumann_laplacian(grid, c)


def react(c: np.ndarray, kappa: "np.ndarray | float", dt: float) -> np.ndarray:
    """
    Advance c' = kappa c (c - 1) over dt with the exact solution.

        c_new = c / (1 + (1 - c) (exp(kappa dt) - 1))

    Args:
        c (np.ndarray): Cell concentration.
        kappa (np.ndarray | float): Reaction rate, per cell or constant.
        dt (float): Step size.

    Returns:
        np.ndarray: Concentration after the step.

    Raises:
        BlowUpDetected: If the denominator is not positive in some cell. The
            cell with the earliest critical time (1/kappa) ln(c / (c - 1)) is
            reported, measured from the start of the step.
    """
    c = np.asarray(c, dtype=float)
    kappa_arr = np.broadcast_to(np.asarray(kappa, dtype=float), c.shape)
    growth = np.expm1(kappa_arr * dt)
    denominator = 1.0 + (1.0 - c) * growth
    blown = denominator <= 0.0
    if np.any(blown):
        t_star = np.full(c.shape, np.inf)
        t_star[blown] = np.log1p(1.0 / (c[blown] - 1.0)) / kappa_arr[blown]
        flat = int(np.argmin(t_star))
        cell = tuple(int(k) for k in np.unravel_index(flat, c.shape))
        raise BlowUpDetected(cell, float(t_star.flat[flat]))  # type: ignore[arg-type]
    return c / denominator


def transport_step(state: State, params: TransportParams) -> State:
    """
    Advance the concentration by one step and time by dt.

    Args:
        state (State): State whose velocity is already projected.
        params (TransportParams): Transport coefficients and step size.

    Returns:
        State: New state with updated c and t = state.t + dt.

    Raises:
        BlowUpDetected: With the absolute blow-up time, when a cell blows up
            within the step or exceeds the hard cap.
        InstabilityException: If the explicit update produces NaN or Inf.
    """
    grid, dt = params.grid, params.dt
    c = state.c + dt * (advect(state.c, state.u, state.v, grid) + diffuse(state.c, params.D, grid))
    if not np.all(np.isfinite(c)):
        raise InstabilityException("transport update produced non-finite concentration", dt)
    try:
        c = react(c, params.kappa, dt)
    except BlowUpDetected as e:
        raise BlowUpDetected(e.cell, e.t_local, state.t) from None

    peak = int(np.argmax(c))
    if c.flat[peak] > BLOWUP_CAP:
        cell = tuple(int(k) for k in np.unravel_index(peak, c.shape))
        value = float(c.flat[peak])
        t_local = dt + math.log1p(1.0 / (value - 1.0)) / float(params.kappa.flat[peak])
        raise BlowUpDetected(cell, t_local, state.t)  # type: ignore[arg-type]
    return State(u=state.u, v=state.v, p=state.p, c=c, t=state.t + dt)


def stable_dt(params: TransportParams, grid: StaggeredGrid, state: State) -> float:
    """
    Largest step keeping the explicit parts stable and monotone.

    Convection and diffusion act on the same explicit update, so their rates
    add up:

        0.9 / (a + 2 D (1/hx^2 + 1/hy^2))

    where a is the larger of max|u|/hx + max|v|/hy and the largest upwind
    outflow rate of a single cell. With a divergence-free velocity this keeps
    every coefficient of the update non-negative. The result never exceeds
    the separate bounds 0.9 / (max|u|/hx + max|v|/hy) and h_min^2 / (4 D).
    The Brinkman bound h_min^2 / (4 mu_e) is applied on its own, and the
    exactly integrated reaction adds no constraint.

    Returns:
        float: The bound (inf only if every term is unbounded).
    """
    u, v = state.u, state.v
    outflow = (
        (np.maximum(u[1:, :], 0.0) + np.maximum(-u[:-1, :], 0.0)) / grid.hx
        + (np.maximum(v[:, 1:], 0.0) + np.maximum(-v[:, :-1], 0.0)) / grid.hy
    )
    advection = max(
        float(np.max(np.abs(u))) / grid.hx + float(np.max(np.abs(v))) / grid.hy,
        float(np.max(outflow)),
    )
    rate = advection + 2.0 * params.D * (1.0 / grid.hx ** 2 + 1.0 / grid.hy ** 2)
    monotone = CFL_SAFETY / rate if rate > 0.0 else math.inf
    h2 = min(grid.hx, grid.hy) ** 2
    viscous = h2 / (4.0 * params.mu_e) if params.mu_e > 0.0 else math.inf
    return min(monotone, viscous)
