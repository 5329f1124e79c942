"""
Domain geometry, field storage and configuration for the coupled model.

This module holds the plain value types every other module works on:
the simulation configuration, the MAC (staggered) grid and the state of the
fields at one time level, together with grid construction and initial-state
assembly.

Array layout: the first index runs along x, the second along y.
    c, p  at cell centers      shape (nx, ny)
    u     at vertical faces    shape (nx + 1, ny)
    v     at horizontal faces  shape (nx, ny + 1)
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .exceptions import ConfigException

logger = logging.getLogger(__name__)

FieldSpec = Union[float, np.ndarray]


@dataclass(frozen=True)
class StepProfile:
    """
    Axis-aligned step initial concentration.

    The concentration is ``value`` in every cell whose center x lies in
    ``[x_lo, x_hi]`` (full height of the domain) and 0 elsewhere.

    Attributes:
        value (float): Concentration inside the strip (M0).
        x_lo (float): Left edge of the strip.
        x_hi (float): Right edge of the strip.
    """
    value: float
    x_lo: float
    x_hi: float


@dataclass(frozen=True, eq=False)
class SimConfig:
    """
    All physical and numerical parameters of one simulation.

    Defaults reproduce the decay setup on the 400 x 200 domain with the
    nondimensional coefficients K = mu_e = beta = 1, D = 0.005 and R = 1.

    Attributes:
        domain_extent (tuple[float, float]): (Lx, Ly) of the rectangle.
        resolution (tuple[int, int]): (nx, ny) cell counts.
        end_time (float): Final time T.
        dt (float): Requested step size (the cap in adaptive mode).
        dt_mode (str): "adaptive" (min of dt and the stable bound) or "fixed".
        permeability (float): K.
        forchheimer (float | np.ndarray): beta, constant or per cell.
        effective_viscosity (float): mu_e.
        diffusion (float): D.
        reaction_rate (float | np.ndarray): kappa, constant or per cell.
        viscosity_contrast (float): R in mu(c) = exp(R c).
        viscosity_truncation (float | None): Clamp level for the viscosity argument.
        forcing (tuple | np.ndarray | None): Body force f; None means zero,
            a pair is a constant vector, an array of shape (2, nx, ny) is per cell.
        initial_velocity (tuple): (u0x, u0y) constants or (u_faces, v_faces) arrays.
        initial_concentration (float | StepProfile | np.ndarray): c0.
    """
    domain_extent: tuple[float, float] = (400.0, 200.0)
    resolution: tuple[int, int] = (100, 50)
    end_time: float = 2000.0
    dt: float = 2.0
    dt_mode: str = "adaptive"
    permeability: float = 1.0
    forchheimer: FieldSpec = 1.0
    effective_viscosity: float = 1.0
    diffusion: float = 0.005
    reaction_rate: FieldSpec = 0.01
    viscosity_contrast: float = 1.0
    viscosity_truncation: Optional[float] = None
    forcing: Optional[Union[tuple[float, float], np.ndarray]] = None
    initial_velocity: tuple = (0.1, 0.0)
    initial_concentration: Union[float, StepProfile, np.ndarray] = field(
        default_factory=lambda: StepProfile(0.8, 50.0, 150.0)
    )

    @classmethod
    def decay_defaults(cls) -> "SimConfig":
        """Return the decay-scenario configuration (M0 = 0.8, kappa = 0.01)."""
        return cls()

    def replace(self, **changes: object) -> "SimConfig":
        """Return a copy with the given fields replaced, validated."""
        new = dataclasses.replace(self, **changes)  # type: ignore[arg-type]
        new.validate()
        return new

    def validate(self) -> None:
        """
        Check the configuration invariants.

        Raises:
            ConfigException: If any invariant is violated.
        """
        lx, ly = self.domain_extent
        nx, ny = self.resolution
        if not (lx > 0 and ly > 0):
            raise ConfigException(f"domain extents must be positive, got ({lx}, {ly})")
        if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
            raise ConfigException(f"resolution must be integers >= 2, got ({nx}, {ny})")
        if not self.end_time > 0:
            raise ConfigException(f"end time T must be positive, got {self.end_time}")
        if not self.dt > 0:
            raise ConfigException(f"dt must be positive, got {self.dt}")
        if self.dt_mode not in ("adaptive", "fixed"):
            raise ConfigException(f"dt_mode must be 'adaptive' or 'fixed', got {self.dt_mode!r}")
        if not self.permeability > 0:
            raise ConfigException(f"permeability K must be positive, got {self.permeability}")
        if not self.effective_viscosity > 0:
            raise ConfigException(f"mu_e must be positive, got {self.effective_viscosity}")
        if not self.diffusion > 0:
            raise ConfigException(f"diffusion D must be positive, got {self.diffusion}")
        if np.any(np.asarray(self.forchheimer) < 0) or not np.all(np.isfinite(self.forchheimer)):
            raise ConfigException("Forchheimer coefficient beta must be finite and >= 0 everywhere")
        kappa = np.asarray(self.reaction_rate, dtype=float)
        if not np.all(np.isfinite(kappa)) or np.min(kappa) <= 0:
            raise ConfigException("reaction rate kappa must satisfy 0 < kappa_1 <= kappa everywhere")
        if self.viscosity_truncation is not None and not self.viscosity_truncation > 0:
            raise ConfigException(
                f"viscosity truncation level must be positive, got {self.viscosity_truncation}"
            )
        c0 = self.initial_concentration
        if isinstance(c0, StepProfile) and not (0 <= c0.x_lo < c0.x_hi <= lx):
            raise ConfigException(
                f"step requires 0 <= x_lo < x_hi <= Lx, got [{c0.x_lo}, {c0.x_hi}] with Lx={lx}"
            )

    @property
    def kappa_min(self) -> float:
        """Lower reaction-rate bound kappa_1."""
        return float(np.min(self.reaction_rate))

    @property
    def kappa_max(self) -> float:
        """Upper reaction-rate bound kappa_2."""
        return float(np.max(self.reaction_rate))


@dataclass(frozen=True)
class StaggeredGrid:
    """
    Uniform MAC grid over the rectangle (0, Lx) x (0, Ly).

    Attributes:
        Lx (float): Domain length in x.
        Ly (float): Domain length in y.
        nx (int): Cell count in x.
        ny (int): Cell count in y.
    """
    Lx: float
    Ly: float
    nx: int
    ny: int

    @property
    def hx(self) -> float:
        """Cell width Lx / nx."""
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        """Cell height Ly / ny."""
        return self.Ly / self.ny

    @property
    def cell_measure(self) -> float:
        """Area hx * hy of one cell."""
        return self.hx * self.hy

    @property
    def area(self) -> float:
        """Measure of the domain |Omega| = Lx * Ly."""
        return self.Lx * self.Ly

    @property
    def cell_shape(self) -> tuple[int, int]:
        """Shape (nx, ny) of cell-centered fields."""
        return (self.nx, self.ny)

    @property
    def u_shape(self) -> tuple[int, int]:
        """Shape (nx + 1, ny) of u-face fields, wall faces included."""
        return (self.nx + 1, self.ny)

    @property
    def v_shape(self) -> tuple[int, int]:
        """Shape (nx, ny + 1) of v-face fields, wall faces included."""
        return (self.nx, self.ny + 1)

    @property
    def x_centers(self) -> np.ndarray:
        """Cell-center x coordinates, length nx."""
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def y_centers(self) -> np.ndarray:
        """Cell-center y coordinates, length ny."""
        return (np.arange(self.ny) + 0.5) * self.hy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (X, Y) coordinate arrays of shape (nx, ny)."""
        return np.meshgrid(self.x_centers, self.y_centers, indexing="ij")

    def u_face_measure(self) -> np.ndarray:
        """Control-volume measure of each u-face; wall faces own half a cell."""
        w = np.full(self.u_shape, self.cell_measure)
        w[0, :] *= 0.5
        w[-1, :] *= 0.5
        return w

    def v_face_measure(self) -> np.ndarray:
        """Control-volume measure of each v-face; wall faces own half a cell."""
        w = np.full(self.v_shape, self.cell_measure)
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
        return w


@dataclass
class State:
    """
    Velocity, pressure and concentration at one time level.

    Attributes:
        u (np.ndarray): Normal velocity on vertical faces, shape (nx + 1, ny).
        v (np.ndarray): Normal velocity on horizontal faces, shape (nx, ny + 1).
        p (np.ndarray): Cell-centered pressure (projection multiplier).
        c (np.ndarray): Cell-centered concentration.
        t (float): Current time.
    """
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    c: np.ndarray
    t: float = 0.0

    def copy(self) -> "State":
        return State(self.u.copy(), self.v.copy(), self.p.copy(), self.c.copy(), self.t)

    def is_finite(self) -> bool:
        """True when no array holds NaN or Inf."""
        return bool(
            np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.c))
        )


def build_grid(config: SimConfig) -> StaggeredGrid:
    """
    Build the staggered grid described by a configuration.

    Args:
        config (SimConfig): Configuration holding extents and resolution.

    Returns:
        StaggeredGrid: Grid with exact extents.

    Raises:
        ConfigException: If extents or resolutions are not positive (or the
            configuration is otherwise invalid).
    """
    config.validate()
    lx, ly = config.domain_extent
    nx, ny = config.resolution
    return StaggeredGrid(float(lx), float(ly), int(nx), int(ny))


def cell_field(spec: FieldSpec, grid: StaggeredGrid, name: str) -> np.ndarray:
    """
    Expand a constant-or-per-cell coefficient into a cell array.

    Raises:
        ConfigException: If an array spec does not have the cell shape.
    """
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.cell_shape, float(arr))
    if arr.shape != grid.cell_shape:
        raise ConfigException(f"{name} array has shape {arr.shape}, grid needs {grid.cell_shape}")
    return arr.copy()


def forcing_cells(config: SimConfig, grid: StaggeredGrid) -> tuple[np.ndarray, np.ndarray]:
    """Return the body force as two cell arrays (fx, fy)."""
    f = config.forcing
    if f is None:
        return np.zeros(grid.cell_shape), np.zeros(grid.cell_shape)
    arr = np.asarray(f, dtype=float)
    if arr.shape == (2,):
        return np.full(grid.cell_shape, arr[0]), np.full(grid.cell_shape, arr[1])
    if arr.shape != (2,) + grid.cell_shape:
        raise ConfigException(f"forcing array has shape {arr.shape}, grid needs {(2,) + grid.cell_shape}")
    return arr[0].copy(), arr[1].copy()


def _initial_concentration(config: SimConfig, grid: StaggeredGrid) -> np.ndarray:
    c0 = config.initial_concentration
    if isinstance(c0, StepProfile):
        x, _ = grid.cell_centers()
        # Membership by cell center keeps c0 in {0, M0} exactly.
        inside = (x >= c0.x_lo) & (x <= c0.x_hi)
        return np.where(inside, float(c0.value), 0.0)
    return cell_field(c0, grid, "initial concentration")


def init_state(config: SimConfig, grid: StaggeredGrid) -> State:
    """
    Assemble the initial state from a configuration.

    Face velocities come from u0 with all wall faces forced to zero
    (no-slip); the concentration from c0; pressure starts at zero.

    Args:
        config (SimConfig): Configuration the grid was built from.
        grid (StaggeredGrid): The grid.

    Returns:
        State: The state at t = 0.

    Raises:
        ConfigException: If a per-cell or per-face array does not match the grid.
    """
    u0x, u0y = config.initial_velocity
    u = np.asarray(u0x, dtype=float)
    v = np.asarray(u0y, dtype=float)
    if u.ndim == 0:
        u = np.full(grid.u_shape, float(u))
    elif u.shape != grid.u_shape:
        raise ConfigException(f"initial u array has shape {u.shape}, grid needs {grid.u_shape}")
    else:
        u = u.copy()
    if v.ndim == 0:
        v = np.full(grid.v_shape, float(v))
    elif v.shape != grid.v_shape:
        raise ConfigException(f"initial v array has shape {v.shape}, grid needs {grid.v_shape}")
    else:
        v = v.copy()
    apply_no_slip(u, v)

    c = _initial_concentration(config, grid)
    p = np.zeros(grid.cell_shape)
    logger.debug("initial state on %dx%d grid, max c0 = %g", grid.nx, grid.ny, float(np.max(c)))
    return State(u=u, v=v, p=p, c=c, t=0.0)


def apply_no_slip(u: np.ndarray, v: np.ndarray) -> None:
    """Zero the wall-normal velocity on all boundary faces, in place."""
    u[0, :] = 0.0
    u[-1, :] = 0.0
    v[:, 0] = 0.0
    v[:, -1] = 0.0
