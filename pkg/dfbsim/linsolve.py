"""
Matrix-free symmetric linear solves.

The pressure projection needs the pure-Neumann Poisson problem on cell
centers. The operator is applied stencil-wise (never assembled) and solved
with Jacobi-preconditioned conjugate gradients from ``scipy.sparse.linalg``.
Its null space (constants) is handled by removing the mean of the right-hand
side and of the returned solution.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator as ScipyLinearOperator
from scipy.sparse.linalg import cg

from .core import StaggeredGrid
from .exceptions import LinearSolverException, SolverConvergenceException

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
MAX_RESTARTS = 3


@dataclass(frozen=True)
class LinearOperator:
    """
    A linear map between cell fields, given as an application rule.

    Attributes:
        apply (Callable[[np.ndarray], np.ndarray]): Maps a cell field to a cell field.
        shape (tuple[int, int]): Cell-field shape the operator acts on.
        symmetric (bool): Whether the operator is declared symmetric.
        null_space (str): "none" or "constants".
        diagonal (np.ndarray | None): Operator diagonal, used for Jacobi preconditioning.
    """
    apply: Callable[[np.ndarray], np.ndarray]
    shape: tuple[int, int]
    symmetric: bool = True
    null_space: str = "none"
    diagonal: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.shape[0] * self.shape[1])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def as_scipy(self) -> ScipyLinearOperator:
        """Wrap as a flat-vector scipy operator."""
        def matvec(x: np.ndarray) -> np.ndarray:
            return self.apply(np.asarray(x).reshape(self.shape)).ravel()

        return ScipyLinearOperator((self.size, self.size), matvec=matvec, dtype=float)

    def jacobi(self) -> Optional[ScipyLinearOperator]:
        """Diagonal preconditioner, or None when no diagonal is known."""
        if self.diagonal is None:
            return None
        inv = 1.0 / self.diagonal.ravel()
        return ScipyLinearOperator((self.size, self.size),
                                   matvec=lambda r: inv * np.asarray(r).ravel(), dtype=float)


def identity_operator(shape: tuple[int, int]) -> LinearOperator:
    """The identity on cell fields of the given shape."""
    return LinearOperator(apply=lambda x: x.copy(), shape=shape, diagonal=np.ones(shape))


def cg_solve(
    op: LinearOperator,
    rhs: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: Optional[int] = None,
) -> np.ndarray:
    """
    Solve op(x) = rhs with preconditioned conjugate gradients.

    When the operator's null space is the constants, the mean of ``rhs`` is
    removed first and the returned solution has zero mean.

    Args:
        op (LinearOperator): Symmetric positive (semi-)definite operator.
        rhs (np.ndarray): Right-hand side cell field.
        tol (float): Relative residual target ||op(x) - rhs'|| <= tol * ||rhs'||.
        max_iter (int | None): Iteration cap, default 10 * number of cells.

    Returns:
        np.ndarray: The solution x.

    Raises:
        LinearSolverException: If rhs contains NaN or Inf.
        SolverConvergenceException: If the tolerance is not met within max_iter.
    """
    b = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(b)):
        raise LinearSolverException("right-hand side contains NaN or Inf")
    if op.null_space == "constants":
        b = b - b.mean()
    if max_iter is None:
        max_iter = 10 * op.size

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(op.shape)

    A = op.as_scipy()
    M = op.jacobi()
    iterations = 0

    def count(_: np.ndarray) -> None:
        nonlocal iterations
        iterations += 1

    x = np.zeros(op.size)
    residual = np.inf
    for _ in range(MAX_RESTARTS):
        remaining = max_iter - iterations
        if remaining <= 0:
            break
        x, info = cg(A, b.ravel(), x0=x, rtol=tol, atol=0.0, maxiter=remaining, M=M, callback=count)
        # The recurrence residual drifts at tight tolerances; check the true one.
        residual = float(np.linalg.norm(A.matvec(x) - b.ravel())) / b_norm
        if info < 0:
            raise LinearSolverException(f"CG breakdown (info={info})")
        if residual <= tol:
            break
    if residual > tol:
        raise SolverConvergenceException(iterations, residual)

    logger.debug("CG converged in %d iterations (relative residual %.2e)", iterations, residual)
    sol = x.reshape(op.shape)
    if op.null_space == "constants":
        sol = sol - sol.mean()
    return sol


def neumann_laplacian(grid: StaggeredGrid, phi: np.ndarray) -> np.ndarray:
    """
    Five-point Laplacian of a cell field with zero-flux walls.

    This is exactly div(grad(phi)) with the wall-face gradients set to zero,
    so that a projection built on it leaves a discretely divergence-free field.
    """
    gx = np.zeros(grid.u_shape)
    gy = np.zeros(grid.v_shape)
    gx[1:-1, :] = (phi[1:, :] - phi[:-1, :]) / grid.hx
    gy[:, 1:-1] = (phi[:, 1:] - phi[:, :-1]) / grid.hy
    return (gx[1:, :] - gx[:-1, :]) / grid.hx + (gy[:, 1:] - gy[:, :-1]) / grid.hy


def _neumann_diagonal(grid: StaggeredGrid) -> np.ndarray:
    """Diagonal of the negated Neumann Laplacian (positive)."""
    nbx = np.full(grid.cell_shape, 2.0)
    nbx[0, :] -= 1.0
    nbx[-1, :] -= 1.0
    nby = np.full(grid.cell_shape, 2.0)
    nby[:, 0] -= 1.0
    nby[:, -1] -= 1.0
    return nbx / grid.hx ** 2 + nby / grid.hy ** 2


def neumann_operator(grid: StaggeredGrid) -> LinearOperator:
    """The negated Neumann Laplacian, symmetric positive semi-definite."""
    return LinearOperator(
        apply=lambda phi: -neumann_laplacian(grid, phi),
        shape=grid.cell_shape,
        symmetric=True,
        null_space="constants",
        diagonal=_neumann_diagonal(grid),
    )


def poisson_neumann(grid: StaggeredGrid, rhs: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """
    Solve lap(phi) = rhs with homogeneous Neumann walls.

    The discrete compatibility condition is met by removing the mean of rhs;
    the returned phi has zero mean.

    Args:
        grid (StaggeredGrid): Grid the cell field lives on.
        rhs (np.ndarray): Cell-centered right-hand side.
        tol (float): Relative residual tolerance.

    Returns:
        np.ndarray: Mean-zero solution phi.

    Raises:
        LinearSolverException: As cg_solve.
    """
    return cg_solve(neumann_operator(grid), -np.asarray(rhs, dtype=float), tol=tol)
