"""Tensor-product finite-difference solver for -div(a grad u) = 1 on the unit box.

Homogeneous Dirichlet data, conservative flux-form second-order centered
differences with the coefficient evaluated analytically at cell
midpoints, per-dimension mesh sizes h_i = (1/3) * 2^(-alpha_i).  The
quantity of interest is a Gaussian-window local average of the solution,
discretized with the tensor trapezoidal rule on the solution's own grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import fft as sfft
from scipy.linalg import solveh_banded

from .random_field import FieldSpec, a_on_axes, mode_ordering

H0 = 1.0 / 3.0

RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    """Linear solve failed to reach the required residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


def validate_alpha(alpha: Sequence[int]) -> tuple[int, ...]:
    alpha = tuple(int(a) for a in alpha)
    if not alpha or any(a < 1 for a in alpha):
        raise ValueError(f"refinement levels must be positive integers, got {alpha}")
    return alpha


def mesh_sizes(alpha: Sequence[int]) -> tuple[float, ...]:
    """Per-dimension mesh sizes h_i = h_0 * 2^(-alpha_i) with h_0 = 1/3."""
    return tuple(H0 * 2.0 ** (-a) for a in validate_alpha(alpha))


def interior_counts(alpha: Sequence[int]) -> tuple[int, ...]:
    """Interior nodes per dimension: 1/h_i - 1 = 3 * 2^alpha_i - 1."""
    return tuple(3 * 2**a - 1 for a in validate_alpha(alpha))


def unknowns(alpha: Sequence[int]) -> int:
    """Total number of interior unknowns; the work unit of all cost accounting."""
    return math.prod(interior_counts(alpha))


def interior_axes(alpha: Sequence[int]) -> tuple[np.ndarray, ...]:
    return tuple(h * np.arange(1, n + 1)
                 for h, n in zip(mesh_sizes(alpha), interior_counts(alpha)))


@dataclass(frozen=True)
class QoISpec:
    """Gaussian observation window: width, center, and the fixed 10/(sigma sqrt(2 pi))^d scale."""

    sigma: float = 0.2
    x0: tuple[float, ...] = (0.3,)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("window width must be positive")
        if any(not 0.0 < c < 1.0 for c in self.x0):
            raise ValueError("window center must be interior to the unit box")

    @property
    def d(self) -> int:
        return len(self.x0)

    @property
    def scale(self) -> float:
        return 10.0 / (self.sigma * math.sqrt(2.0 * math.pi)) ** self.d


def default_qoi_spec(d: int) -> QoISpec:
    if d == 1:
        return QoISpec(0.2, (0.3,))
    if d == 3:
        return QoISpec(0.2, (0.3, 0.2, 0.6))
    raise ValueError(f"no default observation window for d = {d}")


@dataclass(frozen=True)
class DiscreteSolution:
    """Nodal values over the interior tensor grid at refinement ``alpha``."""

    alpha: tuple[int, ...]
    values: np.ndarray = field(repr=False)

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        return interior_axes(self.alpha)


def _staggered_coefficients(alpha, y, modes) -> list[np.ndarray]:
    """Coefficient a on the dim-i staggered grid (midpoints along i, nodes elsewhere)."""
    hs = mesh_sizes(alpha)
    counts = interior_counts(alpha)
    node_axes = interior_axes(alpha)
    staggered = []
    for i, (h, n) in enumerate(zip(hs, counts)):
        axes = list(node_axes)
        axes[i] = h * (np.arange(n + 1) + 0.5)
        staggered.append(a_on_axes(axes, y, modes))
    return staggered


def _solve_tridiagonal(a_half: np.ndarray, h: float) -> np.ndarray:
    n = len(a_half) - 1
    diag = (a_half[:-1] + a_half[1:]) / h**2
    upper = -a_half[1:-1] / h**2
    ab = np.zeros((2, n))
    ab[0, 1:] = upper
    ab[1, :] = diag
    return solveh_banded(ab, np.ones(n))


def _solve_constant_dst(alpha: Sequence[int]) -> np.ndarray:
    # a == 1 makes the operator separable; solve by sine-transform
    # diagonalization, a direct method.
    counts = interior_counts(alpha)
    hs = mesh_sizes(alpha)
    lams = [(2.0 - 2.0 * np.cos(np.pi * np.arange(1, n + 1) / (n + 1))) / h**2
            for n, h in zip(counts, hs)]
    denom = reduce_outer_sum(lams)
    rhs = np.ones(counts)
    coeffs = sfft.dstn(rhs, type=1)
    return sfft.idstn(coeffs / denom, type=1)


def reduce_outer_sum(vectors: list[np.ndarray]) -> np.ndarray:
    out = vectors[0]
    for v in vectors[1:]:
        out = out[..., None] + v
    return out


def _assemble_sparse(alpha, a_stag) -> tuple[sp.csr_matrix, np.ndarray]:
    counts = interior_counts(alpha)
    hs = mesh_sizes(alpha)
    total = math.prod(counts)
    index = np.arange(total).reshape(counts)
    diag = np.zeros(counts)
    rows, cols, vals = [], [], []
    for i, (h, n) in enumerate(zip(hs, counts)):
        a_i = a_stag[i]
        lo = np.take(a_i, np.arange(0, n), axis=i)
        hi = np.take(a_i, np.arange(1, n + 1), axis=i)
        diag += (lo + hi) / h**2
        mid = np.take(a_i, np.arange(1, n), axis=i) / h**2
        left = np.take(index, np.arange(0, n - 1), axis=i).ravel()
        right = np.take(index, np.arange(1, n), axis=i).ravel()
        coup = -mid.ravel()
        rows.extend((left, right))
        cols.extend((right, left))
        vals.extend((coup, coup))
    rows.append(np.arange(total))
    cols.append(np.arange(total))
    vals.append(diag.ravel())
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(total, total),
    )
    return matrix, diag.ravel()


def _solve_cg(matrix: sp.csr_matrix, diag: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    precond = spla.LinearOperator(matrix.shape, matvec=lambda v: v / diag)
    u, info = spla.cg(matrix, rhs, rtol=1e-12, atol=0.0, maxiter=100 * len(rhs), M=precond)
    residual = np.linalg.norm(rhs - matrix @ u) / np.linalg.norm(rhs)
    if info != 0 or residual > RESIDUAL_TOL:
        raise SolverError(
            f"conjugate-gradient solve did not converge (info={info})", residual=residual
        )
    return u


def solve(alpha: Sequence[int], y: Mapping[int, float], field_spec: FieldSpec) -> DiscreteSolution:
    """Solve the unit-forcing Dirichlet problem at refinement ``alpha`` and parameters ``y``.

    The flux-form system is solved directly when possible (tridiagonal
    in 1-D, sine-transform diagonalization for the constant-coefficient
    case in higher dimensions) and otherwise by diagonally
    preconditioned conjugate gradients; accepted solves have relative
    residual below 1e-10.
    """
    alpha = validate_alpha(alpha)
    if len(alpha) != field_spec.d:
        raise ValueError(f"alpha has {len(alpha)} components but the field is {field_spec.d}-dimensional")
    modes = mode_ordering(field_spec)
    active = {j: v for j, v in y.items() if v != 0.0}
    if not active:
        if len(alpha) == 1:
            h = mesh_sizes(alpha)[0]
            n = interior_counts(alpha)[0]
            values = _solve_tridiagonal(np.ones(n + 1), h)
        else:
            values = _solve_constant_dst(alpha)
        return DiscreteSolution(alpha, values.reshape(interior_counts(alpha)))
    a_stag = _staggered_coefficients(alpha, active, modes)
    if len(alpha) == 1:
        values = _solve_tridiagonal(a_stag[0], mesh_sizes(alpha)[0])
        return DiscreteSolution(alpha, values)
    matrix, diag = _assemble_sparse(alpha, a_stag)
    u = _solve_cg(matrix, diag, np.ones(matrix.shape[0]))
    return DiscreteSolution(alpha, u.reshape(interior_counts(alpha)))


def qoi(solution: DiscreteSolution, spec: QoISpec) -> float:
    """Gaussian-window average of the solution by the tensor trapezoidal rule.

    The solution extends by zero to the boundary, so interior nodes all
    carry the plain product-h weight.
    """
    axes = solution.axes
    if len(axes) != spec.d:
        raise ValueError(f"solution is {len(axes)}-dimensional but the window is {spec.d}-dimensional")
    gaussians = [np.exp(-((ax - c) ** 2) / (2.0 * spec.sigma**2)) for ax, c in zip(axes, spec.x0)]
    window = reduce(np.multiply.outer, gaussians)
    cell = math.prod(mesh_sizes(solution.alpha))
    return float(spec.scale * cell * np.sum(solution.values * window))


def solve_qoi(alpha, y, field_spec: FieldSpec, qoi_spec: QoISpec) -> float:
    """F^alpha(y): the observation functional of the discrete solution."""
    return qoi(solve(alpha, y, field_spec), qoi_spec)
