"""Orthogonal matrices and Givens rotations.

Indices are zero-based throughout: a rotation acts on columns ``i < j`` of a
matrix with at least ``j + 1`` columns.

Sign convention: right-multiplying by ``G(i, j, theta)`` maps

    new_i =  cos(theta) * old_i + sin(theta) * old_j
    new_j = -sin(theta) * old_i + cos(theta) * old_j

so ``dense_givens(i, j, theta, d) == expm(-theta * H_ij)`` with
``H_ij = e_i e_j^T - e_j e_i^T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidCoordinateError, InvalidDimensionError, OrthogonalityError, ShapeError
from .flops import FlopCounter

ORTHO_TOL = 1e-8


def wrap_angle(theta: float) -> float:
    """Map an angle into [-pi, pi); angles already inside are returned as is."""
    if -math.pi <= theta < math.pi:
        return theta
    t = math.fmod(theta + math.pi, 2.0 * math.pi)
    if t < 0.0:
        t += 2.0 * math.pi
    t -= math.pi
    # fmod rounding can land exactly on +pi
    return -math.pi if t >= math.pi else t


@dataclass(frozen=True)
class GivensRotation:
    i: int
    j: int
    theta: float

    def dense(self, d: int) -> np.ndarray:
        """Explicit d x d matrix; for tests and small problems only."""
        return dense_givens(self.i, self.j, self.theta, d)


def _check_pair(i: int, j: int, d: int) -> None:
    if not (0 <= i < j < d):
        raise InvalidCoordinateError(f"need 0 <= i < j < d, got i={i}, j={j}, d={d}")


def make_givens(i: int, j: int, theta: float, d: int) -> GivensRotation:
    _check_pair(i, j, d)
    return GivensRotation(int(i), int(j), wrap_angle(float(theta)))


def dense_givens(i: int, j: int, theta: float, d: int) -> np.ndarray:
    _check_pair(i, j, d)
    G = np.eye(d)
    c, s = math.cos(theta), math.sin(theta)
    G[i, i] = c
    G[j, j] = c
    G[j, i] = s
    G[i, j] = -s
    return G


def rotate_columns(M: np.ndarray, g: GivensRotation, fc: FlopCounter | None = None) -> np.ndarray:
    """In-place ``M <- M @ G(i, j, theta)``. Costs exactly 6 * rows flops."""
    if M.ndim != 2 or g.j >= M.shape[1]:
        raise ShapeError(f"rotation on columns ({g.i}, {g.j}) does not fit shape {M.shape}")
    c, s = math.cos(g.theta), math.sin(g.theta)
    xi = M[:, g.i].copy()
    xj = M[:, g.j]
    M[:, g.i] = c * xi + s * xj
    M[:, g.j] = c * xj - s * xi
    if fc is not None:
        fc.add(6 * M.shape[0])
    return M


def rotate_pair(M: np.ndarray, i: int, j: int, c: float, s: float) -> None:
    """Uncounted column rotation with precomputed cos/sin; hot-loop helper."""
    xi = M[:, i].copy()
    xj = M[:, j]
    M[:, i] = c * xi + s * xj
    M[:, j] = c * xj - s * xi


def orthogonality_defect(U) -> float:
    """Frobenius norm of U^T U - I."""
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {U.shape}")
    return float(np.linalg.norm(U.T @ U - np.eye(U.shape[0])))


def as_orthogonal(U, tol: float = ORTHO_TOL) -> np.ndarray:
    """Validate and return a float copy of an orthogonal matrix."""
    U = np.array(U, dtype=float)
    defect = orthogonality_defect(U)
    if not defect <= tol:
        raise OrthogonalityError(f"matrix is not orthogonal: ||U^T U - I||_F = {defect:.3e} > {tol:g}")
    return U


def random_orthogonal(d: int, seed) -> np.ndarray:
    """Haar-distributed orthogonal matrix from a sign-fixed QR factorization."""
    if d < 1:
        raise InvalidDimensionError(f"dimension must be positive, got {d}")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def pair_index(d: int) -> tuple[np.ndarray, np.ndarray]:
    """All pairs i < j in row-major order."""
    return np.triu_indices(d, k=1)


@dataclass
class SkewCoefficients:
    """Upper-triangle coefficients of a skew-symmetric matrix, in
    ``pair_index`` order."""

    dim: int
    values: np.ndarray

    def matrix(self) -> np.ndarray:
        W = np.zeros((self.dim, self.dim))
        iu, ju = pair_index(self.dim)
        W[iu, ju] = self.values
        W[ju, iu] = -self.values
        return W

    def norm2(self) -> float:
        return float(2.0 * np.sum(np.square(self.values)))

    def __iter__(self):
        iu, ju = pair_index(self.dim)
        return iter(zip(iu.tolist(), ju.tolist(), self.values.tolist()))
