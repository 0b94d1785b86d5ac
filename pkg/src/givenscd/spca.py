"""Sparse PCA by Givens coordinate ascent.

Maximizes ``sum_ij max(|(A U)_ij| - gamma, 0)^2`` over orthogonal U (the
full case, U is n x n) while only ever storing ``AU = A @ U``. Loadings are
read off AU by soft-thresholding and column normalization.

Flop convention for one thresholded term ``max(|x| - gamma, 0)^2`` summed
into an accumulator: abs 0, subtract 1, square 1, accumulate 1. Forming a
rotated entry ``c*a + s*b`` costs 3, so one restricted-objective evaluation
costs 12 flops per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .descent import CoordinateObjective, DescentTrace, StoppingRule, coordinate_minimize, spawn_rngs
from .errors import DegeneratePenaltyError, ShapeError
from .flops import FlopCounter
from .manifold import as_orthogonal, random_orthogonal, rotate_columns, make_givens

NONZERO_TOL = 1e-12
G_FLOPS_PER_ROW = 12
OBJ_FLOPS_PER_ENTRY = 3


@dataclass
class SpcaState:
    AU: np.ndarray
    gamma: float

    @property
    def m(self) -> int:
        return self.AU.shape[1]


@dataclass
class SparseLoadings:
    Z: np.ndarray
    support: np.ndarray
    zero_columns: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.support.sum())


def check_data(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ShapeError(f"data matrix must be 2-D and non-empty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("data matrix has non-finite entries")
    return A


def spca_objective(state: SpcaState, fc: FlopCounter | None = None) -> float:
    excess = np.maximum(np.abs(state.AU) - state.gamma, 0.0)
    if fc is not None:
        fc.add(OBJ_FLOPS_PER_ENTRY * state.AU.size)
    return float(np.sum(excess * excess))


def _pair_value(AU, i, j, gamma, theta):
    """Thresholded energy of columns i, j after rotating by theta; theta may
    be an array."""
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta)[..., None]
    s = np.sin(theta)[..., None]
    a, b = AU[:, i], AU[:, j]
    ri = np.maximum(np.abs(c * a + s * b) - gamma, 0.0)
    rj = np.maximum(np.abs(c * b - s * a) - gamma, 0.0)
    return np.sum(ri * ri, axis=-1) + np.sum(rj * rj, axis=-1)


class SpcaObjective(CoordinateObjective):
    """Coordinate-ascent view of the penalized objective; the state is an
    :class:`SpcaState` built by :func:`init_spca_state`."""

    maximize = True

    def n_columns(self, state):
        return state.m

    def value(self, state):
        return spca_objective(state)

    def restrict(self, state, i, j, fc=None):
        AU, gamma = state.AU, state.gamma
        rows = AU.shape[0]

        def g(theta):
            if fc is not None:
                fc.add(G_FLOPS_PER_ROW * rows * np.size(theta))
            v = _pair_value(AU, i, j, gamma, theta)
            return v if np.ndim(v) else float(v)

        g.vectorized = True
        return g

    def apply(self, state, i, j, theta, fc=None):
        rotate_columns(state.AU, make_givens(i, j, theta, state.m), fc)


def init_spca_state(A, U0, gamma: float, fc: FlopCounter | None = None) -> SpcaState:
    """``AU = A @ U0``; the product is charged d*m*(2n-1) flops."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    A = check_data(A)
    U0 = as_orthogonal(U0)
    d, n = A.shape
    if U0.shape[0] != n:
        raise ShapeError(f"U0 must be {n}x{n}, got {U0.shape}")
    if fc is not None:
        fc.add(d * U0.shape[1] * (2 * n - 1))
    return SpcaState(A @ U0, float(gamma))


def spca_coordinate_g(state: SpcaState, i: int, j: int, fc: FlopCounter | None = None):
    """Minimization-form restriction: ``g(theta) = -(energy of columns i, j
    after rotating them by theta)``."""
    g = SpcaObjective().restrict(state, i, j, fc)

    def neg(theta):
        return -g(theta)

    neg.vectorized = True
    return neg


def spca_step(state: SpcaState, i: int, j: int, fc: FlopCounter | None = None) -> float:
    """One exact coordinate-ascent step on columns (i, j); returns theta."""
    obj = SpcaObjective()
    theta, _ = obj.optimize_pair(state, i, j, fc)
    obj.apply(state, i, j, theta, fc)
    return theta


def solve_for_z(AU, gamma: float) -> SparseLoadings:
    """Soft-threshold each column of AU at gamma and normalize it.

    Columns that threshold to zero stay zero and are flagged.
    """
    AU = np.asarray(AU, dtype=float)
    Z = np.sign(AU) * np.maximum(np.abs(AU) - gamma, 0.0)
    norms = np.linalg.norm(Z, axis=0)
    zero = norms == 0.0
    Z[:, ~zero] /= norms[~zero]
    support = np.count_nonzero(np.abs(Z) > NONZERO_TOL, axis=0)
    return SparseLoadings(Z, support, zero)


def degenerate_gamma(A) -> float:
    """Smallest gamma at which the objective vanishes for every orthogonal U
    (the largest row norm of A)."""
    return float(np.linalg.norm(A, axis=1).max())


def spca_full(
    A,
    gamma: float,
    U0=None,
    stop: StoppingRule | None = None,
    seed=0,
    fc: FlopCounter | None = None,
    record_every: int = 1,
    track_nnz: bool = True,
) -> tuple[SparseLoadings, DescentTrace, SpcaState]:
    """Sparse PCA with m = n components.

    ``U0`` defaults to a random orthogonal matrix drawn from ``seed``; pair
    sampling uses an independent stream spawned from the same seed.
    """
    A = check_data(A)
    limit = degenerate_gamma(A)
    if gamma >= limit:
        raise DegeneratePenaltyError(
            f"gamma={gamma:g} >= largest row norm {limit:g}: objective is identically zero"
        )
    n = A.shape[1]
    init_rng, pair_rng = spawn_rngs(seed)
    if U0 is None:
        U0 = random_orthogonal(n, init_rng)
    if stop is None:
        stop = default_stop(n)
    fc = fc if fc is not None else FlopCounter()
    state0 = init_spca_state(A, U0, gamma, fc)

    monitor = None
    if track_nnz:
        def monitor(state):
            return {"nnz": int(np.count_nonzero(np.abs(state.AU) > state.gamma))}

    state, trace = coordinate_minimize(
        SpcaObjective(), None, stop, fc=fc, rng=pair_rng, record_every=record_every, monitor=monitor, state=state0
    )
    return solve_for_z(state.AU, gamma), trace, state


def default_stop(m: int) -> StoppingRule:
    n_pairs = m * (m - 1) // 2
    return StoppingRule(max_iters=20 * max(n_pairs, 1), rel_tol=1e-10)


@dataclass
class AdjustedVariance:
    raw: float
    fraction: float
    rank: int


def adjusted_explained_variance(A, Z, rank_tol: float = 1e-10) -> AdjustedVariance:
    """Variance explained by possibly correlated components.

    The scores ``Y = A^T Z`` are QR-factored in column order; component j is
    credited only ``R_jj^2``, the part of its score not already explained by
    components before it. Directions with ``|R_jj| <= rank_tol * max|R_kk|``
    count as dependent and contribute nothing.
    """
    A = np.asarray(A, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if A.shape[0] != Z.shape[0]:
        raise ShapeError(f"A has {A.shape[0]} rows but Z has {Z.shape[0]}")
    if not np.any(Z):
        raise ValueError("Z is identically zero")
    Y = A.T @ Z
    R = np.linalg.qr(Y, mode="r")
    diag = np.abs(np.diag(R))
    keep = diag > rank_tol * diag.max()
    raw = float(np.sum(diag[keep] ** 2))
    total = float(np.sum(A * A))
    return AdjustedVariance(raw, raw / total if total > 0 else math.nan, int(keep.sum()))


def sparsity(Z) -> float:
    """Fraction of entries with magnitude above 1e-12."""
    Z = np.asarray(Z)
    if Z.size == 0:
        return 0.0
    return float(np.count_nonzero(np.abs(Z) > NONZERO_TOL)) / Z.size
