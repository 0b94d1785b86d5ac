"""Orthogonal decomposition of symmetric third-order tensors.

Maximizes ``f(U) = sum_i T(u_i, u_i, u_i)`` over orthogonal U by Givens
coordinate ascent. Along a coordinate pair the objective is a trigonometric
polynomial in theta, maximized in closed form.

Two ways to get the four contractions a step needs:

* ``naive``: contract T against u_i and u_j from scratch, O(d^3) per step.
* ``accelerated``: keep ``aux[a, b, c] = T(u_a, u_b, u_c)`` and rotate it
  along all three modes after each step, O(d^2) per step after an O(d^4)
  precomputation.

Flop conventions: a length-d dot product costs 2d - 1; a d x d x d tensor
times a vector costs d^2 (2d - 1); assembling the restricted coefficients
costs 10; the closed-form 1-D maximization is O(1) and not counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.polynomial import polyroots

from .descent import CoordinateObjective, DescentTrace, StoppingRule, coordinate_minimize, spawn_rngs
from .errors import ShapeError, SymmetryError
from .flops import FlopCounter
from .linesearch import TIE_EPS, golden_section
from .manifold import SkewCoefficients, as_orthogonal, make_givens, pair_index, random_orthogonal, rotate_columns

SYMMETRY_TOL = 1e-12
NULL_LAMBDA = 1e-10
COEFF_FLOPS = 10
_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))

# g'(theta) * (1 + t^2)^3 with t = tan(theta / 2), as a polynomial in t
# (lowest degree first); rows multiply c3, s3, c1, s1
_DERIV_BASIS = np.array(
    [
        [0.0, -6.0, 0.0, 12.0, 0.0, -6.0, 0.0],  # -6 t (1 - t^2)^2
        [0.0, 0.0, 12.0, 0.0, -12.0, 0.0, 0.0],  # 12 t^2 (1 - t^2)
        [0.0, -2.0, 0.0, -4.0, 0.0, -2.0, 0.0],  # -2 t (1 + t^2)^2
        [1.0, 0.0, 1.0, 0.0, -1.0, 0.0, -1.0],  # (1 - t^2) (1 + t^2)^2
    ]
)


def symmetrize(T) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    return sum(np.transpose(T, p) for p in _PERMS) / 6.0


def symmetry_defect(T) -> float:
    """Largest entrywise deviation from full index-permutation symmetry."""
    T = np.asarray(T, dtype=float)
    return float(max(np.max(np.abs(T - np.transpose(T, p))) for p in _PERMS[1:]))


def check_symmetric(T, tol: float = SYMMETRY_TOL) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim != 3 or not (T.shape[0] == T.shape[1] == T.shape[2]):
        raise ShapeError(f"expected a d x d x d tensor, got shape {T.shape}")
    defect = symmetry_defect(T)
    if defect > tol:
        raise SymmetryError(f"tensor is not symmetric: max deviation {defect:.3e} > {tol:g}")
    return T


def _tv_flops(d: int) -> int:
    return d * d * (2 * d - 1)


def trilinear(T, u, v, w, fc: FlopCounter | None = None) -> float:
    """``sum_abc T_abc u_a v_b w_c``."""
    T = np.asarray(T, dtype=float)
    d = T.shape[0]
    for x in (u, v, w):
        if np.shape(x) != (d,):
            raise ShapeError(f"vector of shape {np.shape(x)} does not match tensor dimension {d}")
    if fc is not None:
        fc.add((2 * d - 1) * (d * d + d + 1))
    return float(np.asarray(u) @ ((T @ np.asarray(w)) @ np.asarray(v)))


def tensor_objective(T, U, fc: FlopCounter | None = None) -> float:
    """``sum_i T(u_i, u_i, u_i)`` over the columns of U."""
    T = np.asarray(T, dtype=float)
    U = np.asarray(U, dtype=float)
    d = T.shape[0]
    if fc is not None:
        fc.add(U.shape[1] * (2 * d - 1) * (d * d + d + 1) + U.shape[1] - 1)
    return float(np.einsum("abc,ai,bi,ci->", T, U, U, U, optimize=True))


def full_contraction(T, U, fc: FlopCounter | None = None) -> np.ndarray:
    """``aux[a, b, c] = T(u_a, u_b, u_c)`` via three mode products."""
    T = np.asarray(T, dtype=float)
    d = T.shape[0]
    if fc is not None:
        fc.add(3 * d ** 3 * (2 * d - 1))
    X = np.tensordot(T, U, axes=([0], [0]))  # (b, c, a)
    X = np.tensordot(X, U, axes=([0], [0]))  # (c, a, b)
    X = np.tensordot(X, U, axes=([0], [0]))  # (a, b, c)
    return X


@dataclass
class RestrictedCoeffs:
    """``g(theta) = c3 cos^3 + s3 sin^3 + c1 cos + s1 sin``; adding
    ``constant`` gives the full objective at ``U G(i, j, theta)``."""

    c3: float
    s3: float
    c1: float
    s1: float
    constant: float = 0.0

    @classmethod
    def from_contractions(cls, t_iii, t_jjj, t_ijj, t_jii, constant=0.0):
        # t_ijj = T(u_i, u_j, u_j), t_jii = T(u_j, u_i, u_i)
        q3 = 3.0 * t_ijj
        p3 = 3.0 * t_jii
        return cls(
            c3=t_iii + t_jjj - q3 - p3,
            s3=t_jjj - t_iii + q3 - p3,
            c1=q3 + p3,
            s1=p3 - q3,
            constant=constant,
        )

    def scale(self) -> float:
        return abs(self.c3) + abs(self.s3) + abs(self.c1) + abs(self.s1)

    def g(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        return self.c3 * c ** 3 + self.s3 * s ** 3 + self.c1 * c + self.s1 * s

    def dg(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        return -3.0 * self.c3 * c * c * s + 3.0 * self.s3 * s * s * c - self.c1 * s + self.s1 * c

    def d2g(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        return (
            -3.0 * self.c3 * (c ** 3 - 2.0 * c * s * s)
            + 3.0 * self.s3 * (2.0 * s * c * c - s ** 3)
            - self.c1 * c
            - self.s1 * s
        )

    def value(self, theta):
        return self.g(theta) + self.constant


def _pair_contractions(T, U, i, j, fc=None):
    d = T.shape[0]
    ui, uj = U[:, i], U[:, j]
    Mi = T @ ui
    Mj = T @ uj
    if fc is not None:
        fc.add(2 * _tv_flops(d) + 4 * ((2 * d - 1) * d + 2 * d - 1))
    return (
        float(ui @ Mi @ ui),
        float(uj @ Mj @ uj),
        float(uj @ Mi @ uj),
        float(ui @ Mj @ ui),
    )


def contract_pair(T, U, i: int, j: int, fc: FlopCounter | None = None) -> RestrictedCoeffs:
    """Restricted-objective coefficients for columns (i, j) of U, from
    scratch. The constant term costs a further O(d^4) and is included."""
    T = np.asarray(T, dtype=float)
    U = np.asarray(U, dtype=float)
    d = U.shape[1]
    if not 0 <= i < j < d:
        raise ValueError(f"need 0 <= i < j < {d}, got ({i}, {j})")
    t_iii, t_jjj, t_ijj, t_jii = _pair_contractions(T, U, i, j, fc)
    others = [k for k in range(d) if k not in (i, j)]
    constant = tensor_objective(T, U[:, others], fc) if others else 0.0
    if fc is not None:
        fc.add(COEFF_FLOPS)
    return RestrictedCoeffs.from_contractions(t_iii, t_jjj, t_ijj, t_jii, constant)


def _polish(co: RestrictedCoeffs, theta: float, steps: int = 3) -> float:
    for _ in range(steps):
        h = co.d2g(theta)
        if h == 0.0:
            break
        delta = co.dg(theta) / h
        if not abs(delta) < 0.1:
            break
        theta -= delta
    return theta


@lru_cache(maxsize=8)
def _grid_basis(n_grid: int) -> tuple[np.ndarray, np.ndarray]:
    grid = -math.pi + (2.0 * math.pi / n_grid) * np.arange(n_grid)
    c, s = np.cos(grid), np.sin(grid)
    trig = np.array([c**3, s**3, c, s])
    grid.flags.writeable = False
    trig.flags.writeable = False
    return grid, trig


def maximize_g(co: RestrictedCoeffs, n_grid: int = 1024) -> float:
    """Global maximizer of the restricted objective over [-pi, pi).

    Critical points are the real roots of g' after the substitution
    t = tan(theta / 2) (a polynomial of degree <= 6, roots from companion
    eigenvalues), plus theta = -pi which the substitution misses. A dense
    grid guards against ill-conditioned roots. Ties go to the smallest
    |theta|.
    """
    scale = co.scale()
    if scale == 0.0:
        return 0.0
    coef = np.array([co.c3, co.s3, co.c1, co.s1]) @ _DERIV_BASIS
    # leading coefficients that are negligible relative to the rest would
    # send companion eigenvalues to infinity
    keep = np.flatnonzero(np.abs(coef) > 1e-14 * float(np.abs(coef).max()))
    coef = coef[: keep[-1] + 1] if keep.size else coef[:1]

    # fixed candidates first, then polished roots
    candidates = [0.0, -math.pi]
    if coef.size >= 2:
        try:
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                roots = polyroots(coef)
        except np.linalg.LinAlgError:
            roots = []  # the grid below still finds the maximum
        for r in roots:
            if np.isfinite(r) and abs(r.imag) <= 1e-6 * max(1.0, abs(r)):
                candidates.append(_polish(co, 2.0 * math.atan(r.real)))
    n_fixed = 2

    grid, trig = _grid_basis(n_grid)
    gv = np.array([co.c3, co.s3, co.c1, co.s1]) @ trig
    k = int(np.argmax(gv))
    tie = TIE_EPS * scale
    if gv[k] > float(co.g(np.array(candidates)).max()) + tie:
        h = 2.0 * math.pi / n_grid
        x, _, _ = golden_section(lambda th: -float(co.g(th)), grid[k] - h, grid[k] + h, 1e-12)
        candidates.append(_polish(co, x))

    cand = np.array([((c + math.pi) % (2.0 * math.pi)) - math.pi for c in candidates])
    vals = co.g(cand)
    tied = np.flatnonzero(vals >= vals.max() - tie)
    # Prefer stationary points over the fixed candidates: near convergence the
    # gain from a tiny step is below rounding of g, yet the step is real.
    roots = [m for m in tied if m >= n_fixed]
    pool = roots if roots else list(tied)
    best = min(pool, key=lambda m: (abs(cand[m]), cand[m]))
    return float(cand[best])


def accelerated_state_update(aux: np.ndarray, i: int, j: int, theta: float, fc: FlopCounter | None = None) -> np.ndarray:
    """Rotate ``aux`` in the (i, j) plane along each of its three modes, in
    place. Touches only entries with an index in {i, j}; 18 d^2 flops."""
    c, s = math.cos(theta), math.sin(theta)
    d = aux.shape[0]
    for axis in range(3):
        X = np.moveaxis(aux, axis, 0)
        xi = X[i].copy()
        xj = X[j]
        X[i] = c * xi + s * xj
        X[j] = c * xj - s * xi
    if fc is not None:
        fc.add(18 * d * d)
    return aux


@dataclass
class TensorState:
    U: np.ndarray
    aux: np.ndarray | None = None


class TensorObjective(CoordinateObjective):
    maximize = True

    def __init__(self, T, mode: str = "accelerated"):
        if mode not in ("naive", "accelerated"):
            raise ValueError(f"mode must be 'naive' or 'accelerated', got {mode!r}")
        self.T = check_symmetric(T)
        self.mode = mode

    def init_state(self, U0, fc: FlopCounter | None = None):
        U = as_orthogonal(U0)
        if U.shape[0] != self.T.shape[0]:
            raise ShapeError(f"U0 must be {self.T.shape[0]}x{self.T.shape[0]}, got {U.shape}")
        aux = full_contraction(self.T, U, fc) if self.mode == "accelerated" else None
        return TensorState(U, aux)

    def n_columns(self, state):
        return state.U.shape[1]

    def value(self, state):
        if state.aux is not None:
            return float(np.einsum("iii->", state.aux))
        return tensor_objective(self.T, state.U)

    def coeffs(self, state, i, j, fc=None) -> RestrictedCoeffs:
        if state.aux is not None:
            a = state.aux
            vals = (a[i, i, i], a[j, j, j], a[i, j, j], a[j, i, i])
        else:
            vals = _pair_contractions(self.T, state.U, i, j, fc)
        if fc is not None:
            fc.add(COEFF_FLOPS)
        return RestrictedCoeffs.from_contractions(*(float(v) for v in vals))

    def restrict(self, state, i, j, fc=None):
        return self.coeffs(state, i, j, fc).g

    def optimize_pair(self, state, i, j, fc=None):
        co = self.coeffs(state, i, j, fc)
        theta = maximize_g(co)
        return theta, float(co.g(theta) - co.g(0.0))

    def apply(self, state, i, j, theta, fc=None):
        rotate_columns(state.U, make_givens(i, j, theta, state.U.shape[1]), fc)
        if state.aux is not None:
            accelerated_state_update(state.aux, i, j, theta, fc)

    def derivative(self, state, i, j):
        return self.coeffs(state, i, j).s1

    def gradient(self, state) -> SkewCoefficients:
        aux = state.aux if state.aux is not None else full_contraction(self.T, state.U)
        d = aux.shape[0]
        idx = np.arange(d)
        # D[a, b] = T(u_a, u_b, u_b); entry (i, j) of the gradient is 3 (D[j, i] - D[i, j])
        D = aux[:, idx, idx]
        iu, ju = pair_index(d)
        return SkewCoefficients(d, 3.0 * (D[ju, iu] - D[iu, ju]))


@dataclass
class Decomposition:
    lambdas: np.ndarray
    V: np.ndarray
    null: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return synth_orthogonal_tensor(self.lambdas, self.V, check=False)


def synth_orthogonal_tensor(lambdas, V, check: bool = True) -> np.ndarray:
    """``sum_i lambda_i v_i (x) v_i (x) v_i``."""
    lambdas = np.asarray(lambdas, dtype=float)
    V = as_orthogonal(V) if check else np.asarray(V, dtype=float)
    if V.shape[1] != lambdas.shape[0]:
        raise ShapeError(f"{lambdas.shape[0]} weights for {V.shape[1]} factors")
    return np.einsum("i,ai,bi,ci->abc", lambdas, V, V, V, optimize=True)


def decomposition_residual(T, dec: Decomposition) -> float:
    return float(np.linalg.norm(np.asarray(T, dtype=float) - dec.reconstruct()))


def extract_decomposition(T, U) -> Decomposition:
    """Weights ``T(u_i, u_i, u_i)``, with factors negated where that value is
    negative; near-zero weights are reported as null directions."""
    V = np.array(U, dtype=float)
    lambdas = np.einsum("abc,ai,bi,ci->i", T, V, V, V, optimize=True)
    neg = lambdas < 0
    V[:, neg] *= -1.0
    lambdas = np.abs(lambdas)
    null = lambdas < NULL_LAMBDA
    return Decomposition(lambdas, V, null)


def default_stop(d: int) -> StoppingRule:
    return StoppingRule(max_iters=50 * d * d, grad_tol=1e-9)


def tensor_decompose(
    T,
    U0=None,
    stop: StoppingRule | None = None,
    seed=0,
    fc: FlopCounter | None = None,
    mode: str = "accelerated",
    record_every: int = 1,
) -> tuple[Decomposition, DescentTrace, TensorState]:
    """Decompose a symmetric tensor by Givens coordinate ascent.

    ``U0`` defaults to a random orthogonal matrix from ``seed``; pairs are
    drawn from an independent stream spawned from the same seed, so both
    modes see the same pair sequence.
    """
    T = check_symmetric(T)
    d = T.shape[0]
    init_rng, pair_rng = spawn_rngs(seed)
    if U0 is None:
        U0 = random_orthogonal(d, init_rng)
    if stop is None:
        stop = default_stop(d)
    fc = fc if fc is not None else FlopCounter()
    obj = TensorObjective(T, mode)
    if d < 2:
        state = obj.init_state(U0, fc)
        trace = DescentTrace(maximize=True)
        trace.record(0, -1, -1, 0.0, obj.value(state), fc.count)
        trace.final_value = trace.objective[0]
        trace.stop_reason = "trivial"
    else:
        state, trace = coordinate_minimize(
            obj, None, stop, fc=fc, rng=pair_rng, record_every=record_every, state=obj.init_state(U0, fc)
        )
    return extract_decomposition(T, state.U), trace, state
