"""Spherical Gaussian mixtures from third-order moments.

Pipeline: empirical moments -> whitening -> orthogonal decomposition of the
whitened third moment -> un-whitened parameters -> MAP clustering, scored
by normalized mutual information against the true labels.

With common variance sigma^2, ``M2 = E[x x^T] - sigma^2 I`` and
``M3 = E[x x x] - sigma^2 sum_a (m1 e_a e_a + e_a m1 e_a + e_a e_a m1)``
equal ``sum_i w_i mu_i mu_i^T`` and ``sum_i w_i mu_i^(x3)``. After
whitening, ``T = M3(W, W, W)`` is orthogonally decomposable with factors
``sqrt(w_i) W^T mu_i`` and weights ``1 / sqrt(w_i)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import invwishart

from .descent import StoppingRule
from .errors import RankDeficiencyError, RecoveryError, ShapeError
from .flops import FlopCounter
from .tensor import Decomposition, symmetrize, tensor_decompose

WEIGHT_FLOOR = 1e-12


@dataclass
class GmmModel:
    weights: np.ndarray
    means: np.ndarray  # D x k, one column per component
    sigma2: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        if self.means.ndim != 2 or self.means.shape[1] != self.weights.shape[0]:
            raise ShapeError(f"means {self.means.shape} do not match {self.weights.shape[0]} weights")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[0]


@dataclass
class MomentEstimates:
    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    sigma2: float
    warnings: list = field(default_factory=list)


def sample_gmm(model: GmmModel, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw n points; returns (points n x D, labels)."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    labels = rng.choice(model.k, size=n, p=model.weights)
    noise = rng.standard_normal((n, model.dim))
    X = model.means.T[labels] + math.sqrt(model.sigma2) * noise
    return X, labels


def _third_moment(X: np.ndarray, chunk: int = 20000) -> np.ndarray:
    n, D = X.shape
    acc = np.zeros((D * D, D))
    for s in range(0, n, chunk):
        B = X[s:s + chunk]
        outer = (B[:, :, None] * B[:, None, :]).reshape(len(B), D * D)
        acc += outer.T @ B
    return acc.reshape(D, D, D) / n


def _spherical_correction(m1: np.ndarray) -> np.ndarray:
    D = m1.shape[0]
    I = np.eye(D)
    return (
        np.einsum("a,bc->abc", m1, I)
        + np.einsum("b,ac->abc", m1, I)
        + np.einsum("c,ab->abc", m1, I)
    )


def corrected_moments(m1, second, third) -> MomentEstimates:
    """Spherical-noise corrections applied to raw moments E[x], E[xx^T],
    E[x x x]; sigma^2 is the smallest eigenvalue of the covariance."""
    m1 = np.asarray(m1, dtype=float)
    second = np.asarray(second, dtype=float)
    D = m1.shape[0]
    cov = second - np.outer(m1, m1)
    cov = (cov + cov.T) / 2.0
    eigs = np.linalg.eigvalsh(cov)
    notes = []
    if eigs[0] < -1e-12 * max(1.0, abs(eigs[-1])):
        notes.append(f"covariance is not positive semidefinite (smallest eigenvalue {eigs[0]:.3e})")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    sigma2 = float(eigs[0])
    m2 = second - sigma2 * np.eye(D)
    m2 = (m2 + m2.T) / 2.0
    m3 = symmetrize(np.asarray(third, dtype=float) - sigma2 * _spherical_correction(m1))
    return MomentEstimates(m1, m2, m3, sigma2, notes)


def estimate_moments(X, k: int) -> MomentEstimates:
    X = np.asarray(X, dtype=float)
    n, D = X.shape
    if not (n > D >= k):
        raise ValueError(f"need n > D >= k, got n={n}, D={D}, k={k}")
    return corrected_moments(X.mean(axis=0), X.T @ X / n, _third_moment(X))


def population_raw_moments(model: GmmModel):
    """Exact E[x], E[x x^T], E[x x x] of a spherical mixture."""
    w, M, s2 = model.weights, model.means, model.sigma2
    m1 = M @ w
    second = (M * w) @ M.T + s2 * np.eye(model.dim)
    third = np.einsum("i,ai,bi,ci->abc", w, M, M, M) + s2 * _spherical_correction(m1)
    return m1, second, third


def population_moments(model: GmmModel) -> MomentEstimates:
    return corrected_moments(*population_raw_moments(model))


def whiten(m2, k: int, rel_tol: float = 1e-10) -> np.ndarray:
    """``W = U_k diag(eig_k)^(-1/2)`` so that ``W^T m2 W = I_k``."""
    m2 = np.asarray(m2, dtype=float)
    vals, vecs = np.linalg.eigh((m2 + m2.T) / 2.0)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    if k > len(vals):
        raise RankDeficiencyError(f"asked for {k} directions from a {len(vals)}x{len(vals)} matrix")
    floor = rel_tol * max(abs(vals[0]), 1e-300)
    if not vals[k - 1] > floor:
        raise RankDeficiencyError(
            f"second moment has fewer than {k} significant eigenvalues: "
            f"eigenvalue {k} is {vals[k - 1]:.3e} (largest {vals[0]:.3e})"
        )
    return vecs[:, :k] / np.sqrt(vals[:k])


def whiten_tensor(m3, W) -> np.ndarray:
    m3 = np.asarray(m3, dtype=float)
    W = np.asarray(W, dtype=float)
    if m3.shape[0] != W.shape[0]:
        raise ShapeError(f"tensor dimension {m3.shape[0]} does not match W rows {W.shape[0]}")
    return symmetrize(np.einsum("pqr,pa,qb,rc->abc", m3, W, W, W, optimize=True))


@dataclass
class Recovery:
    model: GmmModel
    raw_lambdas: np.ndarray


def recover_parameters(dec: Decomposition, W, sigma2: float, tol: float = 1e-8) -> Recovery:
    """Weights ``1 / lambda_i^2`` (projected onto the simplex) and means
    ``lambda_i B v_i`` with ``B = W (W^T W)^-1`` undoing the whitening."""
    lam = np.asarray(dec.lambdas, dtype=float)
    bad = np.flatnonzero(~(lam > tol))
    if bad.size:
        raise RecoveryError(f"components {bad.tolist()} have weight lambda <= {tol:g}")
    W = np.asarray(W, dtype=float)
    B = W @ np.linalg.inv(W.T @ W)
    means = B @ (dec.V * lam)
    w = np.maximum(1.0 / lam ** 2, WEIGHT_FLOOR)
    w = w / w.sum()
    return Recovery(GmmModel(w, means, float(sigma2)), lam)


def cluster_assign(X, model: GmmModel) -> np.ndarray:
    """MAP component under the model; ties go to the lowest index."""
    X = np.asarray(X, dtype=float)
    sq = (
        np.sum(X * X, axis=1)[:, None]
        - 2.0 * X @ model.means
        + np.sum(model.means * model.means, axis=0)[None, :]
    )
    score = np.log(model.weights)[None, :] - sq / (2.0 * model.sigma2)
    return np.argmax(score, axis=1)


def nmi(labels_a, labels_b) -> float:
    """Normalized mutual information, arithmetic-mean normalization.

    Two single-cluster partitions score 1.0.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"label arrays must be 1-D of equal length, got {a.shape} and {b.shape}")
    n = a.shape[0]
    if n == 0:
        raise ValueError("empty labelings")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    pab = table / n
    pa = table.sum(axis=1) / n  # integer counts, so exact in either orientation
    pb = table.sum(axis=0) / n
    # fsum is correctly rounded, so the result does not depend on term order
    # and nmi(a, b) == nmi(b, a) holds exactly
    ha = -math.fsum(pa * np.log(pa))
    hb = -math.fsum(pb * np.log(pb))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    nz = pab > 0
    mi = math.fsum(pab[nz] * np.log(pab[nz] / np.outer(pa, pb)[nz]))
    return float(min(max(mi / ((ha + hb) / 2.0), 0.0), 1.0))


@dataclass
class PipelineResult:
    recovery: Recovery
    moments: MomentEstimates
    decomposition: Decomposition
    flops: int


def fit_from_moments(
    moments: MomentEstimates, k: int, seed=0, mode: str = "accelerated", stop: StoppingRule | None = None
) -> PipelineResult:
    W = whiten(moments.m2, k)
    T = whiten_tensor(moments.m3, W)
    fc = FlopCounter()
    dec, _, _ = tensor_decompose(T, seed=seed, mode=mode, stop=stop, fc=fc)
    return PipelineResult(recover_parameters(dec, W, moments.sigma2), moments, dec, fc.count)


def fit_gmm(X, k: int, seed=0, mode: str = "accelerated") -> PipelineResult:
    return fit_from_moments(estimate_moments(X, k), k, seed=seed, mode=mode)


def separated_model(D: int, k: int, seed, separation: float = 5.0, sigma2: float = 1.0) -> GmmModel:
    """Random model with means along orthonormal directions, pairwise at
    least ``separation * sigma`` apart, and weights drawn from U(0.05, 1)
    before normalization."""
    if k > D:
        raise ValueError(f"need k <= D, got k={k}, D={D}")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((D, k)))
    radius = separation * math.sqrt(sigma2) / math.sqrt(2.0)
    means = radius * Q * rng.uniform(1.0, 1.5, size=k)
    w = rng.uniform(0.05, 1.0, size=k)
    return GmmModel(w / w.sum(), means, sigma2)


def invwishart_model(D: int, k: int, seed, sigma2: float = 2.0) -> GmmModel:
    """Centers from N(0, S) with S ~ inverse-Wishart(D + 2, I); equal weights."""
    rng = np.random.default_rng(seed)
    S = np.atleast_2d(invwishart.rvs(df=D + 2, scale=np.eye(D), random_state=rng))
    means = rng.multivariate_normal(np.zeros(D), S, size=k).T
    return GmmModel(np.full(k, 1.0 / k), means, sigma2)
