"""Streaming sparse PCA with an m-column working buffer.

The buffer holds ``AU`` for the m samples currently in memory. Each round
runs L coordinate-ascent steps on it, then overwrites the column of least
l2 norm with the next sample from the stream (unrotated). Memory is
O(d * m) whatever the stream length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .descent import DescentTrace, PairSampler, spawn_rngs
from .errors import InsufficientDataError, ShapeError
from .flops import FlopCounter
from .manifold import as_orthogonal, random_orthogonal
from .spca import SparseLoadings, SpcaState, solve_for_z, spca_objective, spca_step


class SampleStream:
    """Pull-style stream of d-vectors. ``next()`` returns None once exhausted."""

    def __init__(self, vectors: Iterable, dim: int):
        self._it: Iterator = iter(vectors)
        self.dim = int(dim)
        self.position = 0
        self.exhausted = False

    def next(self) -> np.ndarray | None:
        if self.exhausted:
            return None
        try:
            v = next(self._it)
        except StopIteration:
            self.exhausted = True
            return None
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape[0] != self.dim:
            raise ShapeError(f"sample {self.position} has dimension {v.shape[0]}, expected {self.dim}")
        self.position += 1
        return v


def array_stream(A, epochs: int = 1) -> SampleStream:
    """Stream the columns of a d x n matrix, ``epochs`` times over."""
    A = np.asarray(A, dtype=float)

    def gen():
        for _ in range(epochs):
            for k in range(A.shape[1]):
                yield A[:, k]

    return SampleStream(gen(), A.shape[0])


@dataclass
class StreamState:
    AU: np.ndarray
    gamma: float
    L: int
    stream: SampleStream
    sampler: PairSampler | None
    consumed: int
    max_samples: int | None = None
    exhausted: bool = False
    rounds: int = 0
    steps: int = 0
    evicted: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.AU.shape[1]

    def spca_state(self) -> SpcaState:
        return SpcaState(self.AU, self.gamma)


def stream_init(
    stream: SampleStream,
    m: int,
    gamma: float,
    U0=None,
    L: int | None = None,
    seed=0,
    max_samples: int | None = None,
    fc: FlopCounter | None = None,
) -> StreamState:
    """Fill the buffer with the first m samples times U0.

    ``L`` defaults to m. ``U0`` defaults to a random orthogonal m x m matrix
    from ``seed``; pair sampling uses a second stream spawned from it, the
    same derivation as :func:`givenscd.spca.spca_full`.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    if max_samples is not None and max_samples < m:
        raise InsufficientDataError(f"sample budget {max_samples} is below the buffer size m={m}")
    init_rng, pair_rng = spawn_rngs(seed)
    cols = []
    for _ in range(m):
        v = stream.next()
        if v is None:
            raise InsufficientDataError(f"stream ended after {len(cols)} samples; need m={m}")
        cols.append(v)
    A0 = np.column_stack(cols)
    U0 = random_orthogonal(m, init_rng) if U0 is None else as_orthogonal(U0)
    if U0.shape != (m, m):
        raise ShapeError(f"U0 must be {m}x{m}, got {U0.shape}")
    if fc is not None:
        fc.add(stream.dim * m * (2 * m - 1))
    sampler = PairSampler(m, pair_rng) if m >= 2 else None
    return StreamState(
        AU=A0 @ U0,
        gamma=float(gamma),
        L=m if L is None else int(L),
        stream=stream,
        sampler=sampler,
        consumed=m,
        max_samples=max_samples,
    )


def stream_round(state: StreamState, fc: FlopCounter | None = None, trace: DescentTrace | None = None) -> StreamState:
    """L ascent steps on the buffer, then evict the least-norm column and
    admit the next sample. Sets ``state.exhausted`` when no sample is
    admitted (stream ended or budget spent)."""
    spca_state = state.spca_state()
    if state.sampler is not None:
        for _ in range(state.L):
            i, j = state.sampler.sample()
            theta = spca_step(spca_state, i, j, fc)
            state.steps += 1
            if trace is not None:
                trace.record(
                    state.steps, i, j, theta, spca_objective(spca_state), fc.count if fc else 0,
                    nnz=int(np.count_nonzero(np.abs(state.AU) > state.gamma)), samples=state.consumed,
                )
    state.rounds += 1

    if state.max_samples is not None and state.consumed >= state.max_samples:
        state.exhausted = True
        return state
    new = state.stream.next()
    if new is None:
        state.exhausted = True
        return state
    # argmin returns the lowest index among ties
    k = int(np.argmin(np.linalg.norm(state.AU, axis=0)))
    state.AU[:, k] = new
    state.consumed += 1
    state.evicted.append(k)
    return state


def stream_finalize(state: StreamState) -> SparseLoadings:
    return solve_for_z(state.AU, state.gamma)


def streaming_spca(
    stream: SampleStream,
    m: int,
    gamma: float,
    L: int | None = None,
    U0=None,
    seed=0,
    max_samples: int | None = None,
    fc: FlopCounter | None = None,
) -> tuple[SparseLoadings, DescentTrace, StreamState]:
    """Run rounds until the stream (or the sample budget) is used up."""
    fc = fc if fc is not None else FlopCounter()
    state = stream_init(stream, m, gamma, U0=U0, L=L, seed=seed, max_samples=max_samples, fc=fc)
    trace = DescentTrace(maximize=True)
    trace.record(
        0, -1, -1, 0.0, spca_objective(state.spca_state()), fc.count,
        nnz=int(np.count_nonzero(np.abs(state.AU) > state.gamma)), samples=state.consumed,
    )
    while not state.exhausted:
        stream_round(state, fc, trace)
    trace.stop_reason = "budget" if state.max_samples is not None and state.consumed >= state.max_samples else "exhausted"
    trace.final_value = spca_objective(state.spca_state())
    return stream_finalize(state), trace, state
