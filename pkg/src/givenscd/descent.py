"""Random-coordinate minimization on the orthogonal group.

Each iteration samples a pair ``i < j`` uniformly, exactly optimizes the
objective along the geodesic ``theta -> U G(i, j, theta)`` and applies the
rotation. Objectives plug in by subclassing :class:`CoordinateObjective`.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ConfigurationError
from .flops import FlopCounter, NullCounter
from .linesearch import TIE_EPS, line_minimize_periodic
from .manifold import SkewCoefficients, as_orthogonal, make_givens, pair_index, rotate_columns, rotate_pair

FD_STEP = 1e-5
STATIONARY_DERIV = 1e-12


class CoordinateObjective:
    """Interface for objectives optimized one Givens angle at a time.

    ``state`` is whatever the objective caches (U itself, A @ U, a contracted
    tensor, ...). ``restrict(state, i, j)`` returns ``g(theta)`` equal to the
    objective at ``U G(i, j, theta)`` up to a theta-independent constant.
    With ``maximize = True`` the driver ascends instead of descending.
    """

    maximize = False
    line_tol = 1e-10

    def init_state(self, U0):
        raise NotImplementedError

    def n_columns(self, state) -> int:
        raise NotImplementedError

    def value(self, state) -> float:
        raise NotImplementedError

    def restrict(self, state, i: int, j: int, fc: FlopCounter | None = None) -> Callable:
        raise NotImplementedError

    def apply(self, state, i: int, j: int, theta: float, fc: FlopCounter | None = None) -> None:
        raise NotImplementedError

    def optimize_pair(self, state, i: int, j: int, fc: FlopCounter | None = None) -> tuple[float, float]:
        """Exact 1-D optimization; returns (theta, g(theta) - g(0))."""
        g = self.restrict(state, i, j, fc)
        if self.maximize:
            def h(theta, _g=g):
                return -_g(theta)
            h.vectorized = getattr(g, "vectorized", False)
            res = line_minimize_periodic(h, tol=self.line_tol)
            return res.theta, res.g0 - res.value
        res = line_minimize_periodic(g, tol=self.line_tol)
        return res.theta, res.value - res.g0

    def derivative(self, state, i: int, j: int) -> float:
        """d/dtheta g(theta) at 0, by central difference."""
        g = self.restrict(state, i, j, NullCounter())
        h = FD_STEP
        return (float(g(h)) - float(g(-h))) / (2.0 * h)

    def gradient(self, state) -> SkewCoefficients:
        d = self.n_columns(state)
        iu, ju = pair_index(d)
        vals = np.array([self.derivative(state, int(i), int(j)) for i, j in zip(iu, ju)])
        return SkewCoefficients(d, vals)


class GeodesicObjective(CoordinateObjective):
    """Wrap a plain function ``f(U)``; the state is U itself.

    Every restriction evaluation copies U, so this is meant for small
    problems and tests. ``eval_cost`` is the declared flop cost of one
    evaluation of ``f``.
    """

    def __init__(self, f: Callable[[np.ndarray], float], eval_cost: int = 0, maximize: bool = False):
        self.f = f
        self.eval_cost = eval_cost
        self.maximize = maximize

    def init_state(self, U0):
        return as_orthogonal(U0)

    def n_columns(self, state):
        return state.shape[1]

    def value(self, state):
        return float(self.f(state))

    def restrict(self, state, i, j, fc=None):
        def g(theta):
            V = state.copy()
            rotate_pair(V, i, j, math.cos(theta), math.sin(theta))
            if fc is not None:
                fc.add(6 * V.shape[0] + self.eval_cost)
            return float(self.f(V))
        return g

    def apply(self, state, i, j, theta, fc=None):
        rotate_columns(state, make_givens(i, j, theta, state.shape[1]), fc)


def directional_derivative(obj: CoordinateObjective, state, i: int, j: int) -> float:
    return obj.derivative(state, i, j)


def riemannian_gradient(obj: CoordinateObjective, state) -> SkewCoefficients:
    return obj.gradient(state)


@dataclass
class StoppingRule:
    """Stop on whichever criterion fires first.

    At least one of ``max_iters`` / ``max_flops`` is required. ``rel_tol``
    compares the objective across a window of ``window`` iterations
    (default: the number of pairs). ``grad_tol`` bounds the Riemannian
    gradient norm (not squared) and is checked every ``grad_every``
    iterations (default: the number of pairs).
    """

    max_iters: int | None = None
    max_flops: int | None = None
    rel_tol: float | None = None
    window: int | None = None
    grad_tol: float | None = None
    grad_every: int | None = None

    def validate(self) -> None:
        if self.max_iters is None and self.max_flops is None:
            raise ConfigurationError("stopping rule needs max_iters or max_flops; other criteria may never fire")
        for name in ("max_iters", "max_flops", "window", "grad_every"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigurationError(f"{name} must be non-negative, got {v}")
        for name in ("rel_tol", "grad_tol"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ConfigurationError(f"{name} must be non-negative, got {v}")


class PairSampler:
    """Uniform sampler over pairs ``i < j < d``."""

    def __init__(self, d: int, rng: np.random.Generator):
        if d < 2:
            raise ConfigurationError(f"need at least 2 columns to rotate, got {d}")
        self.d = d
        self.iu, self.ju = pair_index(d)
        self.n_pairs = len(self.iu)
        self.rng = rng

    def pair(self, k: int) -> tuple[int, int]:
        return int(self.iu[k]), int(self.ju[k])

    def sample_index(self) -> int:
        return int(self.rng.integers(self.n_pairs))

    def sample(self) -> tuple[int, int]:
        return self.pair(self.sample_index())

    def sample_from(self, candidates) -> int:
        return int(candidates[int(self.rng.integers(len(candidates)))])


def spawn_rngs(seed, n: int = 2) -> list[np.random.Generator]:
    """Independent generators for initialization and scheduling."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass
class DescentTrace:
    maximize: bool = False
    iteration: list = field(default_factory=list)
    i: list = field(default_factory=list)
    j: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    flops: list = field(default_factory=list)
    grad_norm2: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    stop_reason: str = ""
    final_value: float = float("nan")

    def record(self, t, i, j, theta, objective, flops, grad_norm2=float("nan"), **extra):
        self.iteration.append(t)
        self.i.append(i)
        self.j.append(j)
        self.theta.append(theta)
        self.objective.append(objective)
        self.flops.append(flops)
        self.grad_norm2.append(grad_norm2)
        for k, v in extra.items():
            self.extras.setdefault(k, []).append(v)

    def __len__(self):
        return len(self.iteration)

    def array(self, name: str) -> np.ndarray:
        if name in self.extras:
            return np.asarray(self.extras[name])
        return np.asarray(getattr(self, name))

    def is_monotone(self, rtol: float = 1e-12) -> bool:
        """Non-increasing (or non-decreasing when maximizing) up to
        ``rtol * max(1, |f|)``."""
        f = np.asarray(self.objective, dtype=float)
        if f.size < 2:
            return True
        step = np.diff(f) if self.maximize else -np.diff(f)
        slack = rtol * np.maximum(1.0, np.abs(f[1:]))
        return bool(np.all(step >= -slack))


def coordinate_minimize(
    obj: CoordinateObjective,
    U0,
    stop: StoppingRule,
    seed=None,
    fc: FlopCounter | None = None,
    rng: np.random.Generator | None = None,
    resample: bool = False,
    record_every: int = 1,
    monitor: Callable[[Any], dict] | None = None,
    state=None,
) -> tuple[Any, DescentTrace]:
    """Run random Givens coordinate optimization until ``stop`` fires.

    Returns the final objective state and its trace. With ``resample=True``
    a pair that is stationary and gives no improvement is excluded from
    resampling until some step improves; when every pair is excluded the
    run stops with reason ``"stationary"``. A prebuilt ``state`` replaces
    ``obj.init_state(U0)``.
    """
    stop.validate()
    if record_every < 1:
        raise ConfigurationError("record_every must be >= 1")
    fc = fc if fc is not None else FlopCounter()
    rng = rng if rng is not None else np.random.default_rng(seed)
    if state is None:
        state = obj.init_state(U0)
    sampler = PairSampler(obj.n_columns(state), rng)
    n_pairs = sampler.n_pairs
    sense = 1.0 if obj.maximize else -1.0  # improvement = sense * delta

    window = stop.window if stop.window is not None else n_pairs
    grad_every = stop.grad_every if stop.grad_every is not None else n_pairs
    track_grad = stop.grad_tol is not None

    trace = DescentTrace(maximize=obj.maximize)
    f = obj.value(state)
    history = deque([f], maxlen=window + 1)

    def grad_norm2():
        return obj.gradient(state).norm2()

    def extras():
        return monitor(state) if monitor is not None else {}

    g2 = grad_norm2() if track_grad else float("nan")
    trace.record(0, -1, -1, 0.0, f, fc.count, g2, **extras())
    if track_grad and math.sqrt(g2) <= stop.grad_tol:
        trace.stop_reason = "grad_tol"
        trace.final_value = obj.value(state)
        return state, trace

    excluded: set[int] = set()
    t = 0
    i, j, theta = -1, -1, 0.0
    reason = ""
    while True:
        if stop.max_iters is not None and t >= stop.max_iters:
            reason = "max_iters"
            break
        if stop.max_flops is not None and fc.count >= stop.max_flops:
            reason = "max_flops"
            break

        if resample and excluded:
            k = sampler.sample_from([p for p in range(n_pairs) if p not in excluded])
        else:
            k = sampler.sample_index()
        i, j = sampler.pair(k)
        theta, delta = obj.optimize_pair(state, i, j, fc)
        improved = sense * delta > TIE_EPS * max(1.0, abs(f))
        if resample and not improved and abs(obj.derivative(state, i, j)) <= STATIONARY_DERIV:
            excluded.add(k)
            theta, delta = 0.0, 0.0
        else:
            if improved:
                excluded.clear()
            obj.apply(state, i, j, theta, fc)
        f = f + delta
        t += 1
        history.append(f)

        g2 = float("nan")
        if track_grad and t % grad_every == 0:
            g2 = grad_norm2()
        if t % record_every == 0 or not math.isnan(g2):
            trace.record(t, i, j, theta, f, fc.count, g2, **extras())

        if track_grad and not math.isnan(g2) and math.sqrt(g2) <= stop.grad_tol:
            reason = "grad_tol"
            break
        if resample and len(excluded) == n_pairs:
            reason = "stationary"
            break
        if stop.rel_tol is not None and len(history) == window + 1:
            if abs(history[-1] - history[0]) <= stop.rel_tol * max(abs(history[-1]), 1e-300):
                reason = "rel_tol"
                break

    if trace.iteration[-1] != t:
        trace.record(t, i, j, theta, f, fc.count, float("nan"), **extras())
    trace.stop_reason = reason
    trace.final_value = obj.value(state)
    return state, trace
