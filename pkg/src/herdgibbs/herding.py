"""Deterministic herded Gibbs sampling on binary factor graphs.

Each variable ``i`` owns one herding weight per conditioning state of its
Markov blanket.  A step visits the next variable in the scan order, emits
``x_i = 1`` iff that weight is strictly positive, and adds
``P(X_i=1 | blanket) - x_i`` to it.  Samples are the states at the end of
each full sweep.

Two keying modes are supported:

``full``
    one weight per (variable, blanket bit pattern); the pattern code is
    little-endian over the blanket in ascending variable order.
``shared``
    one weight per (variable, number of blanket variables equal to 1).  Only
    valid for models that declare ``sum_sufficient``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .pgm import Model, ModelError

FULL = "full"
SHARED = "shared"
MODES = (FULL, SHARED)


class WeightInitError(ValueError):
    pass


class InvariantViolation(AssertionError):
    pass


def herd_scalar(p, w0, T: int) -> tuple[np.ndarray, np.ndarray]:
    """Herd a single binary variable with target ``P(X=1) = p`` for ``T`` steps.

    ``p`` and ``w0`` broadcast against each other, so many independent
    chains can be run at once.  Returns ``(x, w_final)`` where ``x`` has
    shape ``broadcast_shape + (T,)`` and dtype uint8.

    >>> herd_scalar(0.75, 0.5, 8)[0].tolist()
    [1, 1, 0, 1, 1, 1, 0, 1]
    """
    T = int(T)
    if T < 1:
        raise ValueError("T must be at least 1")
    p, w = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(w0, dtype=float))
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p must lie in [0, 1]")
    w = w.copy()
    out = np.empty(p.shape + (T,), dtype=np.uint8)
    for t in range(T):
        fire = w > 0
        out[..., t] = fire
        w += p - fire
    if w.ndim == 0:
        return out, w[()]
    return out, w


@dataclass(frozen=True)
class WeightKey:
    variable: int
    code: int
    mode: str = FULL


# -- weight initialization rules ---------------------------------------------
# A rule is called as rule(key, p) on the first visit of a key and returns the
# starting weight, which must lie strictly inside (p - 1, p).


def midpoint_init(key: WeightKey, p: float) -> float:
    return p - 0.5


class ExplicitInit:
    """Start every key at the same constant ``c``."""

    def __init__(self, c: float):
        self.c = float(c)

    def __call__(self, key: WeightKey, p: float) -> float:
        return self.c

    def __repr__(self) -> str:
        return f"ExplicitInit({self.c!r})"


class OffsetInit:
    """Start at ``p - offset``; one offset for all keys puts them in phase."""

    def __init__(self, offset: float):
        if not 0.0 < offset < 1.0:
            raise WeightInitError("offset must lie in (0, 1)")
        self.offset = float(offset)

    def __call__(self, key: WeightKey, p: float) -> float:
        return p - self.offset


class TableInit:
    """Per-key starting weights, falling back to ``default`` for unlisted keys."""

    def __init__(self, table: dict[tuple[int, int], float], default=midpoint_init):
        self.table = dict(table)
        self.default = default

    def __call__(self, key: WeightKey, p: float) -> float:
        w = self.table.get((key.variable, key.code))
        return self.default(key, p) if w is None else float(w)


WeightInit = Callable[[WeightKey, float], float]


@dataclass
class SampleRecord:
    """End-of-sweep samples of a run.

    ``samples[k]`` is the assignment after sweep ``k + 1``.  ``states``
    (optional) holds every intermediate state, starting with the state the
    run began from, so ``states[k * N + i]`` is the state ``i`` steps into
    sweep ``k``.  ``weights`` (optional) holds snapshots of watched weight
    keys at the end of each sweep.
    """

    samples: np.ndarray
    scan_order: tuple[int, ...]
    model: Model | None = None
    states: np.ndarray | None = None
    weights: np.ndarray | None = None
    watch: tuple[WeightKey, ...] = ()

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def num_vars(self) -> int:
        return self.samples.shape[1]

    def state_codes(self) -> np.ndarray:
        """Little-endian integer code of every recorded sample."""
        bits = self.samples.astype(np.int64)
        return bits @ (np.int64(1) << np.arange(bits.shape[1], dtype=np.int64))


def _check_order(order: Sequence[int], n: int) -> tuple[int, ...]:
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"scan order {order} is not a permutation of range({n})")
    return order


class SamplerState:
    """Mutable ``(X, W)`` state of one herded Gibbs chain.

    Not thread-safe; run independent chains in independent states.
    """

    def __init__(
        self,
        model: Model,
        x0: Sequence[int],
        scan_order: Sequence[int] | None = None,
        mode: str = FULL,
        weight_init: WeightInit = midpoint_init,
        *,
        check_invariants: bool = False,
        trace: bool = False,
        compensated: bool = False,
        update_bias: float = 0.0,
    ):
        n = model.num_vars
        x = [int(v) for v in np.asarray(x0).ravel()]
        if len(x) != n:
            raise ModelError(f"initial state has length {len(x)}, model has {n} variables")
        if any(v not in (0, 1) for v in x):
            raise ModelError("initial state must be binary")
        if not model.in_support(x):
            raise ModelError("initial state is outside the support of the model")
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        if mode == SHARED and not model.sum_sufficient:
            raise ModelError("shared weights need a model declared sum-sufficient")

        self.model = model
        self.x = x
        self.scan_order = _check_order(range(n) if scan_order is None else scan_order, n)
        self.mode = mode
        self.weight_init = weight_init
        self.t = 0
        self.weights: dict[tuple[int, int], float] = {}
        self.conditionals: dict[tuple[int, int], float] = {}
        self.check_invariants = check_invariants
        self.violations: list[tuple[int, int, int, float, float]] = []
        self.trace: list[tuple[int, int, int, float, float, int]] | None = [] if trace else None
        self.compensated = compensated
        self._carry: dict[tuple[int, int], float] = {}
        # fault injection for the verify suite's mutation control only
        self.update_bias = float(update_bias)

    def blanket_code(self, i: int) -> int:
        x = self.x
        if self.mode == SHARED:
            return sum(x[j] for j in self.model.blanket(i))
        code = 0
        for k, j in enumerate(self.model.blanket(i)):
            if x[j]:
                code |= 1 << k
        return code

    def weight_key(self, i: int) -> WeightKey:
        return WeightKey(i, self.blanket_code(i), self.mode)

    def weight_table(self) -> dict[WeightKey, float]:
        return {WeightKey(i, c, self.mode): w for (i, c), w in self.weights.items()}

    def assignment(self) -> np.ndarray:
        return np.array(self.x, dtype=np.uint8)

    def step(self) -> int:
        """Advance one variable update; returns the value written."""
        n = self.model.num_vars
        i = self.scan_order[self.t % n]
        code = self.blanket_code(i)
        key = (i, code)
        p = self.model.conditional(i, self.x)
        w = self.weights.get(key)
        if w is None:
            w = float(self.weight_init(WeightKey(i, code, self.mode), p))
            if not p - 1.0 < w < p:
                raise WeightInitError(
                    f"initial weight {w} for variable {i}, blanket {code} is not inside ({p - 1}, {p})"
                )
        xi = 1 if w > 0.0 else 0
        delta = p - xi + self.update_bias
        if self.compensated:
            y = delta - self._carry.get(key, 0.0)
            w_new = w + y
            self._carry[key] = (w_new - w) - y
        else:
            w_new = w + delta
        self.weights[key] = w_new
        self.x[i] = xi
        self.t += 1
        if self.check_invariants:
            self.conditionals[key] = p
            if not p - 1.0 < w_new <= p:
                self.violations.append((self.t, i, code, w_new, p))
        if self.trace is not None:
            self.trace.append((self.t, i, code, w, p, xi))
        return xi


def init_state(
    model: Model,
    x0: Sequence[int],
    scan_order: Sequence[int] | None = None,
    mode: str = FULL,
    weight_init: WeightInit = midpoint_init,
    **options,
) -> SamplerState:
    """Create a herded Gibbs state; weights materialize lazily on first visit."""
    return SamplerState(model, x0, scan_order, mode, weight_init, **options)


def step(state: SamplerState) -> int:
    return state.step()


def weight_key(state: SamplerState, i: int) -> WeightKey:
    if not 0 <= i < state.model.num_vars:
        raise ModelError(f"variable {i} out of range")
    return state.weight_key(i)


def run(
    state: SamplerState,
    sweeps: int,
    *,
    record_steps: bool = False,
    watch: Iterable[WeightKey] = (),
) -> SampleRecord:
    """Run ``sweeps`` full sweeps and record the state after each one."""
    sweeps = int(sweeps)
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    n = state.model.num_vars
    if state.t % n:
        raise ValueError("run must start on a sweep boundary")
    watch = tuple(watch)
    samples = np.empty((sweeps, n), dtype=np.uint8)
    states = np.empty((sweeps * n + 1, n), dtype=np.uint8) if record_steps else None
    weights = np.full((sweeps, len(watch)), np.nan) if watch else None
    if states is not None:
        states[0] = state.x
    step_fn = state.step
    for k in range(sweeps):
        for s in range(n):
            step_fn()
            if states is not None:
                states[k * n + s + 1] = state.x
        samples[k] = state.x
        if weights is not None:
            for c, key in enumerate(watch):
                weights[k, c] = state.weights.get((key.variable, key.code), np.nan)
    return SampleRecord(samples, state.scan_order, state.model, states, weights, watch)


def herded_gibbs(
    model: Model,
    x0: Sequence[int],
    sweeps: int,
    scan_order: Sequence[int] | None = None,
    mode: str = FULL,
    weight_init: WeightInit = midpoint_init,
    **options,
) -> SampleRecord:
    """Convenience wrapper: fresh state, then :func:`run`."""
    record_steps = options.pop("record_steps", False)
    watch = options.pop("watch", ())
    state = SamplerState(model, x0, scan_order, mode, weight_init, **options)
    return run(state, sweeps, record_steps=record_steps, watch=watch)


def key_counting_violations(
    trace: Sequence[tuple[int, int, int, float, float, int]],
    windows: Iterable[int] = (10, 100, 1000),
) -> list[tuple[int, int, int, int, int, float]]:
    """Check the per-key window counting bound on a step trace.

    For every weight key and every run of ``M`` consecutive updates of that
    key, the number of ones emitted must lie in ``[M p - 1, M p + 1]``.
    Returns ``(variable, code, M, start, ones, p)`` for every failing window.
    """
    by_key: dict[tuple[int, int], tuple[list[int], float]] = {}
    for _, i, code, _, p, xi in trace:
        entry = by_key.get((i, code))
        if entry is None:
            entry = by_key[(i, code)] = ([], p)
        entry[0].append(xi)
    bad = []
    for (i, code), (xs, p) in by_key.items():
        csum = np.concatenate([[0], np.cumsum(xs)])
        for M in windows:
            if M > len(xs):
                continue
            ones = csum[M:] - csum[:-M]
            lo, hi = M * p - 1.0, M * p + 1.0
            for start in np.flatnonzero((ones < lo) | (ones > hi)):
                bad.append((i, code, M, int(start), int(ones[start]), p))
    return bad
