"""Stochastic and variational baselines: systematic-scan Gibbs and mean field."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .herding import SampleRecord, _check_order
from .pgm import Model, ModelError
from .rng import Stream

_CHUNK = 1 << 16


@dataclass(frozen=True)
class GibbsConfig:
    seed: int
    sweeps: int
    scan_order: tuple[int, ...] | None = None
    anneal: tuple[float, float] | None = None

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be at least 1")
        if self.anneal is not None:
            t0, t1 = self.anneal
            if not (t0 > 0 and t1 > 0):
                raise ValueError("annealing temperatures must be positive")


def anneal_schedule(k: int, K: int, temp_start: float = 10.0, temp_end: float = 1.0) -> float:
    """Temperature at sweep ``k`` of ``K`` under linear interpolation."""
    if K < 2:
        raise ValueError("an annealing schedule needs K >= 2")
    if not 0 <= k < K:
        raise ValueError(f"sweep index {k} outside [0, {K})")
    if k == K - 1:
        return float(temp_end)
    return temp_start + (temp_end - temp_start) * k / (K - 1)


def tempered(p: float, beta: float) -> float:
    """``p**beta / (p**beta + (1-p)**beta)``."""
    if beta == 1.0 or p in (0.0, 1.0):
        return p
    # log-odds scaling is the same quantity without overflow
    lo = math.log(p) - math.log1p(-p)
    z = beta * lo
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def gibbs_run(model: Model, x0: Sequence[int], cfg: GibbsConfig, *, stream_id: int = 0) -> SampleRecord:
    """Systematic-scan Gibbs; ``X_i = 1`` iff the next uniform is below the conditional."""
    n = model.num_vars
    x = [int(v) for v in np.asarray(x0).ravel()]
    if len(x) != n:
        raise ModelError(f"initial state has length {len(x)}, model has {n} variables")
    if not model.in_support(x):
        raise ModelError("initial state is outside the support of the model")
    order = _check_order(range(n) if cfg.scan_order is None else cfg.scan_order, n)
    stream = Stream(cfg.seed, stream_id)
    samples = np.empty((cfg.sweeps, n), dtype=np.uint8)
    cond = model.conditional
    buf = stream.uniforms(min(_CHUNK, cfg.sweeps * n)).tolist()
    pos = 0
    for k in range(cfg.sweeps):
        beta = 1.0
        if cfg.anneal is not None:
            K = cfg.sweeps
            beta = 1.0 / (anneal_schedule(k, K, *cfg.anneal) if K >= 2 else cfg.anneal[1])
        for i in order:
            if pos == len(buf):
                buf = stream.uniforms(_CHUNK).tolist()
                pos = 0
            p = cond(i, x)
            if beta != 1.0:
                p = tempered(p, beta)
            x[i] = 1 if buf[pos] < p else 0
            pos += 1
        samples[k] = x
    return SampleRecord(samples, order, model)


@dataclass(frozen=True)
class MeanFieldConfig:
    damping: float = 1.0
    iterations: int = 30
    init: tuple[float, ...] | float = 0.5
    scan_order: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")


@dataclass
class MeanFieldResult:
    marginals: np.ndarray
    trajectory: np.ndarray  # row k: marginals after k sweeps, row 0 the init


def _log_tables(model: Model) -> list[np.ndarray]:
    out = []
    for f in model.factors:
        if not np.all(np.isfinite(f.log_table)):
            raise ModelError("mean field needs strictly positive factors")
        out.append(np.asarray(f.log_table))
    return out


def _expected_log_diff(model: Model, logs, incident, i: int, q: np.ndarray) -> float:
    """``E_Q[log u_1 - log u_0]`` over the factors touching ``i``."""
    total = 0.0
    for fidx, pos in incident[i]:
        f = model.factors[fidx]
        lt = logs[fidx]
        others = [(k, v) for k, v in enumerate(f.scope) if k != pos]
        bit = 1 << pos
        for combo in range(1 << len(others)):
            weight = 1.0
            idx = 0
            for b, (k, v) in enumerate(others):
                if (combo >> b) & 1:
                    weight *= q[v]
                    idx |= 1 << k
                else:
                    weight *= 1.0 - q[v]
            if weight:
                total += weight * (lt[idx | bit] - lt[idx])
    return total


def _incidence(model: Model) -> list[list[tuple[int, int]]]:
    inc: list[list[tuple[int, int]]] = [[] for _ in range(model.num_vars)]
    for fidx, f in enumerate(model.factors):
        for pos, v in enumerate(f.scope):
            inc[v].append((fidx, pos))
    return inc


def mean_field_run(model: Model, cfg: MeanFieldConfig) -> MeanFieldResult:
    """Damped coordinate ascent on a fully factorized Bernoulli approximation.

    Each coordinate moves to ``(1 - D) q_i + D sigmoid(E_Q[log u_1 - log u_0])``
    in scan order; ``D = 1`` is plain coordinate ascent.
    """
    n = model.num_vars
    logs = _log_tables(model)
    incident = _incidence(model)
    order = _check_order(range(n) if cfg.scan_order is None else cfg.scan_order, n)
    q = np.broadcast_to(np.asarray(cfg.init, dtype=float), (n,)).copy()
    if np.any((q < 0) | (q > 1)):
        raise ValueError("initial marginals must lie in [0, 1]")
    D = cfg.damping
    traj = np.empty((cfg.iterations + 1, n))
    traj[0] = q
    for it in range(cfg.iterations):
        for i in order:
            z = _expected_log_diff(model, logs, incident, i, q)
            target = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
            qi = (1.0 - D) * q[i] + D * target
            assert 0.0 <= qi <= 1.0
            q[i] = qi
        traj[it + 1] = q
    return MeanFieldResult(q.copy(), traj)


def mean_field_objective(model: Model, q: Sequence[float]) -> float:
    """Entropy of ``Q`` plus ``E_Q[log unnormalized joint]``; coordinate ascent never lowers it."""
    q = np.asarray(q, dtype=float)
    logs = _log_tables(model)
    ent = 0.0
    for qi in q:
        for v in (qi, 1.0 - qi):
            if v > 0:
                ent -= v * math.log(v)
    energy = 0.0
    for f, lt in zip(model.factors, logs):
        k = len(f.scope)
        for idx in range(1 << k):
            w = 1.0
            for b, v in enumerate(f.scope):
                w *= q[v] if (idx >> b) & 1 else 1.0 - q[v]
            if w:
                energy += w * lt[idx]
    return ent + energy
