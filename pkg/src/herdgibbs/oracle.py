"""Brute-force ground truth for small binary models.

Joint states are indexed little-endian (variable ``i`` is bit ``i``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .pgm import Model, ModelError

JOINT_CAP = 20
KERNEL_CAP = 12


class CapExceeded(ModelError):
    pass


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    n: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (2**self.n,):
            raise ValueError(f"expected {2 ** self.n} probabilities, got shape {probs.shape}")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", probs)

    def to_csv(self, path: str | Path) -> None:
        from .io import write_csv

        write_csv(path, ["state_index", "probability"], [(s, repr(float(p))) for s, p in enumerate(self.probs)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "ExactDistribution":
        from .io import read_csv

        rows = read_csv(path)
        probs = np.array([float(r["probability"]) for r in rows])
        n = int(round(math.log2(len(probs))))
        return cls(n, probs)


def all_states(n: int) -> np.ndarray:
    """``(2**n, n)`` uint8 array; row ``s`` is the little-endian bits of ``s``."""
    s = np.arange(2**n, dtype=np.int64)
    return ((s[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def log_joint_table(model: Model, cap: int = JOINT_CAP) -> np.ndarray:
    n = model.num_vars
    if n > cap:
        raise CapExceeded(f"{n} variables exceeds the enumeration cap of {cap}")
    states = all_states(n)
    logp = np.zeros(2**n)
    for f in model.factors:
        idx = np.zeros(2**n, dtype=np.int64)
        for k, v in enumerate(f.scope):
            idx |= states[:, v].astype(np.int64) << k
        with np.errstate(divide="ignore"):
            logp += np.log(f.table)[idx]
    return logp


def enumerate_joint(model: Model, cap: int = 16) -> ExactDistribution:
    """Normalized target distribution over all ``2**N`` states.

    ``cap`` defaults to 16 and may be raised up to the hard limit of 20.
    """
    cap = min(int(cap), JOINT_CAP)
    logp = log_joint_table(model, cap)
    m = logp.max()
    if not np.isfinite(m):
        raise ModelError("the model assigns zero mass to every state")
    p = np.exp(logp - m)
    return ExactDistribution(model.num_vars, p / p.sum())


def exact_marginals(d: ExactDistribution) -> np.ndarray:
    return all_states(d.n).T.astype(float) @ d.probs


def exact_conditional(d: ExactDistribution, i: int) -> np.ndarray:
    """``P(X_i = 1 | x_{-i})`` for every state ``x``; NaN where undefined."""
    s = np.arange(2**d.n)
    s0 = s & ~(1 << i)
    p0 = d.probs[s0]
    p1 = d.probs[s0 | (1 << i)]
    with np.errstate(invalid="ignore", divide="ignore"):
        return p1 / (p0 + p1)


def tv_distance(p: ExactDistribution | np.ndarray, q: ExactDistribution | np.ndarray) -> float:
    a = p.probs if isinstance(p, ExactDistribution) else np.asarray(p, dtype=float)
    b = q.probs if isinstance(q, ExactDistribution) else np.asarray(q, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


@dataclass(frozen=True, eq=False)
class SweepKernel:
    n: int
    matrix: np.ndarray
    order: tuple[int, ...]

    def apply(self, dist: np.ndarray) -> np.ndarray:
        """Row-vector product ``dist @ matrix``."""
        return np.asarray(dist, dtype=float) @ self.matrix


def site_conditionals(model: Model, i: int) -> np.ndarray:
    """``P(X_i = y_i | y_{-i})`` indexed by the target state ``y``.

    Zero-mass conditioning states keep the current value of ``X_i``; the
    caller handles that case (the entry here is NaN).
    """
    n = model.num_vars
    states = all_states(n)
    out = np.empty(2**n)
    for s in range(2**n):
        u0, u1 = model.unnormalized_pair(i, states[s])
        tot = u0 + u1
        if tot == 0.0:
            out[s] = np.nan
        else:
            out[s] = (u1 if states[s, i] else u0) / tot
    return out


def sweep_kernel(model: Model, order: Sequence[int] | None = None, cap: int = KERNEL_CAP) -> SweepKernel:
    """Transition matrix of one systematic-scan Gibbs sweep.

    Built as ``T_{order[0]} @ ... @ T_{order[-1]}``; each right factor is
    applied column-wise since ``T_i`` only mixes states differing in bit i.
    """
    n = model.num_vars
    if n > cap:
        raise CapExceeded(f"{n} variables exceeds the kernel cap of {cap}")
    order = tuple(range(n)) if order is None else tuple(int(i) for i in order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"{order} is not a permutation of range({n})")
    size = 2**n
    s = np.arange(size)
    mat = np.eye(size)
    for i in order:
        cond = site_conditionals(model, i)
        flip = s ^ (1 << i)
        undefined = np.isnan(cond)
        pair_sum = mat + mat[:, flip]
        new = pair_sum * np.where(undefined, 0.0, cond)
        if undefined.any():
            # identity on coordinate i where the blanket has no mass
            new[:, undefined] = mat[:, undefined]
        mat = new
    return SweepKernel(n, mat, order)


def dobrushin_coefficient(kernel: SweepKernel | np.ndarray) -> float:
    """Largest total-variation distance between two rows of the kernel."""
    m = kernel.matrix if isinstance(kernel, SweepKernel) else np.asarray(kernel, dtype=float)
    best = 0.0
    for a in range(m.shape[0] - 1):
        d = 0.5 * np.abs(m[a + 1 :] - m[a]).sum(axis=1)
        best = max(best, float(d.max()))
    return min(best, 1.0)


@dataclass(frozen=True)
class ConvergenceConstants:
    """Constants of the O(1/T) total-variation bound for herded Gibbs.

    Attributes:
        min_conditional: smallest nonzero single-site conditional probability.
        path_steps: steps needed to connect any two states (N for positive models).
        path_sweeps: ``ceil(path_steps / N)``.
        visit_rate: linear visiting rate ``min_conditional ** path_steps``.
        visit_offset: additive slack in the visiting-rate bound.
        dobrushin: Dobrushin coefficient of the Gibbs sweep kernel.
        rate: the constant ``2N(1+eta) / (visit_rate (1-eta))``.
        min_samples: sample size above which the bound applies, ``2 B / l``.
    """

    num_vars: int
    min_conditional: float
    path_steps: int
    path_sweeps: int
    visit_rate: float
    visit_offset: float
    dobrushin: float
    rate: float
    min_samples: float

    def burn_in(self, T: float) -> float:
        """Sweeps to discard before ``T`` samples: ``log_{2/(1+eta)}((1-eta) l T / 4N)``."""
        eta = self.dobrushin
        arg = (1.0 - eta) * self.visit_rate * T / (4.0 * self.num_vars)
        return math.log(arg) / math.log(2.0 / (1.0 + eta))

    def bound(self, T: float) -> float:
        return self.rate / T

    def no_burn_in_bound(self, T: float) -> float:
        """Bound when samples are collected from the first sweep on."""
        return (self.rate + max(self.burn_in(T), 0.0)) / T


def min_conditional(model: Model) -> float:
    """Smallest nonzero ``P(X_i = v | x_{-i})`` over all sites, states and values."""
    n = model.num_vars
    if n > JOINT_CAP:
        raise CapExceeded(f"{n} variables exceeds the enumeration cap of {JOINT_CAP}")
    best = math.inf
    for i in range(n):
        c = site_conditionals(model, i)
        c = c[np.isfinite(c) & (c > 0)]
        if c.size:
            best = min(best, float(c.min()))
    return best


def convergence_constants(model: Model, order: Sequence[int] | None = None) -> ConvergenceConstants:
    n = model.num_vars
    d = enumerate_joint(model, cap=KERNEL_CAP)
    if np.any(d.probs <= 0):
        raise ModelError("rate constants are only computed for strictly positive models")
    kernel = sweep_kernel(model, order)
    eta = dobrushin_coefficient(kernel)
    if eta >= 1.0:
        raise ModelError(f"Dobrushin coefficient {eta} is not below 1")
    pmin = min_conditional(model)
    t_star = n
    tau_star = math.ceil(t_star / n)
    l = pmin**t_star
    B = tau_star * l + sum(pmin**j * 2 ** min(n, j) for j in range(t_star))
    lam = 2.0 * n * (1.0 + eta) / (l * (1.0 - eta))
    return ConvergenceConstants(n, pmin, t_star, tau_star, l, B, eta, lam, 2.0 * B / l)
