"""Binary factor graphs and exact full conditionals.

Variables are indexed ``0..N-1`` and take values in ``{0, 1}``.  A factor
table over scope ``(v_0, ..., v_{k-1})`` is a flat vector of length ``2**k``
indexed little-endian: the variable at scope position ``k`` contributes bit
``k`` of the table index.  The same convention is used for joint states of a
whole model (variable ``i`` is bit ``i`` of the state index) and for the
serialized text format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class ModelError(ValueError):
    """Raised for malformed factors or models."""


class UndefinedConditionalError(ArithmeticError):
    """Both values of a variable have zero mass given its Markov blanket."""


@dataclass(frozen=True, eq=False, init=False)
class Factor:
    """A nonnegative table over an ordered scope of binary variables.

    ``log_table`` is kept alongside the table so that factors built in the
    log domain (the Ising likelihood terms, say) keep exact logs even when
    ``exp`` underflows.
    """

    scope: tuple[int, ...]
    table: np.ndarray
    log_table: np.ndarray = field(repr=False)

    def __init__(self, scope: Iterable[int], table: Sequence[float], log_table=None):
        scope = tuple(int(v) for v in scope)
        tab = np.array(table, dtype=float).ravel()
        if len(set(scope)) != len(scope):
            raise ModelError(f"repeated variable in scope {scope}")
        if tab.size != 2 ** len(scope):
            raise ModelError(
                f"table for scope of size {len(scope)} needs {2 ** len(scope)} entries, got {tab.size}"
            )
        if not np.all(np.isfinite(tab)):
            raise ModelError("table entries must be finite")
        if np.any(tab < 0):
            raise ModelError("table entries must be nonnegative")
        if not np.any(tab > 0):
            raise ModelError("table must have at least one positive entry")
        if log_table is None:
            with np.errstate(divide="ignore"):
                log_tab = np.log(tab)
        else:
            log_tab = np.array(log_table, dtype=float).ravel()
        tab.setflags(write=False)
        log_tab.setflags(write=False)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "table", tab)
        object.__setattr__(self, "log_table", log_tab)

    @classmethod
    def from_log(cls, scope: Iterable[int], log_table: Sequence[float]) -> "Factor":
        """Build a factor from log-potentials, shifting by the max before ``exp``."""
        log_tab = np.array(log_table, dtype=float).ravel()
        if not np.all(np.isfinite(log_tab)):
            raise ModelError("log table entries must be finite")
        return cls(scope, np.exp(log_tab - log_tab.max()), log_table=log_tab)

    def index(self, x: Sequence[int]) -> int:
        """Table index of the scope restricted from a full assignment ``x``."""
        idx = 0
        for k, v in enumerate(self.scope):
            if x[v]:
                idx |= 1 << k
        return idx

    def value(self, x: Sequence[int]) -> float:
        return float(self.table[self.index(x)])


class Model:
    """An immutable binary factor graph.

    The target distribution is the normalized product of the factor tables.
    ``sum_sufficient`` declares that, for every variable, the full
    conditional depends on the blanket only through the number of neighbors
    set to 1; the shared-weight herded sampler refuses models without it.
    """

    def __init__(self, num_vars: int, factors: Sequence[Factor], sum_sufficient: bool = False):
        num_vars = int(num_vars)
        if num_vars < 1:
            raise ModelError("a model needs at least one variable")
        factors = tuple(factors)
        if not factors:
            raise ModelError("a model needs at least one factor")
        touched = np.zeros(num_vars, dtype=bool)
        for f in factors:
            if not isinstance(f, Factor):
                raise ModelError(f"expected Factor, got {type(f).__name__}")
            for v in f.scope:
                if not 0 <= v < num_vars:
                    raise ModelError(f"scope index {v} out of range for {num_vars} variables")
                touched[v] = True
        if not touched.all():
            missing = np.flatnonzero(~touched).tolist()
            raise ModelError(f"variables {missing} appear in no factor")

        self._n = num_vars
        self._factors = factors
        self.sum_sufficient = bool(sum_sufficient)

        blankets: list[set[int]] = [set() for _ in range(num_vars)]
        incident: list[list[tuple[list[float], list[tuple[int, int]], int]]] = [
            [] for _ in range(num_vars)
        ]
        for f in factors:
            tab = f.table.tolist()
            for pos, v in enumerate(f.scope):
                others = [(u, k) for k, u in enumerate(f.scope) if u != v]
                blankets[v].update(u for u, _ in others)
                incident[v].append((tab, others, 1 << pos))
        self._blankets = tuple(tuple(sorted(b)) for b in blankets)
        self._incident = tuple(tuple(inc) for inc in incident)

    @property
    def num_vars(self) -> int:
        return self._n

    @property
    def factors(self) -> tuple[Factor, ...]:
        return self._factors

    def blanket(self, i: int) -> tuple[int, ...]:
        """Markov blanket of ``i`` in ascending index order."""
        return self._blankets[i]

    def unnormalized_pair(self, i: int, x: Sequence[int]) -> tuple[float, float]:
        """Products of the factors touching ``i`` with ``X_i`` set to 0 and 1."""
        u0 = 1.0
        u1 = 1.0
        for tab, others, bit in self._incident[i]:
            idx = 0
            for u, k in others:
                if x[u]:
                    idx |= 1 << k
            u0 *= tab[idx]
            u1 *= tab[idx | bit]
        return u0, u1

    def conditional(self, i: int, x: Sequence[int]) -> float:
        """``P(X_i = 1 | x_blanket)``; ``x[i]`` itself is ignored."""
        u0, u1 = self.unnormalized_pair(i, x)
        total = u0 + u1
        if total == 0.0:
            raise UndefinedConditionalError(
                f"variable {i} has zero mass for both values given its blanket"
            )
        return u1 / total

    def in_support(self, x: Sequence[int]) -> bool:
        if len(x) != self._n:
            raise ModelError(f"assignment has length {len(x)}, model has {self._n} variables")
        # entrywise test avoids underflow of the full product on large grids
        return all(f.table[f.index(x)] > 0 for f in self._factors)

    def log_unnormalized(self, x: Sequence[int]) -> float:
        return float(sum(f.log_table[f.index(x)] for f in self._factors))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(num_vars={self._n}, factors={len(self._factors)})"


def build_model(num_vars: int, factors: Sequence[Factor], sum_sufficient: bool = False) -> Model:
    return Model(num_vars, factors, sum_sufficient=sum_sufficient)


def _check_assignment(model: Model, x: Sequence[int]) -> None:
    if len(x) != model.num_vars:
        raise ModelError(f"assignment has length {len(x)}, model has {model.num_vars} variables")


def full_conditional(model: Model, i: int, x: Sequence[int]) -> float:
    """Probability that variable ``i`` is 1 given the rest of ``x``."""
    _check_assignment(model, x)
    if not 0 <= i < model.num_vars:
        raise ModelError(f"variable {i} out of range")
    return model.conditional(i, x)


def in_support(model: Model, x: Sequence[int]) -> bool:
    return model.in_support(x)


def make_two_var_model(eps: float) -> Model:
    """Two coupled variables with joint (00, 10, 01, 11) = (1/4-e, e, e, 3/4-e)."""
    if not 0.0 < eps < 0.25:
        raise ModelError(f"eps must lie in (0, 1/4), got {eps}")
    return Model(2, [Factor((0, 1), [0.25 - eps, eps, eps, 0.75 - eps])])


def make_independent_model(marginals: Sequence[float]) -> Model:
    """Empty graph: one unary factor ``[1 - p, p]`` per variable."""
    factors = []
    for i, p in enumerate(marginals):
        if not 0.0 <= p <= 1.0:
            raise ModelError(f"marginal {p} outside [0, 1]")
        factors.append(Factor((i,), [1.0 - p, p]))
    return Model(len(factors), factors)


def random_pairwise_model(
    num_vars: int, rng: np.random.Generator, edge_prob: float = 0.5, scale: float = 1.0
) -> Model:
    """Strictly positive random model with a unary factor per variable.

    Used by tests and the verify suite; the pairwise graph is Erdos-Renyi.
    """
    factors = [Factor((i,), np.exp(scale * rng.standard_normal(2))) for i in range(num_vars)]
    for i in range(num_vars):
        for j in range(i + 1, num_vars):
            if rng.random() < edge_prob:
                factors.append(Factor((i, j), np.exp(scale * rng.standard_normal(4))))
    return Model(num_vars, factors)


def state_index(x: Sequence[int]) -> int:
    """Little-endian integer code of a full assignment."""
    s = 0
    for k, v in enumerate(x):
        if v:
            s |= 1 << k
    return s


def index_state(s: int, n: int) -> list[int]:
    return [(s >> k) & 1 for k in range(n)]


# -- text serialization ------------------------------------------------------
#
#   vars N
#   [sum_sufficient]
#   factor k v_0 ... v_{k-1}
#   t_0 t_1 ... t_{2^k - 1}
#
# Table entries may wrap over several lines; '#' starts a comment.


def dumps_model(model: Model) -> str:
    lines = [f"vars {model.num_vars}"]
    if model.sum_sufficient:
        lines.append("sum_sufficient")
    for f in model.factors:
        lines.append(" ".join(["factor", str(len(f.scope)), *map(str, f.scope)]))
        lines.append(" ".join(repr(float(t)) for t in f.table))
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> Model:
    tokens: list[str] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0]
        tokens.extend(line.split())
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise ModelError("unexpected end of model text")
        tok = tokens[pos]
        pos += 1
        return tok

    try:
        if take() != "vars":
            raise ModelError("model text must start with 'vars N'")
        n = int(take())
        sum_sufficient = False
        factors = []
        while pos < len(tokens):
            kw = take()
            if kw == "sum_sufficient":
                sum_sufficient = True
            elif kw == "factor":
                k = int(take())
                scope = [int(take()) for _ in range(k)]
                table = [float(take()) for _ in range(2**k)]
                factors.append(Factor(scope, table))
            else:
                raise ModelError(f"unexpected token {kw!r}")
    except ValueError as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model text: {exc}") from exc
    return Model(n, factors, sum_sufficient=sum_sufficient)


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model))


def load_model(path: str | Path) -> Model:
    return loads_model(Path(path).read_text())


def logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)
