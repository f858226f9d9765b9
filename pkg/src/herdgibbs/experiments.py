"""Experiment runners behind the command-line subcommands.

Every runner is deterministic given its arguments: stochastic baselines draw
from streams keyed by ``(seed, replicate)`` and replicate results are
gathered in replicate order, so the thread count never changes an output
byte.  Wall-clock timings go to the returned summary only, never to files.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from . import io as hio
from .baselines import GibbsConfig, gibbs_run
from .diagnostics import (
    MARGINAL,
    TV_JOINT,
    ErrorSeries,
    convergence_slope,
    error_series,
    powers_of_two,
    torus,
    upper_envelope,
    weight_discrepancy,
)
from .herding import OffsetInit, WeightKey, herded_gibbs
from .ising import binarize, denoise, make_problem, parse_method, spins_to_image, synthetic_image
from .oracle import ExactDistribution, convergence_constants, enumerate_joint
from .pgm import make_independent_model, make_two_var_model
from .pnm import read_pgm, write_pgm

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_GRID = powers_of_two(2**4, 2**14)
IRRATIONAL_MARGINALS = (math.sqrt(2.0) - 1.0, math.sqrt(3.0) - 1.0)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """``[fn(x) for x in items]``, optionally on a thread pool; order is preserved."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def first_below(series: ErrorSeries, level: float) -> int | None:
    """Smallest grid ``T`` from which the error envelope stays below ``level``."""
    env = upper_envelope(series.errors)
    idx = np.flatnonzero(env < level)
    return int(series.T[idx[0]]) if idx.size else None


def _slope_or_nan(series: ErrorSeries) -> float:
    try:
        return convergence_slope(series).slope
    except ValueError:
        return math.nan


# -- toy2 ---------------------------------------------------------------------


@dataclass
class Toy2Result:
    eps: float
    herded: dict[str, ErrorSeries]
    gibbs: list[dict[str, ErrorSeries]]
    slopes: dict[str, float]
    gibbs_slopes: dict[str, list[float]]
    constants: object
    reach: dict[str, object] = field(default_factory=dict)


def run_toy2_eps(
    eps: float, sweeps: int, replicates: int, seed: int, grid: Sequence[int], threads: int = 1
) -> Toy2Result:
    model = make_two_var_model(eps)
    oracle = enumerate_joint(model)
    grid = [t for t in grid if t <= sweeps]
    x0 = (1, 1)
    rec = herded_gibbs(model, x0, sweeps)
    herded = {m: error_series(rec, oracle, m, 0, grid) for m in (MARGINAL, TV_JOINT)}

    def one(r: int) -> dict[str, ErrorSeries]:
        g = gibbs_run(model, x0, GibbsConfig(seed=seed, sweeps=sweeps), stream_id=r)
        return {m: error_series(g, oracle, m, 0, grid) for m in (MARGINAL, TV_JOINT)}

    gibbs = parallel_map(one, range(replicates), threads)
    slopes = {m: _slope_or_nan(s) for m, s in herded.items()}
    gibbs_slopes = {m: [_slope_or_nan(g[m]) for g in gibbs] for m in (MARGINAL, TV_JOINT)}
    reach_g = [first_below(g[MARGINAL], 1e-3) for g in gibbs]
    reach = {
        "herded": first_below(herded[MARGINAL], 1e-3),
        "gibbs": reach_g,
        "gibbs_median": _median_reach(reach_g),
    }
    return Toy2Result(eps, herded, gibbs, slopes, gibbs_slopes, convergence_constants(model), reach)


def _median_reach(values: Sequence[int | None]) -> float:
    """Median first-passage ``T``; runs that never get there count as infinite."""
    return float(np.median([math.inf if v is None else v for v in values]))


def _kv_block(items: Iterable[tuple[str, object]]) -> str:
    lines = []
    for k, v in items:
        if isinstance(v, (float, np.floating)):
            v = repr(float(v))
        lines.append(f"{k}={v}\n")
    return "".join(lines)


def toy2(
    eps_list: Sequence[float],
    out: Path,
    sweeps: int = 2**14,
    replicates: int = 10,
    seed: int = 0,
    threads: int = 1,
    grid: Sequence[int] = DEFAULT_GRID,
) -> list[Toy2Result]:
    for eps in eps_list:
        if not 0.0 < eps < 0.25:
            raise hio.ConfigError(f"eps must lie in (0, 1/4), got {eps}")
    if sweeps < grid[0]:
        raise hio.ConfigError(f"sweeps must be at least {grid[0]}")
    if replicates < 1:
        raise hio.ConfigError("gibbs_replicates must be at least 1")
    out = Path(out) / "toy2"
    results = []
    summary_rows = []
    for eps in eps_list:
        res = run_toy2_eps(eps, sweeps, replicates, seed, grid, threads)
        results.append(res)
        d = out / f"eps_{eps:g}"
        for m, s in res.herded.items():
            hio.write_series(s, d / f"herded_{m}.csv")
        for r, g in enumerate(res.gibbs):
            for m, s in g.items():
                hio.write_series(s, d / f"gibbs_r{r}_{m}.csv")
        report = [("eps", eps), ("T_grid", " ".join(map(str, res.herded[MARGINAL].T.astype(int))))]
        for m in (MARGINAL, TV_JOINT):
            report.append((f"herded_{m}_slope", res.slopes[m]))
            report.append((f"gibbs_{m}_slope_median", float(np.nanmedian(res.gibbs_slopes[m]))))
        report.append(("herded_reach_1e-3", res.reach["herded"]))
        report.append(("gibbs_reach_1e-3_median", res.reach["gibbs_median"]))
        hio.atomic_write_text(d / "slopes.txt", _kv_block(report))
        c = res.constants
        hio.atomic_write_text(
            d / "constants.txt",
            _kv_block(
                [
                    ("min_conditional", c.min_conditional),
                    ("path_steps", c.path_steps),
                    ("path_sweeps", c.path_sweeps),
                    ("visit_rate", c.visit_rate),
                    ("visit_offset", c.visit_offset),
                    ("dobrushin", c.dobrushin),
                    ("rate", c.rate),
                    ("min_samples", c.min_samples),
                ]
            ),
        )
        for m in (MARGINAL, TV_JOINT):
            summary_rows.append((f"{eps:g}", "herded", m, hio.fmt(res.slopes[m])))
            summary_rows.append(
                (f"{eps:g}", "gibbs_median", m, hio.fmt(float(np.nanmedian(res.gibbs_slopes[m]))))
            )
    hio.write_csv(out / "summary.csv", ["eps", "method", "metric", "slope"], summary_rows)
    return results


# -- empty graph ----------------------------------------------------------------


@dataclass
class EmptyResult:
    tv: ErrorSeries
    control_tv: ErrorSeries
    discrepancy: float
    marginal_discrepancy: list[float]
    single_var_max_scaled_error: float


def _product_oracle(marginals: Sequence[float]) -> ExactDistribution:
    return enumerate_joint(make_independent_model(marginals), cap=20)


def empty(
    out: Path,
    marginals: Sequence[float] = IRRATIONAL_MARGINALS,
    sweeps: int = 10**5,
    grid: Sequence[int] | None = None,
    discrepancy_points: int = 4096,
) -> EmptyResult:
    if not marginals:
        raise hio.ConfigError("need at least one marginal")
    for p in marginals:
        if not 0.0 < p < 1.0:
            raise hio.ConfigError(f"marginals must lie in (0, 1), got {p}")
    if len(marginals) > 20:
        raise hio.ConfigError("at most 20 marginals (joint oracle cap)")
    grid = list(grid) if grid else powers_of_two(2**4, 2 ** int(math.log2(sweeps)))
    if grid[-1] != sweeps:
        grid.append(sweeps)
    n = len(marginals)
    model = make_independent_model(marginals)
    watch = [WeightKey(i, 0) for i in range(n)]
    rec = herded_gibbs(model, [1] * n, sweeps, watch=watch)
    tv = error_series(rec, _product_oracle(marginals), TV_JOINT, 0, grid)
    pts = torus(rec.weights[: min(discrepancy_points, sweeps)])
    disc = weight_discrepancy(pts) if n <= 3 else math.nan
    per_var = [weight_discrepancy(pts[:, i]) for i in range(n)]

    control = [0.5, 0.5]
    crec = herded_gibbs(make_independent_model(control), [1, 1], sweeps, weight_init=OffsetInit(0.25))
    control_tv = error_series(crec, _product_oracle(control), TV_JOINT, 0, grid)

    single = herded_gibbs(make_independent_model([0.75]), [1], sweeps)
    s = error_series(single, np.array([0.75]), MARGINAL, 0, range(1, sweeps + 1))
    scaled = float(np.max(s.T * s.errors))

    d = Path(out) / "empty"
    hio.write_series(tv, d / "tv.csv")
    hio.write_series(control_tv, d / "control_tv.csv")
    hio.atomic_write_text(
        d / "discrepancy.txt",
        _kv_block(
            [("marginals", " ".join(map(repr, marginals))), ("points", len(pts)), ("star_discrepancy", disc)]
            + [(f"star_discrepancy_x{i}", v) for i, v in enumerate(per_var)]
            + [("single_var_max_T_err", scaled), ("control_final_tv", control_tv.errors[-1])]
        ),
    )
    return EmptyResult(tv, control_tv, disc, per_var, scaled)


# -- denoising ----------------------------------------------------------------


DEFAULT_METHODS = ("herded_full", "herded_shared", "gibbs", "mean_field:0.5", "mean_field:1")


@dataclass
class DenoiseRun:
    method: str
    sigma: float
    seed: int
    errors: np.ndarray
    estimate: np.ndarray
    wall_time: float


def expand_methods(methods: Sequence[str], damping: Sequence[float] = ()) -> list[str]:
    out = []
    for m in methods:
        name, d = parse_method(m)
        if name == "mean_field" and ":" not in m and damping:
            out.extend(f"mean_field:{x:g}" for x in damping)
        elif name == "mean_field":
            out.append(f"mean_field:{d:g}")
        else:
            out.append(name)
    return out


def denoise_replicates(
    truth: np.ndarray,
    sigma: float,
    methods: Sequence[str],
    seeds: Sequence[int],
    sweeps: int = 30,
    J: float = 1.0,
    mu_minus: float = -1.0,
    mu_plus: float = 1.0,
    threads: int = 1,
) -> list[DenoiseRun]:
    """All ``(method, seed)`` runs at one noise level, sorted by method then seed."""
    jobs = [(m, s) for m in methods for s in sorted(seeds)]

    def one(job):
        m, s = job
        problem = make_problem(truth, sigma, s, J, mu_minus=mu_minus, mu_plus=mu_plus)
        res = denoise(problem, m, sweeps, seed=s)
        return DenoiseRun(res.method, sigma, s, res.errors, res.estimate, res.wall_time)

    return parallel_map(one, jobs, threads)


def summarize(runs: Sequence[DenoiseRun]) -> list[tuple[str, float, float, float]]:
    groups: dict[tuple[str, float], list[float]] = {}
    for r in sorted(runs, key=lambda r: (r.method, r.sigma, r.seed)):
        groups.setdefault((r.method, r.sigma), []).append(float(r.errors[-1]))
    rows = []
    for (m, s), errs in groups.items():
        a = np.array(errs)
        rows.append((m, s, float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0))
    return rows


def denoise_experiment(
    out: Path,
    image: Path | None = None,
    sigmas: Sequence[float] = (2.0, 4.0, 6.0, 8.0),
    methods: Sequence[str] = DEFAULT_METHODS,
    seeds_count: int = 10,
    seed: int = 0,
    sweeps: int = 30,
    J: float = 1.0,
    mu_minus: float = -1.0,
    mu_plus: float = 1.0,
    threads: int = 1,
) -> tuple[list[tuple[str, float, float, float]], list[DenoiseRun]]:
    if image is not None:
        path = Path(image)
        if not path.is_file():
            raise hio.ConfigError(f"image file {path} not found")
        img = read_pgm(path)
        threshold = 128 if img.dtype == np.uint8 else 32768
        truth = binarize(img, threshold)
    else:
        truth = binarize(synthetic_image(32))
    if min(truth.shape) < 2:
        raise hio.ConfigError("image must be at least 2x2")
    if seeds_count < 1 or sweeps < 1:
        raise hio.ConfigError("seeds_count and sweeps must be positive")
    for s in sigmas:
        if not s > 0:
            raise hio.ConfigError(f"sigma must be positive, got {s}")
    seeds = [seed + k for k in range(seeds_count)]
    d = Path(out) / "denoise"
    write_pgm(spins_to_image(truth), d / "truth.pgm")
    runs: list[DenoiseRun] = []
    for sigma in sigmas:
        batch = denoise_replicates(truth, sigma, methods, seeds, sweeps, J, mu_minus, mu_plus, threads)
        for r in batch:
            stem = str(d / f"sigma_{sigma:g}" / f"{r.method.replace(':', '_D')}_seed{r.seed}")
            hio.write_csv(
                stem + ".csv",
                ["sweep", "mse", "mislabel_frac"],
                ((k + 1, hio.fmt(e), hio.fmt(e / 4.0)) for k, e in enumerate(r.errors)),
            )
            write_pgm(spins_to_image(r.estimate), stem + ".pgm")
        runs.extend(batch)
    rows = summarize(runs)
    hio.write_csv(
        d / "summary.csv",
        ["method", "sigma", "mean_mse", "std_mse"],
        ((m, f"{s:g}", hio.fmt(a), hio.fmt(b)) for m, s, a, b in rows),
    )
    return rows, runs


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start
