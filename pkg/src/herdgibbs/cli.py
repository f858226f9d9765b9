"""Command-line entry point: ``herdgibbs {toy2,empty,denoise,verify}``.

Settings come from built-in defaults, then a ``key = value`` config file
(``--config``), then command-line flags, later sources winning.  Exit codes:
0 success, 1 a verification check failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as ex
from .io import ConfigError, float_list, load_config

DEFAULTS = {
    "out": "results",
    "threads": 1,
    "seed": 0,
    "toy2": {"eps": [0.1, 0.01, 0.001, 0.0001], "sweeps": 2**14, "gibbs_replicates": 10},
    "empty": {"marginals": list(ex.IRRATIONAL_MARGINALS), "sweeps": 10**5},
    "denoise": {
        "image": None,
        "sigma": [2.0, 4.0, 6.0, 8.0],
        "method": list(ex.DEFAULT_METHODS),
        "damping": [],
        "seeds_count": 10,
        "sweeps": 30,
        "j": 1.0,
        "mu_minus": -1.0,
        "mu_plus": 1.0,
    },
    "verify": {},
}

# how config-file strings are converted, per key
_PARSERS = {
    "out": str,
    "threads": int,
    "seed": int,
    "eps": float_list,
    "marginals": float_list,
    "sigma": float_list,
    "damping": float_list,
    "method": lambda v: [m for m in v.replace(",", " ").split() if m],
    "sweeps": int,
    "gibbs_replicates": int,
    "seeds_count": int,
    "image": str,
    "j": float,
    "mu_minus": float,
    "mu_plus": float,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default: results)")
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--threads", type=int, help="worker threads for replicates")
    common.add_argument("--seed", type=int, help="seed base for all stochastic runs")

    parser = argparse.ArgumentParser(prog="herdgibbs", description="Herded Gibbs sampling experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy2", parents=[common], help="two-variable convergence study")
    p.add_argument("--eps", type=float, nargs="+", help="coupling values in (0, 1/4)")
    p.add_argument("--sweeps", type=int)
    p.add_argument("--gibbs-replicates", type=int, dest="gibbs_replicates")

    p = sub.add_parser("empty", parents=[common], help="independent-variable (empty graph) study")
    p.add_argument("--marginals", type=float, nargs="+", help="P(X_i = 1) per variable, in (0, 1)")
    p.add_argument("--sweeps", type=int)

    p = sub.add_parser("denoise", parents=[common], help="Ising image denoising comparison")
    p.add_argument("--image", help="PGM image; a synthetic 32x32 image if omitted")
    p.add_argument("--sigma", type=float, nargs="+")
    p.add_argument("--method", nargs="+", help="herded_full herded_shared gibbs annealed_gibbs mean_field[:D]")
    p.add_argument("--damping", type=float, nargs="+", help="mean-field damping values for a bare mean_field")
    p.add_argument("--seeds-count", type=int, dest="seeds_count", help="number of noise seeds")
    p.add_argument("--sweeps", type=int)
    p.add_argument("--J", type=float, dest="j", help="coupling strength")
    p.add_argument("--mu-minus", type=float, dest="mu_minus")
    p.add_argument("--mu-plus", type=float, dest="mu_plus")

    p = sub.add_parser("verify", parents=[common], help="run the self-verification suite")
    p.add_argument("--only", nargs="+", help="run only the named checks")
    p.add_argument("--mutate", action="store_true", help=argparse.SUPPRESS)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and command-line flags."""
    cmd = args.command
    settings = {k: DEFAULTS[k] for k in ("out", "threads", "seed")}
    settings.update(DEFAULTS[cmd])
    if args.config:
        for key, raw in load_config(args.config).items():
            if key not in settings:
                raise ConfigError(f"unknown setting {key!r} for {cmd}")
            try:
                settings[key] = _PARSERS[key](raw)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    for key in settings:
        v = getattr(args, key, None)
        if v is not None:
            settings[key] = v
    if settings["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    return settings


def _run(args: argparse.Namespace) -> int:
    s = resolve(args)
    out = Path(s["out"])
    if args.command == "toy2":
        results = ex.toy2(s["eps"], out, s["sweeps"], s["gibbs_replicates"], s["seed"], s["threads"])
        for r in results:
            print(
                f"eps={r.eps:g} herded slope marginal={r.slopes['marginal_abs_error']:.3f} "
                f"tv={r.slopes['tv_joint']:.3f}"
            )
    elif args.command == "empty":
        r = ex.empty(out, s["marginals"], s["sweeps"])
        print(f"final tv={r.tv.errors[-1]:.3g} star discrepancy={r.discrepancy:.3g}")
    elif args.command == "denoise":
        methods = ex.expand_methods(s["method"], s["damping"])
        rows, _ = ex.denoise_experiment(
            out, s["image"], s["sigma"], methods, s["seeds_count"], s["seed"], s["sweeps"],
            s["j"], s["mu_minus"], s["mu_plus"], s["threads"],
        )
        for m, sigma, mean, std in rows:
            print(f"sigma={sigma:g} {m:<16} mse={mean:.4f} +- {std:.4f}")
    else:
        from .checks import run_checks, write_results

        results = run_checks(mutate=args.mutate, only=args.only, log=print)
        if args.only and not results:
            raise ConfigError(f"no checks match {args.only}")
        write_results(results, out / "verify" / "results.csv")
        failed = [r.name for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} checks passed")
        return 1 if failed else 0
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"herdgibbs: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
