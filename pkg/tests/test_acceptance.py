"""Acceptance gate: one test and one printed pass/fail line per criterion.

Each criterion is evaluated at its stated tolerance through the same check
functions that back ``herdgibbs verify``.
"""

import pytest

from herdgibbs import checks


def _gate(log, title, *results):
    passed = all(r.passed for r in results)
    detail = "; ".join(r.line() for r in results)
    line = f"[{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    log.append(line)
    print(line)
    assert passed, line


def test_scalar_moment_matching(acceptance_log):
    _gate(acceptance_log, "scalar moment matching, 1000 pairs, T <= 1e4, < 5 s", checks.check_scalar_moment_matching())


def test_invariant_interval(acceptance_log):
    _gate(acceptance_log, "weights stay in (p - 1, p]", checks.check_invariant_interval())


def test_per_key_counting(acceptance_log):
    _gate(acceptance_log, "per-key window counts in [Mp - 1, Mp + 1]", checks.check_per_key_counting())


def test_oracle_equivalence(acceptance_log):
    _gate(acceptance_log, "conditionals vs enumeration and kernel stationarity", checks.check_oracle_equivalence())


def test_tv_bound_after_burn_in(acceptance_log):
    _gate(acceptance_log, "d_v after burn-in <= lambda / T, T in 2^6..2^12", checks.check_tv_bound_after_burn_in())


def test_rate_separation(acceptance_log):
    _gate(acceptance_log, "herded slope <= -0.8, Gibbs median slope in [-0.7, -0.3]", checks.check_rate_separation())


def test_empty_graph(acceptance_log):
    _gate(
        acceptance_log,
        "independent model: tv < 0.01 at 1e5 sweeps, 1-D discrepancy < 0.02",
        checks.check_empty_graph_tv(),
        checks.check_weight_discrepancy(),
    )


def test_denoising_trend(acceptance_log):
    _gate(
        acceptance_log,
        "denoising: herded-shared <= Gibbs at sigma 4, <= mean field D=0.5 at sigma 8",
        checks.check_denoise_sigma4_herded_vs_gibbs(),
        checks.check_denoise_sigma8_herded_vs_mean_field(),
    )


def test_determinism(acceptance_log):
    _gate(acceptance_log, "toy2 and herded denoise byte-identical, threads 1 vs 8", checks.check_determinism())


def test_scaled_tv_bounded(acceptance_log):
    _gate(acceptance_log, "T d_v / log T bounded over 2^6..2^14 without burn-in", checks.check_scaled_tv_no_burn_in())


@pytest.mark.parametrize(
    "fn",
    [checks.check_two_var_dobrushin, checks.check_visit_rate, checks.check_rational_control_plateau, checks.check_single_variable_bound],
    ids=lambda f: f.__name__,
)
def test_supporting_checks(fn):
    res = fn()
    assert res.passed, res.line()
