import math

import numpy as np
import pytest

from herdgibbs.diagnostics import (
    MARGINAL,
    TV_JOINT,
    ErrorSeries,
    InsufficientData,
    convergence_slope,
    empirical_distribution,
    error_series,
    log_T_scaled,
    nesting_consistent,
    powers_of_two,
    torus,
    upper_envelope,
    van_der_corput,
    visit_rate,
    weight_discrepancy,
)
from herdgibbs.herding import SampleRecord, WeightKey, herded_gibbs
from herdgibbs.oracle import ExactDistribution, enumerate_joint
from herdgibbs.pgm import Factor, build_model, make_independent_model


def _record(rows):
    return SampleRecord(np.array(rows, dtype=np.uint8), tuple(range(len(rows[0]))))


def test_point_mass():
    d = empirical_distribution(_record([[1, 0]]), 0, 1)
    assert d.probs.tolist() == [0, 1, 0, 0]


def test_two_sample_counts():
    d = empirical_distribution(_record([[0, 0], [1, 1]]), 0, 2)
    assert d.probs.tolist() == [0.5, 0, 0, 0.5]


def test_herded_single_var_distribution():
    rec = herded_gibbs(make_independent_model([0.75]), (0,), 8)
    assert empirical_distribution(rec, 0, 8).probs[1] == 0.75


def test_window_offset():
    d = empirical_distribution(_record([[0, 0], [1, 1], [1, 0]]), 1, 2)
    assert d.probs.tolist() == [0, 0.5, 0, 0.5]


def test_insufficient_record():
    with pytest.raises(InsufficientData):
        empirical_distribution(_record([[0, 0]]), 0, 2)


def test_deterministic_model_zero_error():
    m = build_model(2, [Factor((0, 1), [0, 0, 0, 1])])
    rec = herded_gibbs(m, (1, 1), 64)
    oracle = enumerate_joint(m)
    for metric in (MARGINAL, TV_JOINT):
        assert error_series(rec, oracle, metric, 0, [1, 2, 4, 64]).errors.tolist() == [0, 0, 0, 0]


def test_marginal_vector_oracle():
    rec = _record([[1], [0], [1], [1]])
    s = error_series(rec, np.array([0.5]), MARGINAL, 0, [1, 2, 4])
    assert s.errors.tolist() == [0.5, 0.0, 0.25]


def test_tv_series_matches_direct():
    m = make_independent_model([0.3, 0.6])
    rec = herded_gibbs(m, (1, 1), 200)
    oracle = enumerate_joint(m)
    s = error_series(rec, oracle, TV_JOINT, 3, [5, 50, 197])
    for T, e in s.points:
        direct = 0.5 * np.abs(empirical_distribution(rec, 3, T).probs - oracle.probs).sum()
        assert e == pytest.approx(direct, abs=1e-15)


def test_bad_grid():
    rec = _record([[1]] * 4)
    with pytest.raises(ValueError):
        error_series(rec, np.array([0.5]), MARGINAL, 0, [2, 1])


def test_envelope():
    assert upper_envelope([3, 1, 2, 0.5, 1]).tolist() == [3, 2, 2, 1, 1]


@pytest.mark.parametrize("power,expected", [(1.0, -1.0), (0.5, -0.5)])
def test_synthetic_slopes(power, expected):
    grid = powers_of_two(16, 2**14)
    s = ErrorSeries([(t, 3.0 / t**power) for t in grid], MARGINAL)
    assert convergence_slope(s).slope == pytest.approx(expected, abs=1e-9)


def test_slope_excludes_zeros():
    grid = powers_of_two(16, 2**10)
    pts = [(t, 1.0 / t) for t in grid] + [(2**11, 0.0)]
    fit = convergence_slope(ErrorSeries(pts, MARGINAL))
    assert fit.n_excluded == 1 and fit.excluded_T == [2048]
    assert "slope=" in fit.report()


def test_slope_needs_points():
    with pytest.raises(InsufficientData):
        convergence_slope(ErrorSeries([(1, 1.0), (2, 0.5)], MARGINAL))


def test_discrepancy_controls():
    assert weight_discrepancy(van_der_corput(4096)) < 0.01
    assert weight_discrepancy(np.zeros(200)) >= 0.98


def test_discrepancy_herded_irrational():
    m = make_independent_model([math.sqrt(2) - 1])
    rec = herded_gibbs(m, (0,), 4096, watch=[WeightKey(0, 0)])
    assert weight_discrepancy(torus(rec.weights[:, 0])) < 0.02


def test_discrepancy_limits():
    with pytest.raises(InsufficientData):
        weight_discrepancy(np.zeros(10))
    with pytest.raises(ValueError):
        weight_discrepancy(np.zeros((200, 4)))
    with pytest.raises(ValueError):
        weight_discrepancy(np.ones(200))


def test_torus():
    assert torus(np.array([-0.25, 1.5, 0.0])).tolist() == [0.75, 0.5, 0.0]


def test_visit_rate_single_var():
    T = 1000
    rec = herded_gibbs(make_independent_model([0.75]), (0,), T, record_steps=True)
    # counts include the starting state, so the error can equal 1/T exactly
    assert abs(visit_rate(rec, (1,)).min_rate - 0.75) <= 1.0 / T + 1e-12


def test_visit_rate_outside_support():
    m = build_model(2, [Factor((0, 1), [1, 1, 1, 0])])
    rec = herded_gibbs(m, (0, 0), 100, record_steps=True)
    assert visit_rate(rec, (1, 1)).min_rate == 0.0


def test_visit_rate_needs_steps():
    rec = herded_gibbs(make_independent_model([0.5]), (0,), 10)
    with pytest.raises(InsufficientData):
        visit_rate(rec, (1,))


def test_nesting(two_var):
    rec = herded_gibbs(two_var, (1, 1), 100)
    assert all(nesting_consistent(rec, tau, T) for tau in (0, 7) for T in (1, 10, 50))


def test_log_scaled():
    s = ErrorSeries([(8, 0.5), (16, 0.25)], TV_JOINT)
    assert log_T_scaled(s) == pytest.approx([4 / math.log(8), 4 / math.log(16)])


def test_powers_of_two():
    assert powers_of_two(16, 128) == [16, 32, 64, 128]
