from fractions import Fraction

import numpy as np
import pytest

from herdgibbs.oracle import (
    CapExceeded,
    ExactDistribution,
    all_states,
    convergence_constants,
    dobrushin_coefficient,
    enumerate_joint,
    exact_conditional,
    exact_marginals,
    min_conditional,
    sweep_kernel,
    tv_distance,
)
from herdgibbs.pgm import (
    Factor,
    ModelError,
    build_model,
    make_independent_model,
    make_two_var_model,
    random_pairwise_model,
)

EPS = Fraction(1, 10)
TWO_VAR_JOINT = [Fraction(1, 4) - EPS, EPS, EPS, Fraction(3, 4) - EPS]


def _exact_two_var_kernel():
    """Sweep kernel (update X0, then X1) from the joint, in exact arithmetic."""

    def p(s):
        return TWO_VAR_JOINT[s]

    def site(i, s, t):
        # move s -> t updating bit i only
        if (s ^ t) & ~(1 << i):
            return Fraction(0)
        a, b = s & ~(1 << i), s | (1 << i)
        return p(t) / (p(a) + p(b))

    return [[sum(site(0, s, m) * site(1, m, t) for m in range(4)) for t in range(4)] for s in range(4)]


def test_two_var_joint():
    d = enumerate_joint(make_two_var_model(0.1))
    assert d.probs == pytest.approx([0.15, 0.1, 0.1, 0.65], abs=1e-15)


def test_unary_joint():
    d = enumerate_joint(build_model(1, [Factor((0,), [1, 3])]))
    assert d.probs.tolist() == [0.25, 0.75]


def test_joint_cap():
    m = make_independent_model([0.5] * 21)
    with pytest.raises(CapExceeded):
        enumerate_joint(m, cap=21)
    with pytest.raises(CapExceeded):
        enumerate_joint(make_independent_model([0.5] * 17))


def test_all_states_order():
    assert all_states(2).tolist() == [[0, 0], [1, 0], [0, 1], [1, 1]]


@pytest.mark.parametrize(
    "p,q,expected",
    [([0.3, 0.7], [0.3, 0.7], 0.0), ([1, 0], [0, 1], 1.0), ([0.75, 0.25], [0.5, 0.5], 0.25)],
)
def test_tv(p, q, expected):
    assert tv_distance(np.array(p), np.array(q)) == pytest.approx(expected, abs=1e-15)


def test_tv_shape_mismatch():
    with pytest.raises(ValueError):
        tv_distance(np.ones(2) / 2, np.ones(4) / 4)


def test_single_var_kernel():
    k = sweep_kernel(make_independent_model([0.75]))
    assert k.matrix == pytest.approx(np.array([[0.25, 0.75], [0.25, 0.75]]), abs=1e-15)
    assert dobrushin_coefficient(k) == 0.0


def test_identity_dobrushin():
    assert dobrushin_coefficient(np.eye(4)) == 1.0


def test_two_var_kernel_matches_exact():
    exact = _exact_two_var_kernel()
    k = sweep_kernel(make_two_var_model(0.1))
    assert k.matrix == pytest.approx(np.array(exact, dtype=float), abs=1e-15)


def test_two_var_dobrushin_pinned():
    exact = _exact_two_var_kernel()
    eta = max(
        sum(abs(exact[a][t] - exact[b][t]) for t in range(4)) / 2 for a in range(4) for b in range(a + 1, 4)
    )
    assert eta == Fraction(7, 15)
    assert dobrushin_coefficient(sweep_kernel(make_two_var_model(0.1))) == pytest.approx(
        0.4666666666666667, abs=1e-15
    )


def test_kernel_stationary():
    m = random_pairwise_model(6, np.random.default_rng(2))
    d = enumerate_joint(m)
    k = sweep_kernel(m, order=(3, 1, 0, 5, 2, 4))
    assert k.apply(d.probs) == pytest.approx(d.probs, abs=1e-12)
    assert k.matrix.sum(axis=1) == pytest.approx(np.ones(64), abs=1e-12)


def test_kernel_with_zero_mass_blanket():
    m = build_model(2, [Factor((0, 1), [1, 0, 0, 1])])
    k = sweep_kernel(m)
    assert k.matrix.sum(axis=1) == pytest.approx(np.ones(4))


def test_marginals():
    assert exact_marginals(enumerate_joint(make_two_var_model(0.1))) == pytest.approx([0.75, 0.75], abs=1e-15)
    assert exact_marginals(ExactDistribution(2, np.full(4, 0.25))).tolist() == [0.5, 0.5]
    assert exact_marginals(ExactDistribution(2, np.array([0.0, 1.0, 0.0, 0.0]))).tolist() == [1.0, 0.0]


def test_exact_conditional():
    d = enumerate_joint(make_two_var_model(0.1))
    c = exact_conditional(d, 0)
    assert c[0] == pytest.approx(0.4, abs=1e-15)
    assert c[2] == pytest.approx(float(Fraction(13, 15)), abs=1e-15)


def test_distribution_validation(tmp_path):
    with pytest.raises(ValueError):
        ExactDistribution(1, np.array([0.5, 0.6]))
    d = enumerate_joint(make_two_var_model(0.1))
    d.to_csv(tmp_path / "d.csv")
    assert np.array_equal(ExactDistribution.from_csv(tmp_path / "d.csv").probs, d.probs)


def test_single_var_constants():
    c = convergence_constants(make_independent_model([0.75]))
    assert c.dobrushin == 0.0
    assert c.min_conditional == 0.25
    assert c.rate == pytest.approx(2 / 0.25, rel=1e-15)


def test_two_var_constants():
    c = convergence_constants(make_two_var_model(0.1))
    pmin = Fraction(2, 15)
    eta = Fraction(7, 15)
    l = pmin**2
    B = l + 1 + pmin * 2
    assert c.min_conditional == pytest.approx(float(pmin), rel=1e-14)
    assert c.visit_rate == pytest.approx(float(l), rel=1e-14)
    assert c.visit_offset == pytest.approx(float(B), rel=1e-14)
    assert c.rate == pytest.approx(float(4 * (1 + eta) / (l * (1 - eta))), rel=1e-12)
    assert c.rate == pytest.approx(618.75, rel=1e-12)
    assert c.min_samples == pytest.approx(float(2 * B / l), rel=1e-12)
    assert c.burn_in(4096) == pytest.approx(
        np.log(float((1 - eta) * l) * 4096 / 8) / np.log(float(2 / (1 + eta))), rel=1e-12
    )


def test_constants_need_positive_model():
    with pytest.raises(ModelError):
        convergence_constants(build_model(2, [Factor((0, 1), [1, 0, 1, 1])]))


def test_min_conditional_skips_zeros():
    m = build_model(2, [Factor((0, 1), [1, 0, 1, 1])])
    assert min_conditional(m) == 0.5
