from fractions import Fraction

import numpy as np
import pytest

from herdgibbs.pgm import (
    Factor,
    Model,
    ModelError,
    UndefinedConditionalError,
    build_model,
    dumps_model,
    full_conditional,
    in_support,
    index_state,
    load_model,
    loads_model,
    make_independent_model,
    make_two_var_model,
    random_pairwise_model,
    save_model,
    state_index,
)
from herdgibbs.oracle import enumerate_joint, exact_marginals


def test_unary_factor_normalizes():
    m = build_model(1, [Factor((0,), [1, 3])])
    assert full_conditional(m, 0, [0]) == pytest.approx(0.75, abs=1e-15)
    assert enumerate_joint(m).probs.tolist() == [0.25, 0.75]


def test_two_var_blanket(two_var):
    assert two_var.blanket(0) == (1,)
    assert two_var.blanket(1) == (0,)


def test_scope_out_of_range():
    with pytest.raises(ModelError):
        build_model(2, [Factor((0, 5), [1, 1, 1, 1])])


@pytest.mark.parametrize(
    "table",
    [[1, -1], [0, 0], [1, np.nan], [1, 2, 3]],
    ids=["negative", "all_zero", "nan", "wrong_length"],
)
def test_bad_tables(table):
    with pytest.raises(ModelError):
        Factor((0,), table)


def test_empty_factor_list():
    with pytest.raises(ModelError):
        build_model(2, [])


def test_two_var_conditionals(two_var):
    # rows of the joint normalized by hand
    eps = Fraction(1, 10)
    given_0 = eps / (Fraction(1, 4) - eps + eps)
    given_1 = (Fraction(3, 4) - eps) / (eps + Fraction(3, 4) - eps)
    assert full_conditional(two_var, 0, [0, 0]) == pytest.approx(float(given_0), abs=1e-15)
    assert full_conditional(two_var, 0, [0, 1]) == pytest.approx(float(given_1), abs=1e-15)
    assert float(given_1) == pytest.approx(0.866667, abs=1e-6)


def test_conditional_ignores_own_value(two_var):
    assert full_conditional(two_var, 0, [0, 1]) == full_conditional(two_var, 0, [1, 1])


def test_undefined_conditional():
    m = build_model(2, [Factor((0, 1), [1, 0, 0, 0])])
    with pytest.raises(UndefinedConditionalError):
        full_conditional(m, 0, [0, 1])


def test_support():
    m = build_model(2, [Factor((0, 1), [0, 1, 1, 1])])
    assert not in_support(m, (0, 0))
    assert in_support(m, (1, 0))
    assert in_support(make_two_var_model(0.1), (1, 1))
    pos = random_pairwise_model(4, np.random.default_rng(0))
    assert all(in_support(pos, index_state(s, 4)) for s in range(16))


def test_two_var_marginals(two_var):
    assert exact_marginals(enumerate_joint(two_var)) == pytest.approx([0.75, 0.75], abs=1e-15)


@pytest.mark.parametrize("eps", [0.3, 0.25, 0.0, -0.1])
def test_two_var_eps_range(eps):
    with pytest.raises(ModelError):
        make_two_var_model(eps)


def test_state_index_little_endian():
    assert state_index([1, 0, 1, 1]) == 0b1101
    assert index_state(13, 4) == [1, 0, 1, 1]


def test_independent_model_rejects_bad_marginal():
    with pytest.raises(ModelError):
        make_independent_model([1.5])


def test_text_roundtrip(tmp_path):
    m = random_pairwise_model(4, np.random.default_rng(3))
    m2 = loads_model(dumps_model(m))
    assert m2.num_vars == 4
    assert np.array_equal(enumerate_joint(m).probs, enumerate_joint(m2).probs)
    save_model(m, tmp_path / "m.txt")
    assert dumps_model(load_model(tmp_path / "m.txt")) == dumps_model(m)


def test_text_format_comments_and_flag():
    text = "# two vars\nvars 2\nsum_sufficient\nfactor 2 0 1\n1 2\n3 4  # wrapped\n"
    m = loads_model(text)
    assert m.sum_sufficient
    assert m.factors[0].table.tolist() == [1, 2, 3, 4]


@pytest.mark.parametrize(
    "text",
    ["", "vars 2\nfactor 1 0\n1\n", "vars 2\nfactor 1 3\n1 1\n", "bogus\n"],
    ids=["empty", "short_table", "bad_scope", "bad_keyword"],
)
def test_text_format_errors(text):
    with pytest.raises(ModelError):
        loads_model(text)


def test_model_is_immutable(two_var):
    with pytest.raises(Exception):
        two_var.factors[0].table[0] = 5.0
    assert isinstance(two_var, Model)
