import numpy as np
import pytest

from herdgibbs.herding import (
    FULL,
    SHARED,
    ExplicitInit,
    OffsetInit,
    SamplerState,
    TableInit,
    WeightInitError,
    WeightKey,
    herd_scalar,
    herded_gibbs,
    init_state,
    key_counting_violations,
    run,
    step,
)
from herdgibbs.ising import IsingGridModel, make_problem
from herdgibbs.pgm import Factor, ModelError, build_model, make_independent_model


def test_herd_scalar_three_quarters():
    x, w = herd_scalar(0.75, 0.5, 8)
    assert x.tolist() == [1, 1, 0, 1, 1, 1, 0, 1]
    assert w == 0.5


def test_herd_scalar_weight_cycle():
    # 0.5 -> 0.25 -> 0 -> 0.75 -> 0.5
    ws = [0.5]
    for _ in range(4):
        _, w = herd_scalar(0.75, ws[-1], 1)
        ws.append(float(w))
    assert ws == [0.5, 0.25, 0.0, 0.75, 0.5]


def test_herd_scalar_degenerate():
    assert herd_scalar(1.0, 0.5, 5)[0].tolist() == [1] * 5
    assert herd_scalar(0.0, -0.1, 5)[0].tolist() == [0] * 5


def test_herd_scalar_broadcasts():
    p = np.array([0.2, 0.5, 0.9])
    x, w = herd_scalar(p, p - 0.5, 100)
    assert x.shape == (3, 100)
    for k in range(3):
        xs, ws = herd_scalar(p[k], p[k] - 0.5, 100)
        assert np.array_equal(x[k], xs)
        assert w[k] == ws


def test_init_state_two_var(two_var):
    st = init_state(two_var, (1, 1), (0, 1))
    assert st.x == [1, 1]
    assert st.weights == {}
    assert st.t == 0


def test_init_state_outside_support():
    m = build_model(2, [Factor((0, 1), [0, 1, 1, 1])])
    with pytest.raises(ModelError):
        init_state(m, (0, 0))


def test_explicit_init_on_boundary(two_var):
    # p = P(X_0 = 1 | x_1 = 1) = 13/15; c = p - 1 exactly must be rejected
    p = two_var.conditional(0, [1, 1])
    st = SamplerState(two_var, (1, 1), weight_init=ExplicitInit(p - 1.0))
    with pytest.raises(WeightInitError):
        step(st)
    st = SamplerState(two_var, (1, 1), weight_init=ExplicitInit(p))
    with pytest.raises(WeightInitError):
        step(st)


def test_single_step():
    m = make_independent_model([0.75])
    st = SamplerState(m, (0,), weight_init=ExplicitInit(0.5))
    assert step(st) == 1
    assert st.weights[(0, 0)] == 0.25
    assert st.t == 1


def test_zero_weight_emits_zero():
    m = make_independent_model([0.75])
    st = SamplerState(m, (1,), weight_init=TableInit({(0, 0): 0.0}))
    assert step(st) == 0
    assert st.x == [0]


def test_step_touches_one_weight(two_var):
    st = SamplerState(two_var, (1, 1))
    run(st, 5)
    before = dict(st.weights)
    i = st.scan_order[st.t % 2]
    key = st.weight_key(i)
    step(st)
    changed = {k for k in st.weights if before.get(k) != st.weights[k]}
    assert changed == {(key.variable, key.code)}


def test_run_matches_scalar():
    m = make_independent_model([0.75])
    rec = herded_gibbs(m, (0,), 8, weight_init=ExplicitInit(0.5))
    assert rec.samples[:, 0].tolist() == [1, 1, 0, 1, 1, 1, 0, 1]


def test_run_is_deterministic(two_var):
    a = herded_gibbs(two_var, (1, 1), 500)
    b = herded_gibbs(two_var, (1, 1), 500)
    assert np.array_equal(a.samples, b.samples)


def test_two_var_marginal_accuracy(two_var):
    rec = herded_gibbs(two_var, (1, 1), 10**4)
    # herded error on this model is far below the 1/T^0.8 the acceptance slope demands
    assert abs(rec.samples[:, 0].mean() - 0.75) <= 1e-3


def test_run_records_steps(two_var):
    rec = herded_gibbs(two_var, (1, 0), 3, record_steps=True)
    assert rec.states.shape == (7, 2)
    assert rec.states[0].tolist() == [1, 0]
    assert np.array_equal(rec.states[2::2], rec.samples)


def test_run_must_start_on_sweep_boundary(two_var):
    st = SamplerState(two_var, (1, 1))
    step(st)
    with pytest.raises(ValueError):
        run(st, 1)


def test_blanket_codes():
    # a 3x3 grid; the center has neighbors (1, 3, 5, 7)
    truth = np.ones((3, 3), dtype=np.int8)
    g = IsingGridModel(make_problem(truth, 1.0, 0))
    x = [0, 1, 0, 0, 0, 1, 0, 1, 0]
    x[3] = 0
    x[1], x[3], x[5], x[7] = 1, 0, 1, 1
    full = SamplerState(g, g.ml_bits(), mode=FULL)
    full.x = x
    assert full.blanket_code(4) == 0b1101
    shared = SamplerState(g, g.ml_bits(), mode=SHARED)
    shared.x = x
    assert shared.blanket_code(4) == 3
    assert shared.weight_key(4) == WeightKey(4, 3, SHARED)


def test_shared_needs_declaration(two_var):
    with pytest.raises(ModelError):
        SamplerState(two_var, (1, 1), mode=SHARED)


def test_offset_init_range():
    with pytest.raises(WeightInitError):
        OffsetInit(1.0)


def test_invariant_tracking(two_var):
    st = SamplerState(two_var, (1, 1), check_invariants=True)
    run(st, 1000)
    assert st.violations == []
    bad = SamplerState(two_var, (1, 1), check_invariants=True, update_bias=1e-3)
    run(bad, 1000)
    assert bad.violations


def test_compensated_matches_plain(two_var):
    a = herded_gibbs(two_var, (1, 1), 2000)
    b = herded_gibbs(two_var, (1, 1), 2000, compensated=True)
    assert np.array_equal(a.samples, b.samples)


def test_key_counting_on_trace(two_var):
    st = SamplerState(two_var, (1, 1), trace=True)
    run(st, 3000)
    assert key_counting_violations(st.trace) == []
    # a forged trace that emits too many ones in a row is caught
    forged = [(t, 0, 0, 0.0, 0.1, 1) for t in range(20)]
    assert key_counting_violations(forged, windows=(10,))


def test_watch_weights():
    m = make_independent_model([0.3])
    rec = herded_gibbs(m, (0,), 4, watch=[WeightKey(0, 0)])
    ws = [0.3 - 0.5]
    for _ in range(4):
        w = ws[-1]
        ws.append(w + 0.3 - (1 if w > 0 else 0))
    assert rec.weights[:, 0] == pytest.approx(ws[1:], abs=1e-15)
