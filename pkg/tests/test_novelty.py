import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patternsim import NoveltyModel, NoveltyState, SimulationConfig, expand, make_rng, new_class_probability, \
    parse_pattern, simulate, trigger_new_class
from patternsim.markov import NEW_CLASS
from patternsim.novelty import sparsity


def eq5(c_new, c_total, gap):
    return (1 / (c_new + 1)) * (1 / (c_total + 1)) ** (1 / (gap + 1))


def test_probability_examples():
    assert new_class_probability(NoveltyState(0, 4, 10), 10) == pytest.approx(0.2, abs=1e-12)
    assert new_class_probability(NoveltyState(9, 10, 3), 3) == pytest.approx(1 / 110, abs=1e-12)


def test_probability_limit():
    p = new_class_probability(NoveltyState(3, 8, 0), 10**9)
    assert p == pytest.approx(1 / 4, rel=1e-6)


def test_probability_before_last_addition():
    with pytest.raises(ValueError):
        new_class_probability(NoveltyState(0, 3, 5), 4)


def test_state_invariant():
    with pytest.raises(ValueError):
        NoveltyState(c_new=3, c_total=2, x_last=0)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 500))
def test_probability_matches_formula(c_new, extra, gap):
    c_total = c_new + extra
    p = new_class_probability(NoveltyState(c_new, c_total, 0), gap)
    assert math.isclose(p, eq5(c_new, c_total, gap), rel_tol=1e-12)
    assert 0 < p <= 1


@given(st.integers(0, 30), st.integers(0, 30), st.integers(0, 300))
def test_monotone_in_gap(c_new, extra, gap):
    s = NoveltyState(c_new, c_new + extra, 0)
    assert new_class_probability(s, gap + 1) >= new_class_probability(s, gap)


@given(st.integers(0, 30), st.integers(40, 100), st.integers(0, 300))
def test_strictly_decreasing_in_c_new(c_new, c_total, gap):
    a = new_class_probability(NoveltyState(c_new, c_total, 0), gap)
    b = new_class_probability(NoveltyState(c_new + 1, c_total, 0), gap)
    assert b < a


@pytest.mark.parametrize("p,decision,expected", [
    (0.5, [0.4, 0.1], True),
    (0.2, [0.2, 0.1], False),
    (1.0, [0.99, 0.01], True),
])
def test_trigger(p, decision, expected):
    assert trigger_new_class(p, np.array(decision)) is expected


def test_expand_dense():
    m = np.array([[0.3, 0.7], [0.6, 0.4]])
    grown, d = expand(m, np.array([0.3, 0.7]), make_rng(0))
    assert grown.shape == (3, 3)
    assert np.all(grown > 0)
    assert np.allclose(grown.sum(axis=1), 1, atol=1e-9)
    assert d.tolist() == [0, 0, 1]


def test_expand_keeps_old_proportions():
    m = np.array([[0.25, 0.75], [1.0, 0.0]])
    grown, _ = expand(m, np.array([1.0, 0.0]), make_rng(4))
    assert grown[0, 1] / grown[0, 0] == pytest.approx(3.0)
    assert grown[1, 1] == 0.0


def test_expand_sparsity_matches_on_average():
    m = np.array([[0.5, 0.5, 0, 0], [0, 0.5, 0.5, 0], [0, 0, 0.5, 0.5], [0.5, 0, 0, 0.5]])
    assert sparsity(m) == 0.5
    fractions = [np.mean(expand(m, np.eye(4)[0], make_rng(s))[0][:4, 4] == 0) for s in range(1000)]
    assert abs(np.mean(fractions) - 0.5) <= 0.1


def test_expand_never_leaves_zero_row():
    m = np.array([[0.0, 1.0], [1.0, 0.0]])  # sparsity 0.5, new row may start empty
    for s in range(500):
        grown, _ = expand(m, np.array([1.0, 0.0]), make_rng(s))
        assert np.allclose(grown.sum(axis=1), 1, atol=1e-9)


@settings(max_examples=60)
@given(st.integers(1, 8), st.integers(0, 2**32))
def test_expand_properties(n, seed):
    rng = make_rng(seed)
    m = rng.random((n, n)) * (rng.random((n, n)) > 0.4)
    m[np.arange(n), rng.integers(n, size=n)] += 0.5
    m /= m.sum(axis=1, keepdims=True)
    grown, d = expand(m, np.full(n, 1 / n), rng)
    assert grown.shape == (n + 1, n + 1) and d.shape == (n + 1,)
    assert np.allclose(grown.sum(axis=1), 1, atol=1e-9)
    assert np.all((grown >= 0) & (grown <= 1))


def test_model_names_pool_then_synthetic():
    model = NoveltyModel(["pho", "taco"])
    model.start(3, 4)
    assert model.next_name(("pho",)) == "taco"
    assert model.next_name(()) == "new_class_1"


def test_simulation_expansions_line_up():
    p = parse_pattern("a,b,a,c,b,c,a,c")
    trace = simulate(p, SimulationConfig(100, True, "modified", 5))
    n_new = trace.tags.count(NEW_CLASS)
    assert n_new == len(trace.expansions) >= 1
    assert trace.pattern.alphabet.size == 3 + n_new == trace.matrix.shape[0]
    assert trace.pattern.alphabet.names[:3] == ("a", "b", "c")
    for rec in trace.expansions:
        assert trace.tags[rec.t - len(p)] == NEW_CLASS


def test_first_step_probability_against_oracle():
    # At t = len(initial) the gap is 1, so P = (1/(c_total+1))**(1/2).
    model = NoveltyModel()
    model.start(4, 9)
    assert model.probability(10) == pytest.approx(math.sqrt(1 / 5))
