import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpersel.game import ContractError
from helpersel.learning import (R2HS, RTHS, BestResponse, LearningParams, best_response_step,
                                make_learner, r2hs_regret_from_T, r2hs_update_T,
                                rths_update_averages, rths_update_regret, sample_action,
                                update_play_probabilities)
from oracles import direct_proxy_regret


def test_params_validation():
    with pytest.raises(ContractError):
        LearningParams(epsilon=0.0)
    with pytest.raises(ContractError):
        LearningParams(delta=1.0)
    with pytest.raises(ContractError):
        LearningParams(mu=-1.0)
    assert LearningParams().resolve(4, 900.0).mu == 7200.0


@pytest.mark.parametrize("cf, expected", [(500.0, 50.0), (300.0, 0.0)])
def test_rths_regret_examples(cf, expected):
    avg = np.array([[450.0, cf], [0.0, 0.0]])
    Q = np.zeros((2, 2))
    rths_update_regret(Q, avg, 0)
    assert Q[0, 1] == expected
    assert Q[0, 0] == 0.0


def test_rths_first_stage_own_average():
    avg = np.zeros((3, 3))
    rths_update_averages(avg, np.array([400.0, 800.0, 300.0]), 1, 0.05)
    assert avg[1, 1] == pytest.approx(40.0)
    assert avg[0].sum() == avg[2].sum() == 0.0


def test_rths_regret_leaves_other_rows():
    Q = np.full((3, 3), 7.0)
    avg = np.arange(9.0).reshape(3, 3)
    rths_update_regret(Q, avg, 2)
    assert np.all(Q[:2] == 7.0)
    assert Q[2].tolist() == [0.0, 0.0, 0.0]


def test_probabilities_zero_regret():
    p = update_play_probabilities(np.zeros(4), 2, delta=0.1, mu=100.0)
    assert p == pytest.approx([0.025, 0.025, 0.925, 0.025])


def test_probabilities_saturated():
    p = update_play_probabilities(np.array([0.0, 50.0, 60.0, 70.0]), 0, delta=0.1, mu=100.0)
    assert p == pytest.approx([0.025, 0.325, 0.325, 0.325])


def test_probabilities_two_actions():
    p = update_play_probabilities(np.array([0.0, 40.0]), 0, delta=0.2, mu=100.0)
    assert p == pytest.approx([0.58, 0.42])


regret_rows = st.integers(2, 6).flatmap(
    lambda h: st.tuples(st.lists(st.floats(0, 1e5), min_size=h, max_size=h), st.integers(0, h - 1),
                        st.floats(0.001, 0.999), st.floats(1.0, 1e5)))


@given(regret_rows)
def test_probabilities_simplex_and_floor(args):
    row, j, delta, mu = args
    p = update_play_probabilities(np.array(row), j, delta, mu)
    assert p.sum() == pytest.approx(1.0, abs=1e-9)
    assert p.min() >= delta / len(row) - 1e-12


below_clamp = st.integers(2, 6).flatmap(
    lambda h: st.tuples(st.lists(st.integers(0, 800), min_size=h, max_size=h, unique=True)
                        .map(lambda xs: [x / 1000 for x in xs]),
                        st.integers(0, h - 1), st.floats(0.01, 0.9), st.floats(1.0, 1e4)))


@given(below_clamp, st.floats(0.01, 0.19))
def test_probabilities_monotone_below_clamp(args, bump):
    fracs, j, delta, mu = args
    h = len(fracs)
    row = np.array(fracs) * mu / (h - 1)
    row[j] = 0.0
    k = (j + 1) % h
    base = update_play_probabilities(row, j, delta, mu)
    raised = row.copy()
    raised[k] += bump * mu / (h - 1)
    assert update_play_probabilities(raised, j, delta, mu)[k] > base[k]
    off = [x for x in range(h) if x != j]
    assert off[int(np.argmax(base[off]))] == off[int(np.argmax(row[off]))]


def test_T_update_examples():
    T = np.zeros((2, 2))
    r2hs_update_T(T, 1, 800.0, np.array([0.5, 0.5]), 0.05)
    assert T[:, 1].tolist() == [800.0, 800.0] and T[:, 0].tolist() == [0.0, 0.0]
    r2hs_update_T(T, 1, 800.0, np.array([0.5, 0.5]), 0.05)
    assert T[:, 1] == pytest.approx([1560.0, 1560.0])
    D = np.zeros((3, 3))
    r2hs_update_T(D, 2, 700.0, np.array([0.0, 0.0, 1.0]), 0.05)
    assert D[:, 2].tolist() == [0.0, 0.0, 700.0]


def test_T_update_without_decay_is_cumulative():
    T = np.zeros((2, 2))
    for _ in range(2):
        r2hs_update_T(T, 1, 800.0, np.array([0.5, 0.5]), 0.05, decay=False)
    assert T[:, 1].tolist() == [1600.0, 1600.0]


def test_T_update_rejects_zero_probability():
    with pytest.raises(ContractError):
        r2hs_update_T(np.zeros((2, 2)), 1, 800.0, np.array([1.0, 0.0]), 0.05)


def test_regret_from_T_examples():
    T = np.array([[600.0, 800.0], [0.0, 0.0]])
    assert r2hs_regret_from_T(T, 0, 0.05) == pytest.approx([0.0, 10.0])
    T[0, 1] = 500.0
    assert r2hs_regret_from_T(T, 0, 0.05).tolist() == [0.0, 0.0]


def _trajectory(seed, steps, h=3, eps=0.05, delta=0.05):
    """Single R2HS peer fed random utilities; returns the learner and its history."""
    rng = np.random.default_rng(seed)
    learner = R2HS(1, h, LearningParams(eps, delta, mu=500.0))
    actions, probs, utils = [], [], []
    for _ in range(steps):
        p = learner.p[0].copy()
        a = sample_action(p, rng)
        u = rng.uniform(100.0, 1000.0)
        learner.update(np.array([a]), np.array([u]))
        actions.append(a), probs.append(p), utils.append(u)
    return learner, actions, probs, utils


def test_recursion_matches_direct_sum():
    learner, actions, probs, utils = _trajectory(7, 300)
    direct = np.array(direct_proxy_regret(actions, probs, utils, 0.05, 3))
    recursive = np.array([r2hs_regret_from_T(learner.T[0], j, 0.05) for j in range(3)])
    assert np.abs(direct - recursive).max() < 1e-9


def test_T_diagonal_only_grows_when_played():
    learner, actions, probs, utils = _trajectory(3, 200)
    eps = 0.05
    for j in range(3):
        expected = sum((1 - eps) ** (199 - t) * utils[t] for t in range(200) if actions[t] == j)
        assert learner.T[0, j, j] == pytest.approx(expected, rel=1e-12)


def test_learner_floor_holds_every_stage():
    learner = R2HS(5, 4, LearningParams(mu=500.0))
    rng = np.random.default_rng(0)
    for _ in range(500):
        a = sample_action(learner.p, rng)
        learner.update(a, rng.uniform(0, 900, size=5))
        assert np.allclose(learner.p.sum(axis=1), 1.0, atol=1e-9)
        assert learner.p.min() >= 0.05 / 4 - 1e-12


def test_sample_point_mass():
    rng = np.random.default_rng(0)
    assert all(sample_action(np.array([0.0, 0.0, 1.0, 0.0]), rng) == 2 for _ in range(200))


def test_sample_uniform_frequencies():
    rng = np.random.default_rng(123)
    draws = sample_action(np.full((10**6, 4), 0.25), rng)
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.abs(freq - 0.25).max() < 0.005


def test_sample_deterministic():
    p = np.array([[0.1, 0.2, 0.7]] * 50)
    a = sample_action(p, np.random.default_rng(9))
    b = sample_action(p, np.random.default_rng(9))
    assert a.tolist() == b.tolist()


def test_best_response_examples():
    caps = [800.0, 800.0]
    assert [best_response_step([0, 0, 0, 0], caps, i) for i in range(4)] == [1, 1, 1, 1]
    assert best_response_step([0, 1, 1, 2, 2], [900.0, 700.0, 700.0], 0) == 0
    assert best_response_step([0, 1], [700.0, 900.0], 0) == 0


def test_best_response_learner_follows_argmax():
    br = BestResponse(2, 2, LearningParams())
    br.update(np.array([0, 0]), np.array([400.0, 400.0]), np.array([[400.0, 800.0], [400.0, 800.0]]))
    assert br.p.tolist() == [[0.0, 1.0], [0.0, 1.0]]


def test_make_learner_unknown():
    with pytest.raises(ContractError):
        make_learner("tit-for-tat", 2, 2, LearningParams())


def test_rths_uses_exact_counterfactuals():
    learner = RTHS(1, 2, LearningParams(0.5, 0.1, mu=100.0))
    learner.update(np.array([0]), np.array([200.0]), np.array([[200.0, 260.0]]))
    # weighted own average 100, weighted counterfactual 130 -> regret 30
    assert learner.Q[0, 0, 1] == pytest.approx(30.0)
    assert learner.p[0] == pytest.approx([1 - (0.9 * 0.3 + 0.05), 0.9 * 0.3 + 0.05])
