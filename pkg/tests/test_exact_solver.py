import math

import numpy as np
import pytest

from smooth_cruiser.core.environments import TabularMdp, build_chain, build_gridworld
from smooth_cruiser.core.errors import InvalidArgumentError
from smooth_cruiser.core.exact_solver import (
    regularization_gap,
    regularization_gap_bound,
    solve_regularized,
    solve_unregularized,
)
from smooth_cruiser.core.operators import LogSumExpMax, SqrtRegularized


@pytest.fixture()
def single_state():
    return TabularMdp(np.ones((1, 2, 1)), np.ones((1, 2)), name="single")


def test_single_state_value(single_state):
    table = solve_regularized(single_state, LogSumExpMax(1.0, 2), 0.5)
    assert table.v[0] == pytest.approx(2.0 * (1.0 + math.log(2.0)), abs=1e-10)
    np.testing.assert_allclose(table.q[0], 1.0 + 0.5 * table.v[0], atol=1e-12)
    np.testing.assert_allclose(table.policy(LogSumExpMax(1.0, 2)), [[0.5, 0.5]])


def test_zero_rewards_give_offset_fixed_point():
    model = TabularMdp(np.ones((1, 3, 1)), np.zeros((1, 3)))
    table = solve_regularized(model, LogSumExpMax(0.4, 3), 0.7)
    assert table.v[0] == pytest.approx(0.4 * math.log(3.0) / 0.3, abs=1e-9)


@pytest.mark.parametrize(
    "model,op",
    [
        (build_chain(5), LogSumExpMax(10.0, 2)),
        (build_gridworld(5), LogSumExpMax(10.0, 4)),
        (build_chain(5), SqrtRegularized(1.0, 2, smoothness=1.0)),
    ],
    ids=["chain", "gridworld", "chain-sqrt"],
)
def test_residual_below_tolerance(model, op):
    table = solve_regularized(model, op, 0.2)
    assert table.residual <= 1e-10
    assert table.v.shape == (model.n_states,)
    assert table.q.shape == (model.n_states, model.n_actions)


def test_unregularized_value(single_state):
    table = solve_unregularized(single_state, 0.5)
    assert table.v[0] == pytest.approx(2.0, abs=1e-10)


def test_regularization_gap_is_tight_on_ties(single_state):
    op = LogSumExpMax(1.0, 2)
    gap = regularization_gap(
        solve_regularized(single_state, op, 0.5), solve_unregularized(single_state, 0.5)
    )
    assert gap == pytest.approx(math.log(2.0) / 0.5, abs=2e-10)
    assert gap <= regularization_gap_bound(op, 0.5) + 2e-10


def test_regularization_gap_within_bound_on_chain():
    model = build_chain(6)
    op = LogSumExpMax(0.5, 2)
    reg = solve_regularized(model, op, 0.6)
    hard = solve_unregularized(model, 0.6)
    assert np.all(reg.v >= hard.v - 1e-9)
    assert regularization_gap(reg, hard) <= regularization_gap_bound(op, 0.6) + 1e-9


def test_changes_contract_geometrically():
    gamma = 0.8
    table = solve_regularized(build_gridworld(4), LogSumExpMax(1.0, 4), gamma)
    deltas = table.deltas
    assert len(deltas) == table.iterations
    for prev, cur in zip(deltas, deltas[1:]):
        assert cur <= gamma * prev * (1.0 + 1e-9) + 1e-13


def test_regularized_values_dominate_hard_max():
    # the envelope grows monotonically with lambda
    model = build_chain(5)
    values = [
        solve_regularized(model, LogSumExpMax(lam, 2), 0.5).v for lam in (0.1, 1.0, 5.0)
    ]
    hard = solve_unregularized(model, 0.5).v
    assert np.all(values[0] >= hard - 1e-9)
    assert np.all(values[1] >= values[0] - 1e-9)
    assert np.all(values[2] >= values[1] - 1e-9)


def test_gamma_zero_is_one_step():
    model = build_chain(3)
    op = LogSumExpMax(1.0, 2)
    table = solve_regularized(model, op, 0.0)
    np.testing.assert_allclose(table.v, op.value_rows(model.reward_mean))


@pytest.mark.parametrize("gamma", [1.0, -0.1, 1.5, float("nan")])
def test_bad_gamma(gamma):
    with pytest.raises(InvalidArgumentError):
        solve_regularized(build_chain(3), LogSumExpMax(1.0, 2), gamma)


def test_operator_action_mismatch():
    with pytest.raises(InvalidArgumentError):
        solve_regularized(build_chain(3), LogSumExpMax(1.0, 4), 0.5)
