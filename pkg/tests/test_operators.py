import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smooth_cruiser.core.errors import (
    InvalidArgumentError,
    UnsupportedOperationError,
)
from smooth_cruiser.core.operators import (
    LogSumExpMax,
    LogSumExpMin,
    SqrtRegularized,
    build_operator,
    estimate_smoothness,
    max_approx_gap,
    op_gradient,
    op_value,
    solve_lagrange,
)


def _operators(n_actions: int = 3, lam: float = 1.0):
    return [
        LogSumExpMax(lam, n_actions),
        LogSumExpMin(lam, n_actions),
        SqrtRegularized(lam, n_actions),
    ]


@pytest.fixture(scope="module")
def sqrt_op():
    return SqrtRegularized(1.0, 2)


def test_logsumexp_values():
    assert op_value(LogSumExpMax(1.0, 2), [0.0, 0.0]) == pytest.approx(math.log(2.0))
    assert op_value(LogSumExpMax(0.01, 2), [1.0, 0.0]) == pytest.approx(1.0, abs=1e-12)


def test_logsumexp_does_not_overflow():
    value = LogSumExpMax(1e-6, 2).value([1e6, 0.0])
    assert math.isfinite(value)
    assert value == pytest.approx(1e6)


def test_logsumexp_gradient_is_softmax():
    op = LogSumExpMax(1.0, 2)
    np.testing.assert_allclose(op_gradient(op, [0.0, 0.0]), [0.5, 0.5])
    np.testing.assert_allclose(op_gradient(op, [math.log(3.0), 0.0]), [0.75, 0.25])


def test_logsumexp_min_is_reflected_max():
    q = np.array([0.3, 1.7, -0.4])
    lo, hi = LogSumExpMin(0.5, 3), LogSumExpMax(0.5, 3)
    assert lo.value(q) == pytest.approx(-hi.value(-q))
    assert lo.value(q) <= q.min()
    np.testing.assert_allclose(lo.gradient(q).sum(), 1.0)


def test_sqrt_reg_symmetric_value(sqrt_op):
    assert sqrt_op.value([0.0, 0.0]) == pytest.approx(math.sqrt(2.0), abs=1e-10)
    assert solve_lagrange(sqrt_op, [0.0, 0.0]) == pytest.approx(
        math.sqrt(2.0) / 2.0, abs=1e-10
    )


def test_sqrt_reg_asymmetric_case(sqrt_op):
    q = np.array([1.0, 0.0])
    u = solve_lagrange(sqrt_op, q)
    assert u == pytest.approx(1.5291, abs=1e-4)
    pi = sqrt_op.gradient(q)
    np.testing.assert_allclose(pi, [0.8930, 0.1069], atol=1e-3)
    # primal objective at the optimal policy equals the dual value
    primal = float(q @ pi + sqrt_op.lam * np.sum(np.sqrt(pi)))
    assert sqrt_op.value(q) == pytest.approx(primal, abs=1e-9)


def test_sqrt_reg_single_action():
    op = SqrtRegularized(2.0, 1, smoothness=1.0)
    for c in (-3.0, 0.0, 4.5):
        assert solve_lagrange(op, [c]) == pytest.approx(c + 1.0)


def test_sqrt_reg_kkt_residual():
    rng = np.random.default_rng(3)
    for k in (2, 3, 5):
        op = SqrtRegularized(0.7, k, smoothness=1.0)
        for _ in range(50):
            q = rng.uniform(-5.0, 5.0, size=k)
            u = op.solve_lagrange(q)
            assert q.max() + op.lam / 2 <= u <= q.max() + op.lam * math.sqrt(k) / 2
            residual = abs(float(np.sum((op.lam / 2 / (u - q)) ** 2)) - 1.0)
            assert residual <= 1e-10


def test_max_gap_examples():
    assert max_approx_gap(LogSumExpMax(1.0, 2), [0.0, 0.0]) == pytest.approx(
        math.log(2.0)
    )
    assert max_approx_gap(LogSumExpMax(1.0, 2), [100.0, 0.0]) == pytest.approx(
        0.0, abs=1e-12
    )
    assert max_approx_gap(LogSumExpMax(2.0, 3), [0.0, 0.0, 0.0]) == pytest.approx(
        2.0 * math.log(3.0)
    )


def test_max_gap_range_and_min_kind():
    rng = np.random.default_rng(4)
    for op in (LogSumExpMax(0.3, 4), LogSumExpMin(0.3, 4)):
        for _ in range(200):
            gap = op.max_approx_gap(rng.uniform(-10.0, 10.0, size=4))
            assert -1e-12 <= gap <= op.M + 1e-12


def test_unsupported_operations(sqrt_op):
    with pytest.raises(UnsupportedOperationError):
        max_approx_gap(sqrt_op, [0.0, 1.0])
    with pytest.raises(UnsupportedOperationError):
        solve_lagrange(LogSumExpMax(1.0, 2), [0.0, 1.0])


@pytest.mark.parametrize(
    "q", [[float("nan"), 0.0], [float("inf"), 0.0], [], [[0.0, 1.0]], [0.0, 1.0, 2.0]]
)
def test_invalid_inputs(q):
    with pytest.raises(InvalidArgumentError):
        LogSumExpMax(1.0, 2).value(q)


def test_invalid_construction():
    with pytest.raises(InvalidArgumentError):
        LogSumExpMax(0.0, 2)
    with pytest.raises(InvalidArgumentError):
        SqrtRegularized(1.0, 0)
    with pytest.raises(InvalidArgumentError):
        build_operator("hardmax", 1.0, 2)


def test_constants():
    assert LogSumExpMax(0.25, 3).L == 4.0
    assert LogSumExpMax(0.25, 3).M == pytest.approx(0.25 * math.log(3.0))
    assert SqrtRegularized(0.5, 4, smoothness=2.0).M == pytest.approx(1.0)
    assert SqrtRegularized(0.5, 4, smoothness=2.0).L == 2.0


@pytest.mark.parametrize("op", _operators(n_actions=3), ids=lambda op: op.kind)
def test_smoothness_on_random_pairs(op):
    rng = np.random.default_rng(5)
    pairs = rng.uniform(0.0, 10.0, size=(10_000, 2, op.n_actions))
    L = op.L
    for x, y in pairs:
        lhs = abs(op.value(x) - op.value(y) - float((x - y) @ op.gradient(y)))
        assert lhs <= L * float(np.sum((x - y) ** 2)) + 1e-9


@pytest.mark.parametrize("op", _operators(n_actions=3), ids=lambda op: op.kind)
def test_gradient_matches_central_differences(op):
    rng = np.random.default_rng(6)
    step = 1e-6
    for _ in range(20):
        q = rng.uniform(0.0, 2.0, size=op.n_actions)
        numeric = np.empty(op.n_actions)
        for i in range(op.n_actions):
            e = np.zeros(op.n_actions)
            e[i] = step
            numeric[i] = (op.value(q + e) - op.value(q - e)) / (2 * step)
        np.testing.assert_allclose(op.gradient(q), numeric, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("op", _operators(n_actions=3), ids=lambda op: op.kind)
def test_hessian_matches_gradient_differences(op):
    q = np.array([0.4, 1.1, 0.9])
    step = 1e-4
    numeric = np.empty((3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        numeric[:, i] = (op.gradient(q + e) - op.gradient(q - e)) / (2 * step)
    np.testing.assert_allclose(op.hessian(q), numeric, atol=1e-6)


def test_gradient_l1_norm():
    rng = np.random.default_rng(7)
    for op in _operators(n_actions=4, lam=0.5):
        for _ in range(200):
            grad = op.gradient(rng.uniform(-10.0, 10.0, size=4))
            assert np.all(grad >= 0.0)
            if op.kind == "sqrt_reg":
                assert 0.0 < grad.sum() <= 1.0 + 1e-10
            else:
                assert abs(grad.sum() - 1.0) <= 1e-12


def test_sup_norm_lipschitz():
    rng = np.random.default_rng(8)
    for op in _operators(n_actions=3, lam=0.8):
        for _ in range(500):
            x, y = rng.uniform(-10.0, 10.0, size=(2, 3))
            assert abs(op.value(x) - op.value(y)) <= np.max(np.abs(x - y)) + 1e-12


def test_zero_offset_bound():
    rng = np.random.default_rng(9)
    for op in _operators(n_actions=3, lam=0.6):
        zero = op.value(np.zeros(3))
        assert abs(zero) <= op.M + 1e-10
        if op.kind in ("logsumexp_max", "sqrt_reg"):
            assert zero == pytest.approx(op.M, abs=1e-10)
        for _ in range(200):
            x = rng.uniform(-10.0, 10.0, size=3)
            assert abs(op.value(x)) <= np.max(np.abs(x)) + op.M + 1e-10


def test_estimated_smoothness_is_positive_and_cached():
    op = SqrtRegularized(1.0, 2)
    first = op.L
    assert first > 0.0
    assert op.L == first
    assert estimate_smoothness(op) == pytest.approx(first)
    # two-action log-sum-exp Hessians peak at ties with eigenvalue 1/(2 lam)
    assert estimate_smoothness(LogSumExpMax(1.0, 2)) == pytest.approx(0.5)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-100.0, max_value=100.0, allow_nan=False),
        min_size=1,
        max_size=6,
    ),
    st.floats(min_value=0.05, max_value=20.0),
)
def test_logsumexp_sandwich_property(values, lam):
    q = np.array(values)
    op = LogSumExpMax(lam, len(values))
    value = op.value(q)
    assert q.max() - 1e-9 <= value <= q.max() + lam * math.log(len(values)) + 1e-9
    grad = op.gradient(q)
    assert np.all(grad >= 0.0)
    assert grad.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-20.0, max_value=20.0, allow_nan=False),
        min_size=2,
        max_size=5,
    )
)
def test_sqrt_reg_policy_is_distribution(values):
    op = SqrtRegularized(1.0, len(values), smoothness=1.0)
    pi = op.policy(values)
    assert np.all(pi >= 0.0)
    assert abs(pi.sum() - 1.0) <= 1e-10
