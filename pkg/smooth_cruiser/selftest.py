"""Fast named checks run by ``smooth-cruiser selftest``."""

import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from smooth_cruiser.core.complexity import BoundInputs, predict_calls
from smooth_cruiser.core.environments import (
    GenerativeOracle,
    TabularMdp,
    build_chain,
)
from smooth_cruiser.core.errors import InvalidArgumentError
from smooth_cruiser.core.exact_solver import solve_regularized, solve_unregularized
from smooth_cruiser.core.operators import LogSumExpMax, SqrtRegularized
from smooth_cruiser.core.parameters import PlannerConfig, clip_q, n_of_eps
from smooth_cruiser.core.planner import smooth_cruiser
from smooth_cruiser.schemas.reports import SelfTestCheck

logger = logging.getLogger(__name__)

# Reference values; the hidden --corrupt hook overrides them to force failures.
EXPECTED: Dict[str, float] = {
    "logsumexp_tie_value": math.log(2.0),
    "softmax_weight": 0.75,
    "sqrt_reg_tie_value": math.sqrt(2.0),
    "sqrt_reg_multiplier": 1.5291,
    "max_gap_ties": 2.0 * math.log(3.0),
    "single_state_value": (1.0 + math.log(2.0)) / 0.5,
    "single_state_unregularized": 2.0,
    "regularization_gap": math.log(2.0) / 0.5,
    "n_of_eps_floor": 1.0,
    "kkt_tolerance": 1e-10,
}

Check = Callable[[Dict[str, float]], Tuple[bool, str]]
CHECKS: List[Tuple[str, Check]] = []


def check(name: str):
    def register(fn: Check) -> Check:
        CHECKS.append((name, fn))
        return fn

    return register


def _close(actual: float, expected: float, tol: float) -> Tuple[bool, str]:
    return abs(actual - expected) <= tol, f"got {actual:.12g}, expected {expected:.12g}"


def _single_state() -> TabularMdp:
    return TabularMdp(np.ones((1, 2, 1)), np.ones((1, 2)), name="single")


@check("logsumexp_tie_value")
def _lse_tie(ref):
    value = LogSumExpMax(1.0, 2).value([0.0, 0.0])
    return _close(value, ref["logsumexp_tie_value"], 1e-12)


@check("softmax_weight")
def _softmax(ref):
    grad = LogSumExpMax(1.0, 2).gradient([math.log(3.0), 0.0])
    return _close(float(grad[0]), ref["softmax_weight"], 1e-12)


@check("sqrt_reg_tie_value")
def _sqrt_tie(ref):
    op = SqrtRegularized(1.0, 2, smoothness=1.0)
    return _close(op.value([0.0, 0.0]), ref["sqrt_reg_tie_value"], 1e-10)


@check("sqrt_reg_multiplier")
def _sqrt_multiplier(ref):
    op = SqrtRegularized(1.0, 2, smoothness=1.0)
    return _close(op.solve_lagrange([1.0, 0.0]), ref["sqrt_reg_multiplier"], 1e-4)


@check("sqrt_reg_kkt_residual")
def _sqrt_kkt(ref):
    op = SqrtRegularized(1.0, 3, smoothness=1.0)
    residual = abs(float(np.sum(op.policy([0.3, 2.0, -1.0]))) - 1.0)
    return residual <= ref["kkt_tolerance"], f"residual {residual:.3g}"


@check("max_gap_ties")
def _max_gap(ref):
    gap = LogSumExpMax(2.0, 3).max_approx_gap([0.0, 0.0, 0.0])
    return _close(gap, ref["max_gap_ties"], 1e-12)


@check("logsumexp_smoothness")
def _smoothness(ref):
    op = LogSumExpMax(0.5, 3)
    rng = np.random.default_rng(0)
    worst = -math.inf
    for _ in range(200):
        x, y = rng.uniform(0.0, 10.0, size=(2, 3))
        gap = abs(op.value(x) - op.value(y) - float((x - y) @ op.gradient(y)))
        worst = max(worst, gap - op.L * float(np.sum((x - y) ** 2)))
    return worst <= 1e-9, f"worst excess {worst:.3g}"


@check("single_state_value")
def _single_value(ref):
    table = solve_regularized(_single_state(), LogSumExpMax(1.0, 2), 0.5)
    return _close(float(table.v[0]), ref["single_state_value"], 1e-10)


@check("single_state_unregularized")
def _single_unreg(ref):
    table = solve_unregularized(_single_state(), 0.5)
    return _close(float(table.v[0]), ref["single_state_unregularized"], 1e-10)


@check("regularization_gap")
def _reg_gap(ref):
    model = _single_state()
    gap = float(
        solve_regularized(model, LogSumExpMax(1.0, 2), 0.5).v[0]
        - solve_unregularized(model, 0.5).v[0]
    )
    return _close(gap, ref["regularization_gap"], 2e-10)


@check("n_of_eps_floor")
def _n_floor(ref):
    cfg = PlannerConfig(gamma=0.2, lam=0.1, n_actions=2, delta_prime=0.1)
    return _close(float(n_of_eps(cfg, 1e6)), ref["n_of_eps_floor"], 0.0)


@check("clip_contraction")
def _clip(ref):
    rng = np.random.default_rng(1)
    for _ in range(1000):
        x = rng.uniform(-5.0, 8.0, size=4)
        q = rng.uniform(0.0, 3.0, size=4)
        if np.max(np.abs(clip_q(x, 3.0) - q)) > np.max(np.abs(x - q)):
            return False, f"violated at x={x.tolist()}"
    return True, "1000 trials"


@check("oracle_determinism")
def _oracle(ref):
    model = build_chain(5, reward_noise=0.05)
    a = GenerativeOracle.seeded(model, 11)
    b = GenerativeOracle.seeded(model, 11)
    draws_a = [a(s % 5, s % 2) for s in range(50)]
    draws_b = [b(s % 5, s % 2) for s in range(50)]
    return draws_a == draws_b and a.call_count == 50, "50 paired draws"


@check("call_count_determinism")
def _call_counts(ref):
    model = build_chain(5)
    op = LogSumExpMax(10.0, 2)
    cfg = PlannerConfig(gamma=0.2, lam=10.0, n_actions=2, delta_prime=0.1)
    eps = 9.0
    counts = [
        smooth_cruiser(cfg, op, GenerativeOracle.seeded(model, seed), 0, eps)
        for seed in (1, 2)
    ]
    counts = [result.oracle_calls for result in counts]
    predicted = predict_calls(BoundInputs(cfg), eps)
    detail = f"observed {counts}, predicted {predicted}"
    return counts[0] == counts[1] == predicted, detail


def parse_corruptions(items: Optional[List[str]]) -> Dict[str, float]:
    overrides: Dict[str, float] = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or name not in EXPECTED:
            raise InvalidArgumentError(f"unknown selftest override '{item}'")
        try:
            overrides[name] = float(value)
        except ValueError as e:
            raise InvalidArgumentError(f"override '{item}' is not a number") from e
    return overrides


def run_selftest(overrides: Optional[Dict[str, float]] = None) -> List[SelfTestCheck]:
    reference = {**EXPECTED, **(overrides or {})}
    results = []
    for name, fn in CHECKS:
        try:
            passed, detail = fn(reference)
        except Exception as e:
            logger.error(f"Self-test {name} raised: {e}", exc_info=True)
            passed, detail = False, f"{type(e).__name__}: {e}"
        results.append(SelfTestCheck(name=name, passed=bool(passed), detail=detail))
    return results
