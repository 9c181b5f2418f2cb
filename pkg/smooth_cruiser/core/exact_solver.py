import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from numpy.typing import NDArray

from smooth_cruiser.core.environments import TabularMdp
from smooth_cruiser.core.errors import InvalidArgumentError, NumericError
from smooth_cruiser.core.operators import SmoothOperator

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class ValueTable:
    """Fixed point of V(s) = F(Q_s) with Q_s(a) = R(s, a) + gamma E[V(z)]."""

    v: NDArray[np.float64]
    q: NDArray[np.float64]
    residual: float
    iterations: int
    gamma: float
    deltas: List[float] = field(default_factory=list)

    def policy(self, op: SmoothOperator) -> NDArray[np.float64]:
        return np.vstack([op.gradient(row) for row in self.q])


class _HardMax:
    kind = "max"

    def value_rows(self, q_rows: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.max(q_rows, axis=1)


def _check_inputs(gamma: float, tol: float) -> None:
    if not (math.isfinite(gamma) and 0.0 <= gamma < 1.0):
        raise InvalidArgumentError(f"discount must lie in [0, 1), got {gamma}")
    if not (math.isfinite(tol) and tol > 0.0):
        raise InvalidArgumentError(f"tolerance must be positive, got {tol}")


def _bellman(model: TabularMdp, gamma: float, v: NDArray[np.float64]):
    return model.reward_mean + gamma * np.einsum("saz,z->sa", model.transition, v)


def _iterate(model: TabularMdp, op, gamma: float, tol: float) -> ValueTable:
    _check_inputs(gamma, tol)
    # change <= tol (1 - gamma) / gamma bounds the residual by tol
    threshold = tol * (1.0 - gamma) / gamma if gamma > 0 else math.inf
    v = np.zeros(model.n_states)
    deltas: List[float] = []
    for iteration in range(1, MAX_ITERATIONS + 1):
        q = _bellman(model, gamma, v)
        v_new = op.value_rows(q)
        delta = float(np.max(np.abs(v_new - v)))
        deltas.append(delta)
        v = v_new
        if delta <= threshold:
            break
    else:
        raise NumericError(
            f"value iteration did not converge in {MAX_ITERATIONS} iterations",
            details={"last_change": deltas[-1], "threshold": threshold},
        )

    q = _bellman(model, gamma, v)
    v = op.value_rows(q)
    residual = float(np.max(np.abs(op.value_rows(_bellman(model, gamma, v)) - v)))
    logger.info(
        f"Solved {model.name} with {op.kind} in {iteration} iterations, "
        f"residual={residual:.3g}"
    )
    return ValueTable(
        v=v, q=q, residual=residual, iterations=iteration, gamma=gamma, deltas=deltas
    )


def solve_regularized(
    model: TabularMdp, op: SmoothOperator, gamma: float, tol: float = DEFAULT_TOL
) -> ValueTable:
    if op.n_actions != model.n_actions:
        raise InvalidArgumentError(
            f"operator expects {op.n_actions} actions, model has {model.n_actions}"
        )
    return _iterate(model, op, gamma, tol)


def solve_unregularized(
    model: TabularMdp, gamma: float, tol: float = DEFAULT_TOL
) -> ValueTable:
    return _iterate(model, _HardMax(), gamma, tol)


def regularization_gap_bound(op: SmoothOperator, gamma: float) -> float:
    _check_inputs(gamma, DEFAULT_TOL)
    return op.M / (1.0 - gamma)


def regularization_gap(regularized: ValueTable, unregularized: ValueTable) -> float:
    return float(np.max(np.abs(regularized.v - unregularized.v)))
