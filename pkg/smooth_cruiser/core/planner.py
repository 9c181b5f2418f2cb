import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from numpy.typing import NDArray

from smooth_cruiser.core.complexity import BoundInputs, predict_calls
from smooth_cruiser.core.environments import GenerativeOracle
from smooth_cruiser.core.errors import InternalLogicError, InvalidArgumentError
from smooth_cruiser.core.operators import SmoothOperator
from smooth_cruiser.core.parameters import (
    PlannerConfig,
    clip_q,
    linearized_accuracy,
    n_of_eps,
    next_accuracy,
    predict_depth,
)
from smooth_cruiser.core.streams import CounterStream

logger = logging.getLogger(__name__)

# relative slack on the |output| <= C_gamma check
BOUND_RTOL = 1e-9


@dataclass
class PlanResult:
    estimate: float
    oracle_calls: int
    predicted_calls: int
    max_recursion_depth_seen: int
    state: int = 0
    epsilon: float = math.nan
    q_estimate: List[float] = field(default_factory=list)


class SmoothCruiser:
    """Recursive low-bias value estimator driven by a generative oracle.

    ``sample_v`` picks one of three regimes from the requested accuracy:
    nothing to do above V_max, a plain smoothed average of estimated action
    values down to kappa, and below kappa a first-order expansion of F around
    a coarser estimate plus one sampled transition.
    """

    def __init__(
        self,
        cfg: PlannerConfig,
        op: SmoothOperator,
        oracle: GenerativeOracle,
        action_stream: Optional[CounterStream] = None,
    ):
        if op.n_actions != cfg.n_actions:
            raise InvalidArgumentError(
                f"operator has {op.n_actions} actions, config has {cfg.n_actions}"
            )
        if oracle.model.n_actions != cfg.n_actions:
            raise InvalidArgumentError(
                f"environment has {oracle.model.n_actions} actions, "
                f"config has {cfg.n_actions}"
            )
        self.cfg = cfg
        self.op = op
        self.oracle = oracle
        if action_stream is None:
            action_stream = oracle.stream.spawn(oracle.stream.stream_id + 1)
        self.action_stream = action_stream
        self._depth_limit = 0
        self._depth_seen = 0
        self._depth_lock = threading.Lock()

    def _enter(self, eps: float) -> None:
        if not (eps > 0.0):
            raise InvalidArgumentError(f"accuracy must be positive, got {eps}")
        self._depth_limit = predict_depth(self.cfg, eps) + self.cfg.max_depth_slack
        self._depth_seen = 0

    def _visit(self, depth: int) -> None:
        if depth > self._depth_limit:
            raise InternalLogicError(
                f"recursion depth {depth} exceeds guard {self._depth_limit}",
                details={"depth": depth, "limit": self._depth_limit},
            )
        with self._depth_lock:
            self._depth_seen = max(self._depth_seen, depth)

    def _draw_action(self, weights: NDArray[np.float64]) -> int:
        cdf = np.cumsum(weights)
        u = self.action_stream.uniform()
        return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)

    def _check_bound(self, value: float) -> float:
        bound = self.cfg.c_gamma
        if not abs(value) <= bound * (1.0 + BOUND_RTOL):
            raise InternalLogicError(
                f"sample {value:.6g} outside [-C_gamma, C_gamma] "
                f"with C_gamma={bound:.6g}"
            )
        return value

    def _sample_v(self, s: int, eps: float, depth: int) -> float:
        self._visit(depth)
        kappa, v_max = self.cfg.kappa, self.cfg.v_max
        if eps >= v_max:
            return 0.0
        if eps >= kappa:
            logger.debug(f"sample_v s={s} eps={eps:.6g} depth={depth}: average")
            return self._check_bound(self.op.value(self._q_estimate(s, eps, depth)))

        logger.debug(f"sample_v s={s} eps={eps:.6g} depth={depth}: linearize")
        q_hat = self._q_estimate(s, linearized_accuracy(kappa, eps), depth)
        grad = self.op.gradient(q_hat)
        norm = float(np.sum(np.abs(grad)))
        if not norm > 0.0:
            raise InternalLogicError("operator gradient has zero l1-norm")
        action = self._draw_action(grad / norm)
        reward, next_state = self.oracle(s, action)
        v_next = self._sample_v(
            next_state, next_accuracy(eps, self.cfg.gamma), depth + 1
        )
        out = (
            self.op.value(q_hat)
            - float(q_hat @ grad)
            + (reward + self.cfg.gamma * v_next) * norm
        )
        return self._check_bound(out)

    def _one_sample(self, s: int, a: int, next_eps: float, depth: int) -> float:
        reward, next_state = self.oracle(s, a)
        return reward + self.cfg.gamma * self._sample_v(next_state, next_eps, depth + 1)

    def _q_estimate(self, s: int, eps: float, depth: int) -> NDArray[np.float64]:
        n = n_of_eps(self.cfg, eps)
        next_eps = next_accuracy(eps, self.cfg.gamma)
        q_hat = np.empty(self.cfg.n_actions)
        for a in range(self.cfg.n_actions):
            if self.cfg.parallel and depth == 0:
                with ThreadPoolExecutor(max_workers=self.cfg.max_workers) as pool:
                    samples = list(
                        pool.map(
                            lambda _: self._one_sample(s, a, next_eps, depth), range(n)
                        )
                    )
            else:
                samples = [self._one_sample(s, a, next_eps, depth) for _ in range(n)]
            q_hat[a] = math.fsum(samples) / n
        return clip_q(q_hat, self.cfg.v_max)

    def sample_v(self, s: int, eps: float) -> float:
        self.oracle.model.check_indices(s, 0)
        self._enter(eps)
        return self._sample_v(s, eps, 0)

    def estimate_q(self, s: int, eps: float) -> NDArray[np.float64]:
        self.oracle.model.check_indices(s, 0)
        self._enter(eps)
        return self._q_estimate(s, eps, 0)

    def plan(self, s: int, eps: float) -> PlanResult:
        self._enter(eps)
        start = self.oracle.call_count
        predicted = predict_calls(BoundInputs(self.cfg), eps)
        logger.info(
            f"Planning from state {s} at eps={eps:.6g}: "
            f"N(eps)={n_of_eps(self.cfg, eps)}, predicted calls={predicted}"
        )
        q_hat = self.estimate_q(s, eps)
        estimate = self.op.value(q_hat)
        calls = self.oracle.call_count - start
        if self.cfg.n_scale == 1.0 and calls != predicted:
            logger.warning(f"Observed {calls} oracle calls, predicted {predicted}")
        logger.info(f"Plan finished: estimate={estimate:.6g}, oracle calls={calls}")
        return PlanResult(
            estimate=estimate,
            oracle_calls=calls,
            predicted_calls=predicted,
            max_recursion_depth_seen=self._depth_seen,
            state=s,
            epsilon=eps,
            q_estimate=[float(x) for x in q_hat],
        )


def sample_v(
    cfg: PlannerConfig,
    op: SmoothOperator,
    oracle: GenerativeOracle,
    s: int,
    eps: float,
    action_stream: Optional[CounterStream] = None,
) -> float:
    return SmoothCruiser(cfg, op, oracle, action_stream).sample_v(s, eps)


def estimate_q(
    cfg: PlannerConfig,
    op: SmoothOperator,
    oracle: GenerativeOracle,
    s: int,
    eps: float,
    action_stream: Optional[CounterStream] = None,
) -> NDArray[np.float64]:
    return SmoothCruiser(cfg, op, oracle, action_stream).estimate_q(s, eps)


def smooth_cruiser(
    cfg: PlannerConfig,
    op: SmoothOperator,
    oracle: GenerativeOracle,
    s: int,
    eps: float,
    action_stream: Optional[CounterStream] = None,
) -> PlanResult:
    return SmoothCruiser(cfg, op, oracle, action_stream).plan(s, eps)
