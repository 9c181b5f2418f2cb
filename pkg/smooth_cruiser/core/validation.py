import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np
from numpy.typing import NDArray

from smooth_cruiser.core.environments import EnvSpec, GenerativeOracle, build_env
from smooth_cruiser.core.errors import (
    DegenerateRunError,
    InternalLogicError,
    InvalidArgumentError,
)
from smooth_cruiser.core.exact_solver import DEFAULT_TOL, ValueTable, solve_regularized
from smooth_cruiser.core.operators import SmoothOperator
from smooth_cruiser.core.parameters import PlannerConfig, clip_q
from smooth_cruiser.core.planner import SmoothCruiser
from smooth_cruiser.core.streams import CounterStream
from smooth_cruiser.schemas.reports import ConsistencyReport

logger = logging.getLogger(__name__)

REPORT_CONFIDENCE = 0.95
RUN_BLOCK_SIZE = 64


class CheckedSampler(SmoothCruiser):
    """SmoothCruiser whose Q estimates are the exact Q plus bounded noise.

    Noise is uniform on [-w, w] per action with w = accuracy * noise_scale, so
    every estimate is within the requested accuracy of the truth surely.
    """

    def __init__(
        self,
        cfg: PlannerConfig,
        op: SmoothOperator,
        oracle: GenerativeOracle,
        exact: ValueTable,
        sampler_stream: CounterStream,
        noise_scale: float = 1.0,
    ):
        super().__init__(cfg, op, oracle, action_stream=sampler_stream)
        if exact.q.shape != (oracle.model.n_states, cfg.n_actions):
            raise InvalidArgumentError(
                "exact value table does not match the environment"
            )
        if not 0.0 <= noise_scale <= 1.0:
            raise InvalidArgumentError(
                f"noise scale must lie in [0, 1], got {noise_scale}"
            )
        self.exact = exact
        self.noise_scale = noise_scale

    def _q_estimate(self, s: int, eps: float, depth: int) -> NDArray[np.float64]:
        q = self.exact.q[s]
        width = eps * self.noise_scale
        u = self.action_stream.take(self.cfg.n_actions)
        q_hat = clip_q(q + (2.0 * u - 1.0) * width, self.cfg.v_max)
        gap = float(np.max(np.abs(q_hat - q)))
        if gap > width * (1.0 + 1e-12) + 1e-15:
            raise InternalLogicError(
                f"noisy estimate off by {gap:.6g}, allowed {width:.6g}"
            )
        return q_hat


def sample_v_check(
    cfg: PlannerConfig,
    op: SmoothOperator,
    env: GenerativeOracle,
    exact: ValueTable,
    s: int,
    eps: float,
    sampler_stream: Optional[CounterStream] = None,
    noise_scale: float = 1.0,
) -> float:
    if sampler_stream is None:
        sampler_stream = env.stream.spawn(env.stream.stream_id + 1)
    return CheckedSampler(cfg, op, env, exact, sampler_stream, noise_scale).sample_v(
        s, eps
    )


def hoeffding_halfwidth(cfg: PlannerConfig, confidence: float, n: float) -> float:
    """Half-width t with 2 exp(-n t^2 / (2 C_gamma^2)) = 1 - confidence."""
    if not 0.0 < confidence < 1.0:
        raise InvalidArgumentError(f"confidence must lie in (0, 1), got {confidence}")
    return cfg.c_gamma * math.sqrt(2.0 * math.log(2.0 / (1.0 - confidence)) / n)


def size_n_sim(cfg: PlannerConfig, confidence: float, slack: float) -> int:
    """Smallest N with 2 exp(-N slack^2 / (2 C_gamma^2)) <= 1 - confidence."""
    if not 0.0 < confidence < 1.0:
        raise InvalidArgumentError(f"confidence must lie in (0, 1), got {confidence}")
    if not slack > 0.0:
        raise InvalidArgumentError(f"slack must be positive, got {slack}")
    raw = 2.0 * cfg.c_gamma**2 * math.log(2.0 / (1.0 - confidence)) / slack**2
    return max(1, math.ceil(raw))


def run_consistency(
    cfg: PlannerConfig,
    op: SmoothOperator,
    spec: EnvSpec,
    s: int,
    eps: float,
    n_sim: int,
    seed: int,
    keep_runs: bool = False,
    reward_noise: float = 0.0,
    noise_scale: float = 1.0,
    tol: float = DEFAULT_TOL,
) -> ConsistencyReport:
    """Mean bias of ``n_sim`` checked samples against the exact value at ``s``."""
    if n_sim < 1:
        raise InvalidArgumentError(f"n_sim must be at least 1, got {n_sim}")
    if not eps > 0.0:
        raise InvalidArgumentError(f"accuracy must be positive, got {eps}")
    if eps >= cfg.v_max:
        raise DegenerateRunError(
            f"eps={eps} >= V_max={cfg.v_max:.6g}: every sample would be 0"
        )
    model = build_env(spec, reward_noise)
    model.check_indices(s, 0)
    exact = solve_regularized(model, op, cfg.gamma, tol)
    v_exact = float(exact.v[s])
    root = CounterStream(seed)

    def one_run(i: int) -> float:
        oracle = GenerativeOracle(model, root.spawn(2 * i, RUN_BLOCK_SIZE))
        sampler = CheckedSampler(
            cfg, op, oracle, exact, root.spawn(2 * i + 1, RUN_BLOCK_SIZE), noise_scale
        )
        return sampler.sample_v(s, eps)

    if cfg.parallel:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
            outputs: List[float] = list(pool.map(one_run, range(n_sim)))
    else:
        outputs = [one_run(i) for i in range(n_sim)]

    deltas = [out - v_exact for out in outputs]
    delta_hat = math.fsum(deltas) / n_sim
    std = float(np.std(deltas, ddof=1)) if n_sim > 1 else 0.0
    violations = sum(1 for out in outputs if abs(out) > cfg.c_gamma * (1.0 + 1e-9))

    warnings = []
    if eps > cfg.kappa / 4.0:
        message = (
            f"eps={eps:.6g} exceeds kappa/4={cfg.kappa / 4.0:.6g} "
            "for this environment"
        )
        logger.warning(message)
        warnings.append(message)

    report = ConsistencyReport(
        env=str(spec),
        state=s,
        epsilon=eps,
        n_sim=n_sim,
        seed=seed,
        delta_hat=delta_hat,
        std=std,
        std_error=std / math.sqrt(n_sim),
        hoeffding_halfwidth=hoeffding_halfwidth(cfg, REPORT_CONFIDENCE, n_sim),
        v_exact=v_exact,
        c_gamma=cfg.c_gamma,
        kappa=cfg.kappa,
        bound_violations=violations,
        within_bias_bound=abs(delta_hat) <= eps,
        warnings=warnings,
        runs=outputs if keep_runs else None,
    )
    logger.info(
        f"Consistency {spec} s={s} eps={eps:.6g}: delta_hat={delta_hat:.4g} "
        f"std={std:.4g} over {n_sim} runs"
    )
    return report
