"""Sample-complexity predictions and bounds.

Large counts are evaluated in log space; ``*_log10`` helpers return the base-10
logarithm for values that do not fit a double.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from smooth_cruiser.core.errors import (
    InfeasibleAccuracyError,
    InvalidArgumentError,
    InvalidConfigurationError,
)
from smooth_cruiser.core.parameters import (
    PlannerConfig,
    depth_exponent,
    linearized_accuracy,
    n_of_eps,
    next_accuracy,
    predict_depth,
)
from smooth_cruiser.schemas.reports import BoundCurveRow, LambdaSweepRow

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 40
DELTA_GRID_STEPS = 1074
MEMO_DIGITS = 12
LN10 = math.log(10.0)


@dataclass(frozen=True)
class BoundInputs:
    """A PlannerConfig seen through the complexity analysis.

    ``continuous_depth`` selects how the sparse-sampling closed form measures
    depth: the real value 2 log_gamma(eps (1-gamma)/(1+M)) or its ceiling.
    Only the real value keeps the recurrence under ``bound_small_eps``: the
    ceiling inflates coarse-accuracy counts more than the base count at kappa,
    and the recurrence then exceeds the bound at many accuracies below kappa.
    """

    config: PlannerConfig
    continuous_depth: bool = True
    _cache: Dict[float, float] = field(
        default_factory=dict, init=False, compare=False, repr=False
    )

    @classmethod
    def create(
        cls,
        gamma: float,
        lam: float,
        n_actions: int,
        delta_prime: float,
        n_scale: float = 1.0,
        smoothness: Optional[float] = None,
        zero_offset: Optional[float] = None,
        continuous_depth: bool = True,
    ) -> "BoundInputs":
        cfg = PlannerConfig(
            gamma=gamma,
            lam=lam,
            n_actions=n_actions,
            delta_prime=delta_prime,
            n_scale=n_scale,
            allow_condition_violation=True,
            override_log_level=logging.DEBUG,
            smoothness=smoothness,
            zero_offset=zero_offset,
        )
        return cls(cfg, continuous_depth)

    def with_delta_prime(self, delta_prime: float) -> "BoundInputs":
        config = self.config.with_delta_prime(delta_prime)
        return BoundInputs(config, self.continuous_depth)

    @property
    def gamma(self) -> float:
        return self.config.gamma

    @property
    def n_actions(self) -> int:
        return self.config.n_actions

    @property
    def delta_prime(self) -> float:
        return self.config.delta_prime

    @property
    def kappa(self) -> float:
        return self.config.kappa

    @property
    def v_max(self) -> float:
        return self.config.v_max

    @property
    def alpha(self) -> float:
        return self.config.alpha

    @property
    def beta(self) -> float:
        return self.config.beta

    @property
    def eta2(self) -> float:
        return self.config.eta2

    @property
    def condition_holds(self) -> bool:
        return self.config.condition_holds

    @property
    def log_base_count(self) -> float:
        """ln of the per-sampleV count at eps = kappa."""
        return log_sparse(self, self.kappa, self.continuous_depth)

    @property
    def eta1(self) -> float:
        return self.kappa**2 * math.exp(self.log_base_count)


def _require_positive(eps: float) -> None:
    if not eps > 0.0:
        raise InvalidArgumentError(f"accuracy must be positive, got {eps}")


def _require_condition(inputs: BoundInputs) -> None:
    if not inputs.condition_holds:
        raise InvalidConfigurationError(
            "depth-growth condition eta2 >= 0 violated: need "
            "beta(delta') >= (1-gamma)(1-sqrt(gamma))/(2 gamma K L)",
            details={
                "beta": inputs.beta,
                "threshold": inputs.config.condition_threshold,
                "delta_prime": inputs.delta_prime,
            },
        )


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def log_sparse(
    inputs: BoundInputs, eps: float, continuous_depth: bool = False
) -> float:
    cfg = inputs.config
    if continuous_depth:
        depth = depth_exponent(cfg, eps)
    else:
        depth = float(predict_depth(cfg, eps))
    if depth == 0.0:
        return 0.0
    total = depth * math.log(2.0 * inputs.alpha / (eps * eps))
    if depth != 1.0:
        total += 0.5 * depth * (depth - 1.0) * math.log(cfg.gamma)
    return total


def bound_sparse(
    inputs: BoundInputs, eps: float, continuous_depth: bool = False
) -> float:
    """gamma^(H(H-1)/2) (2 alpha / eps^2)^H, the uniform look-ahead count."""
    _require_positive(eps)
    return _safe_exp(log_sparse(inputs, eps, continuous_depth))


def bound_sparse_log10(
    inputs: BoundInputs, eps: float, continuous_depth: bool = False
) -> float:
    _require_positive(eps)
    return log_sparse(inputs, eps, continuous_depth) / LN10


def _sim(inputs: BoundInputs, eps: float) -> float:
    key = round(math.log(eps), MEMO_DIGITS)
    cached = inputs._cache.get(key)
    if cached is not None:
        return cached
    if eps >= inputs.kappa:
        value = _safe_exp(log_sparse(inputs, eps, inputs.continuous_depth))
    else:
        gamma = inputs.gamma
        root = linearized_accuracy(inputs.kappa, eps)
        value = (
            1.0
            + _sim(inputs, next_accuracy(eps, gamma))
            + inputs.n_actions
            * n_of_eps(inputs.config, root)
            * _sim(inputs, next_accuracy(root, gamma))
        )
    inputs._cache[key] = value
    return value


def sim_recurrence(inputs: BoundInputs, eps: float) -> float:
    """Simulated per-sampleV oracle count.

    Below kappa: 1 + n(eps/sqrt(g)) + K N(sqrt(kappa eps)) n(sqrt(kappa eps/g));
    from kappa up the sparse-sampling closed form applies.
    """
    _require_positive(eps)
    _require_condition(inputs)
    return _sim(inputs, eps)


def _log_small_eps(inputs: BoundInputs, eps: float) -> float:
    kappa, gamma = inputs.kappa, inputs.gamma
    if eps > kappa * (1.0 + 1e-12):
        raise InvalidArgumentError(
            f"small-accuracy bound needs eps <= kappa={kappa:.6g}, got {eps}"
        )
    poly = math.log(kappa / (gamma * eps)) / math.log(1.0 / gamma)
    # written so that eps == kappa reproduces the base count bit for bit
    return (
        inputs.log_base_count
        + 2.0 * (math.log(kappa) - math.log(eps))
        + inputs.eta2 * math.log(poly)
    )


def bound_small_eps(inputs: BoundInputs, eps: float) -> float:
    """eta1 [log_{1/g}(kappa / (g eps))]^eta2 / eps^2 for eps <= kappa."""
    _require_positive(eps)
    _require_condition(inputs)
    return _safe_exp(_log_small_eps(inputs, eps))


def bound_small_eps_log10(inputs: BoundInputs, eps: float) -> float:
    _require_positive(eps)
    _require_condition(inputs)
    return _log_small_eps(inputs, eps) / LN10


def predict_calls(inputs: BoundInputs, eps: float) -> int:
    """Exact oracle-call count of the planner, walking its recursion tree."""
    _require_positive(eps)
    cfg = inputs.config
    K = cfg.n_actions
    kappa, v_max, gamma = cfg.kappa, cfg.v_max, cfg.gamma
    sample_counts: Dict[float, int] = {}
    estimate_counts: Dict[float, int] = {}

    def estimate_q(e: float) -> int:
        if e not in estimate_counts:
            estimate_counts[e] = (
                K * n_of_eps(cfg, e) * (1 + sample_v(next_accuracy(e, gamma)))
            )
        return estimate_counts[e]

    def sample_v(e: float) -> int:
        if e not in sample_counts:
            if e >= v_max:
                count = 0
            elif e >= kappa:
                count = estimate_q(e)
            else:
                count = (
                    estimate_q(linearized_accuracy(kappa, e))
                    + 1
                    + sample_v(next_accuracy(e, gamma))
                )
            sample_counts[e] = count
        return sample_counts[e]

    return estimate_q(eps)


def bound_monte_carlo(inputs: BoundInputs, eps: float) -> int:
    """Strong-regularization limit: K N(eps) rollouts of depth max(H(eps), 1)."""
    cfg = inputs.config
    return cfg.n_actions * n_of_eps(cfg, eps) * max(predict_depth(cfg, eps), 1)


@dataclass(frozen=True)
class ThmConstants:
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float

    @classmethod
    def from_inputs(cls, inputs: BoundInputs) -> "ThmConstants":
        cfg = inputs.config
        g, K, L, M = cfg.gamma, cfg.n_actions, cfg.L, cfg.M
        one_minus_root = 1.0 - math.sqrt(g)
        return cls(
            c1=18.0
            * (1.0 + M) ** 2
            * math.exp(inputs.log_base_count)
            / (K**2 * L**2 * (1.0 - g) ** 4),
            c2=2.0 * K,
            c3=1.0 / math.log(1.0 / g),
            c4=one_minus_root / (g * K * L),
            c5=36.0
            * (1.0 + M) ** 2
            * g
            * K**3
            * L**2
            / ((1.0 - g) ** 5 * one_minus_root**4),
        )


def theorem_envelope(inputs: BoundInputs, eps: float) -> float:
    """(c1/eps^4) log(c2/d') [c3 log(c4/eps)]^log2(c5 log(c2/d')).

    Bounds N(eps) times the per-sampleV count for eps <= kappa.
    """
    _require_positive(eps)
    c = ThmConstants.from_inputs(inputs)
    log_conf = math.log(c.c2 / inputs.delta_prime)
    exponent = math.log2(c.c5 * log_conf)
    log_value = (
        math.log(c.c1)
        - 4.0 * math.log(eps)
        + math.log(log_conf)
        + exponent * math.log(c.c3 * math.log(c.c4 / eps))
    )
    return _safe_exp(log_value)


def choose_delta_prime(inputs: BoundInputs, eps: float, delta: float) -> float:
    """Largest delta' = 2^-j with delta' * n(eps, delta') <= delta.

    eps^5 replaces the grid point when it is feasible and larger.
    """
    if not 0.0 < eps < 1.0:
        raise InvalidArgumentError(f"accuracy must lie in (0, 1), got {eps}")
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")

    def failure_mass(delta_prime: float) -> float:
        return delta_prime * predict_calls(inputs.with_delta_prime(delta_prime), eps)

    best = None
    for j in range(1, DELTA_GRID_STEPS + 1):
        candidate = math.ldexp(1.0, -j)
        if failure_mass(candidate) <= delta:
            best = candidate
            break

    floor = eps**5
    floor_mass = failure_mass(floor) if floor > 0.0 else math.inf
    if floor_mass <= delta and (best is None or floor > best):
        best = floor
    if best is None:
        raise InfeasibleAccuracyError(
            f"no delta' satisfies delta' * n(eps, delta') <= {delta} at eps={eps}",
            details={"delta": delta, "epsilon": eps, "floor_mass": floor_mass},
        )
    logger.info(f"Chose delta'={best:.6g} for eps={eps:.6g}, delta={delta:.6g}")
    return best


def accuracy_grid(kappa: float, points: int = DEFAULT_GRID_POINTS) -> List[float]:
    return [float(x) for x in np.geomspace(10.0 * kappa, kappa / 1000.0, points)]


def _log10_count(value: float) -> float:
    if value <= 0.0:
        return -math.inf
    return math.log10(value)


def bound_curve(inputs: BoundInputs, grid: Iterable[float]) -> List[BoundCurveRow]:
    """Simulated count, bounds and exact call prediction per accuracy.

    The lemma columns are filled for eps <= kappa under continuous depth only.
    """
    _require_condition(inputs)
    cfg = inputs.config
    if not inputs.continuous_depth:
        logger.warning(
            "Ceiling depth does not keep the recurrence under the small-accuracy "
            "bound; leaving the bound_lemma columns empty"
        )
    rows = []
    for eps in grid:
        simulated = sim_recurrence(inputs, eps)
        if inputs.continuous_depth and eps <= inputs.kappa:
            lemma_log10: Optional[float] = bound_small_eps_log10(inputs, eps)
            lemma: Optional[float] = bound_small_eps(inputs, eps)
        else:
            lemma_log10 = lemma = None
        predicted = predict_calls(inputs, eps)
        rows.append(
            BoundCurveRow(
                epsilon=eps,
                simulated=simulated,
                bound_lemma=lemma,
                bound_sparse=bound_sparse(inputs, eps, inputs.continuous_depth),
                predicted_calls=predicted,
                simulated_log10=_log10_count(simulated),
                bound_lemma_log10=lemma_log10,
                bound_sparse_log10=bound_sparse_log10(
                    inputs, eps, inputs.continuous_depth
                ),
                predicted_calls_log10=math.log10(predicted),
            )
        )
    logger.info(f"Computed {len(rows)} bound rows (kappa={cfg.kappa:.6g})")
    return rows


def lambda_sweep(
    gamma: float,
    n_actions: int,
    delta_prime: float,
    rel_err: float,
    lam_grid: Sequence[float],
    continuous_depth: bool = True,
) -> List[LambdaSweepRow]:
    """Recurrence calls and sparse-sampling calls at eps = rel_err * V_max(lam).

    Both counts are K N(eps) times the per-sampleV count, with the same depth
    convention.
    """
    if not 0.0 < rel_err < 1.0:
        raise InvalidArgumentError(f"relative error must lie in (0, 1), got {rel_err}")
    rows = []
    for lam in lam_grid:
        if not lam > 0.0:
            raise InvalidArgumentError(f"lambda grid must be positive, got {lam}")
        inputs = BoundInputs.create(
            gamma, lam, n_actions, delta_prime, continuous_depth=continuous_depth
        )
        eps = rel_err * inputs.v_max
        flagged = not inputs.condition_holds
        if flagged:
            logger.warning(f"lambda={lam:.6g}: depth-growth condition violated")
        scale = n_actions * n_of_eps(inputs.config, eps)
        calls = scale * _sim(inputs, eps)
        sparse_calls = scale * bound_sparse(inputs, eps, continuous_depth)
        rows.append(
            LambdaSweepRow(
                lam=lam,
                epsilon=eps,
                calls=calls,
                sparse_calls=sparse_calls,
                ratio=calls / sparse_calls,
                condition_violated=flagged,
            )
        )
    return rows


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def polylog_adjusted_slope(
    inputs: BoundInputs, lo: float, hi: float, points: int = 20
) -> Tuple[float, float]:
    """Slopes of ln(total calls) against ln(1/eps) over [lo, hi].

    Returns (raw, adjusted); the adjusted fit first divides out
    [log_{1/g}(kappa/(g eps))]^eta2.
    """
    _require_condition(inputs)
    kappa, gamma = inputs.kappa, inputs.gamma
    grid = np.geomspace(lo, hi, points)
    x = -np.log(grid)
    log_totals = np.array(
        [
            math.log(inputs.n_actions * n_of_eps(inputs.config, e))
            + math.log(sim_recurrence(inputs, e))
            for e in grid
        ]
    )
    poly = np.log(kappa / (gamma * grid)) / math.log(1.0 / gamma)
    polylog = inputs.eta2 * np.log(poly)
    raw, _ = np.polyfit(x, log_totals, 1)
    adjusted, _ = np.polyfit(x, log_totals - polylog, 1)
    return float(raw), float(adjusted)
