import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from smooth_cruiser.core.errors import InvalidArgumentError, InvalidConfigurationError
from smooth_cruiser.core.operators import SmoothOperator

logger = logging.getLogger(__name__)

N_CONSTANT = 18.0
C_GAMMA_FACTOR = 3.0
INTEGER_SNAP = 1e-9


@dataclass(frozen=True)
class DerivedConstants:
    kappa: float
    M: float
    L: float
    v_max: float
    c_gamma: float


@dataclass(frozen=True)
class PlannerConfig:
    """Global planner parameters (gamma, lambda, K, delta') and their knobs.

    ``smoothness`` and ``zero_offset`` default to the log-sum-exp values
    1/lambda and lambda ln K; use :meth:`for_operator` to take them from an
    operator instead.
    """

    gamma: float
    lam: float
    n_actions: int
    delta_prime: float
    n_scale: float = 1.0
    max_depth_slack: int = 2
    parallel: bool = False
    max_workers: Optional[int] = None
    allow_condition_violation: bool = False
    smoothness: Optional[float] = None
    zero_offset: Optional[float] = None
    override_log_level: int = field(
        default=logging.WARNING, compare=False, repr=False
    )

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and 0.0 <= self.gamma < 1.0):
            raise InvalidArgumentError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not (math.isfinite(self.lam) and self.lam > 0.0):
            raise InvalidArgumentError(f"lambda must be positive, got {self.lam}")
        if self.n_actions < 1:
            raise InvalidArgumentError(
                f"need at least one action, got {self.n_actions}"
            )
        if not 0.0 < self.delta_prime < 1.0:
            raise InvalidArgumentError(
                f"delta' must lie in (0, 1), got {self.delta_prime}"
            )
        if not (math.isfinite(self.n_scale) and self.n_scale > 0.0):
            raise InvalidArgumentError(f"n_scale must be positive, got {self.n_scale}")
        if self.max_depth_slack < 0:
            raise InvalidArgumentError(
                f"max_depth_slack must be nonnegative, got {self.max_depth_slack}"
            )
        if self.max_workers is not None and self.max_workers < 1:
            raise InvalidArgumentError(
                f"max_workers must be at least 1, got {self.max_workers}"
            )
        for name in ("smoothness", "zero_offset"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value >= 0.0):
                raise InvalidArgumentError(
                    f"{name} must be finite and >= 0, got {value}"
                )
        if self.L <= 0.0:
            raise InvalidArgumentError("smoothness constant must be positive")

        if not self.condition_holds:
            message = (
                "depth-growth condition eta2 >= 0 violated: need "
                "beta(delta') >= (1-gamma)(1-sqrt(gamma))/(2 gamma K L), got "
                f"beta={self.beta:.6g} < {self.condition_threshold:.6g}; "
                "choose a smaller delta'"
            )
            if not self.allow_condition_violation:
                raise InvalidConfigurationError(
                    message,
                    details={
                        "beta": self.beta,
                        "threshold": self.condition_threshold,
                        "delta_prime": self.delta_prime,
                    },
                )
            logger.log(self.override_log_level, f"Proceeding with override: {message}")

    @classmethod
    def for_operator(
        cls, op: SmoothOperator, gamma: float, delta_prime: float, **kwargs
    ) -> "PlannerConfig":
        return cls(
            gamma=gamma,
            lam=op.lam,
            n_actions=op.n_actions,
            delta_prime=delta_prime,
            smoothness=op.L,
            zero_offset=op.M,
            **kwargs,
        )

    def with_delta_prime(self, delta_prime: float) -> "PlannerConfig":
        return replace(
            self,
            delta_prime=delta_prime,
            allow_condition_violation=True,
            override_log_level=logging.DEBUG,
        )

    @property
    def L(self) -> float:
        return 1.0 / self.lam if self.smoothness is None else self.smoothness

    @property
    def M(self) -> float:
        if self.zero_offset is None:
            return self.lam * math.log(self.n_actions)
        return self.zero_offset

    @cached_property
    def constants(self) -> DerivedConstants:
        g = self.gamma
        return DerivedConstants(
            kappa=(1.0 - math.sqrt(g)) / (self.n_actions * self.L),
            M=self.M,
            L=self.L,
            v_max=(1.0 + self.M) / (1.0 - g),
            c_gamma=C_GAMMA_FACTOR * (1.0 + self.M) / (1.0 - g) ** 2,
        )

    @property
    def kappa(self) -> float:
        return self.constants.kappa

    @property
    def v_max(self) -> float:
        return self.constants.v_max

    @property
    def c_gamma(self) -> float:
        return self.constants.c_gamma

    @property
    def log_confidence(self) -> float:
        return math.log(2.0 * self.n_actions / self.delta_prime)

    @property
    def n_coefficient(self) -> float:
        """N(eps) * eps^2 before scaling and rounding."""
        g = self.gamma
        return (
            N_CONSTANT
            * (1.0 + self.M) ** 2
            / ((1.0 - g) ** 4 * (1.0 - math.sqrt(g)) ** 2)
            * self.log_confidence
        )

    @property
    def alpha(self) -> float:
        return self.n_coefficient * self.n_actions

    @property
    def beta(self) -> float:
        return self.alpha * self.n_actions * self.L / (1.0 - math.sqrt(self.gamma))

    @property
    def condition_threshold(self) -> float:
        g = self.gamma
        if g == 0.0:
            return math.inf
        return (1.0 - g) * (1.0 - math.sqrt(g)) / (2.0 * g * self.n_actions * self.L)

    @property
    def condition_holds(self) -> bool:
        return self.beta >= self.condition_threshold

    @property
    def eta2(self) -> float:
        g = self.gamma
        if g == 0.0:
            return -math.inf
        return math.log2(g / (1.0 - g) * 2.0 * self.beta / self.kappa)


def _require_positive(eps: float) -> None:
    if not eps > 0.0 or math.isnan(eps):
        raise InvalidArgumentError(f"accuracy must be positive, got {eps}")


def n_of_eps(cfg: PlannerConfig, eps: float) -> int:
    _require_positive(eps)
    raw = cfg.n_scale * cfg.n_coefficient / (eps * eps)
    return max(1, math.ceil(raw))


def zeta(cfg: PlannerConfig, eps: float) -> float:
    _require_positive(eps)
    if eps >= cfg.v_max:
        return math.inf
    if eps >= cfg.kappa:
        return eps
    return linearized_accuracy(cfg.kappa, eps)


def next_accuracy(eps: float, gamma: float) -> float:
    if gamma == 0.0:
        return math.inf
    return eps / math.sqrt(gamma)


def linearized_accuracy(kappa: float, eps: float) -> float:
    return math.sqrt(kappa * eps)


def snap_ceil(x: float) -> int:
    nearest = round(x)
    if abs(x - nearest) <= INTEGER_SNAP:
        return int(nearest)
    return math.ceil(x)


def depth_exponent(cfg: PlannerConfig, eps: float) -> float:
    """2 log_gamma(eps (1 - gamma) / (1 + M)), floored at 0."""
    _require_positive(eps)
    if eps >= cfg.v_max:
        return 0.0
    if cfg.gamma == 0.0:
        return 1.0
    ratio = eps * (1.0 - cfg.gamma) / (1.0 + cfg.M)
    return max(0.0, 2.0 * math.log(ratio) / math.log(cfg.gamma))


def predict_depth(cfg: PlannerConfig, eps: float) -> int:
    return max(0, snap_ceil(depth_exponent(cfg, eps)))


def clip_q(q: ArrayLike, c: float) -> NDArray[np.float64]:
    if not c > 0.0:
        raise InvalidArgumentError(f"clip bound must be positive, got {c}")
    return np.clip(np.asarray(q, dtype=float), 0.0, c)
