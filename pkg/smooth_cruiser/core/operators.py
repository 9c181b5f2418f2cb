import logging
import math
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize, special

from smooth_cruiser.core.errors import (
    InvalidArgumentError,
    NumericError,
    UnsupportedOperationError,
)

logger = logging.getLogger(__name__)

QVector = NDArray[np.float64]
GradientVector = NDArray[np.float64]

BISECTION_MAX_ITER = 200
BISECTION_XTOL = 1e-12
SMOOTHNESS_SAFETY = 2.0

OPERATOR_KINDS = ("logsumexp_max", "logsumexp_min", "sqrt_reg")


def as_qvector(q: ArrayLike, n_actions: Optional[int] = None) -> QVector:
    arr = np.asarray(q, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError(
            f"action values must be a non-empty vector, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("action values must be finite")
    if n_actions is not None and arr.size != n_actions:
        raise InvalidArgumentError(
            f"expected {n_actions} action values, got {arr.size}"
        )
    return arr


class SmoothOperator(ABC):
    """Smooth aggregation F of K action values with a nonnegative gradient of
    l1-norm in (0, 1]."""

    kind: str = ""

    def __init__(self, lam: float, n_actions: int):
        if not (math.isfinite(lam) and lam > 0):
            raise InvalidArgumentError(f"regularization must be positive, got {lam}")
        if n_actions < 1:
            raise InvalidArgumentError(f"need at least one action, got {n_actions}")
        self.lam = float(lam)
        self.n_actions = int(n_actions)

    @property
    @abstractmethod
    def L(self) -> float:
        """Smoothness constant."""

    @property
    @abstractmethod
    def M(self) -> float:
        """Bound on |F(0)|."""

    @abstractmethod
    def value(self, q: ArrayLike) -> float:
        pass

    @abstractmethod
    def gradient(self, q: ArrayLike) -> GradientVector:
        pass

    @abstractmethod
    def hessian(self, q: ArrayLike) -> NDArray[np.float64]:
        pass

    def value_rows(self, q_rows: ArrayLike) -> NDArray[np.float64]:
        rows = np.asarray(q_rows, dtype=float)
        return np.array([self.value(row) for row in rows])

    def max_approx_gap(self, q: ArrayLike) -> float:
        raise UnsupportedOperationError(
            f"max_approx_gap is only defined for log-sum-exp operators, not {self.kind}"
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}(lam={self.lam}, n_actions={self.n_actions})"


class LogSumExpMax(SmoothOperator):
    kind = "logsumexp_max"

    @property
    def L(self) -> float:
        return 1.0 / self.lam

    @property
    def M(self) -> float:
        return self.lam * math.log(self.n_actions)

    def value(self, q: ArrayLike) -> float:
        q = as_qvector(q, self.n_actions)
        return float(self.lam * special.logsumexp(q / self.lam))

    def value_rows(self, q_rows: ArrayLike) -> NDArray[np.float64]:
        rows = np.asarray(q_rows, dtype=float)
        return self.lam * special.logsumexp(rows / self.lam, axis=1)

    def gradient(self, q: ArrayLike) -> GradientVector:
        q = as_qvector(q, self.n_actions)
        return special.softmax(q / self.lam)

    def hessian(self, q: ArrayLike) -> NDArray[np.float64]:
        p = self.gradient(q)
        return (np.diag(p) - np.outer(p, p)) / self.lam

    def max_approx_gap(self, q: ArrayLike) -> float:
        q = as_qvector(q, self.n_actions)
        return self.value(q) - float(np.max(q))


class LogSumExpMin(LogSumExpMax):
    """Minimizing player's operator, -F_max(-q).

    The planner clips action-value estimates to [0, V_max]. Its values can be
    as low as min(q) - lam ln K, so continuation values below zero are cut to
    zero inside the planner; with rewards near zero the planned value sits at
    -lam ln K. Exact solving has no such clip.
    """

    kind = "logsumexp_min"

    def value(self, q: ArrayLike) -> float:
        q = as_qvector(q, self.n_actions)
        return -super().value(-q)

    def value_rows(self, q_rows: ArrayLike) -> NDArray[np.float64]:
        return -super().value_rows(-np.asarray(q_rows, dtype=float))

    def gradient(self, q: ArrayLike) -> GradientVector:
        q = as_qvector(q, self.n_actions)
        return super().gradient(-q)

    def hessian(self, q: ArrayLike) -> NDArray[np.float64]:
        q = as_qvector(q, self.n_actions)
        return -super().hessian(-q)

    def max_approx_gap(self, q: ArrayLike) -> float:
        q = as_qvector(q, self.n_actions)
        return float(np.min(q)) - self.value(q)


class SqrtRegularized(SmoothOperator):
    """F(q) = max over the simplex of sum_a q_a pi_a + lam sqrt(pi_a).

    The maximizer is pi_a = (lam / 2 / (U - q_a))**2 where U solves the
    normalization constraint; U is found by bisection.
    """

    kind = "sqrt_reg"

    def __init__(
        self,
        lam: float,
        n_actions: int,
        smoothness: Optional[float] = None,
        domain_width: float = 10.0,
    ):
        super().__init__(lam, n_actions)
        valid = smoothness is None or (math.isfinite(smoothness) and smoothness > 0)
        if not valid:
            raise InvalidArgumentError(
                f"smoothness override must be positive, got {smoothness}"
            )
        self._smoothness = smoothness
        self.domain_width = float(domain_width)

    @property
    def L(self) -> float:
        if self._smoothness is None:
            self._smoothness = estimate_smoothness(self, width=self.domain_width)
            logger.info(f"Estimated sqrt_reg smoothness L={self._smoothness:.6g}")
        return self._smoothness

    @property
    def M(self) -> float:
        return self.lam * math.sqrt(self.n_actions)

    def solve_lagrange(self, q: ArrayLike) -> float:
        q = as_qvector(q, self.n_actions)
        half = self.lam / 2.0
        top = float(np.max(q))
        lo = top + half
        hi = top + half * math.sqrt(self.n_actions)

        def residual(u: float) -> float:
            return float(np.sum((half / (u - q)) ** 2) - 1.0)

        if self.n_actions == 1:
            return lo
        f_lo, f_hi = residual(lo), residual(hi)
        if f_lo == 0.0:
            return lo
        if f_hi == 0.0:
            return hi
        if f_lo < 0.0 or f_hi > 0.0:
            raise NumericError(
                "Lagrange bracket does not straddle the root",
                details={"lo": lo, "hi": hi, "f_lo": f_lo, "f_hi": f_hi},
            )
        try:
            root, info = optimize.bisect(
                residual,
                lo,
                hi,
                xtol=BISECTION_XTOL * min(1.0, self.lam),
                maxiter=BISECTION_MAX_ITER,
                full_output=True,
            )
        except RuntimeError as e:
            raise NumericError(f"bisection did not converge: {e}") from e
        logger.debug(f"sqrt_reg bisection converged in {info.iterations} iterations")
        return float(root)

    def policy(self, q: ArrayLike) -> GradientVector:
        q = as_qvector(q, self.n_actions)
        u = self.solve_lagrange(q)
        return (self.lam / 2.0 / (u - q)) ** 2

    def value(self, q: ArrayLike) -> float:
        q = as_qvector(q, self.n_actions)
        u = self.solve_lagrange(q)
        # dual form U + (lam/2) sum sqrt(pi_a); stationary in U
        return float(u + (self.lam / 2.0) ** 2 * np.sum(1.0 / (u - q)))

    def gradient(self, q: ArrayLike) -> GradientVector:
        return self.policy(q)

    def hessian(self, q: ArrayLike) -> NDArray[np.float64]:
        q = as_qvector(q, self.n_actions)
        u = self.solve_lagrange(q)
        pi = (self.lam / 2.0 / (u - q)) ** 2
        w = 2.0 * pi / (u - q)
        return np.diag(w) - np.outer(w, w) / np.sum(w)


def estimate_smoothness(
    op: SmoothOperator, width: float = 10.0, n_points: int = 256, seed: int = 0
) -> float:
    """Safety factor times the largest sampled smoothness ratio.

    For small steps the ratio |F(x) - F(x0) - (x - x0).grad F(x0)| / |x - x0|^2
    tends to half the largest absolute Hessian eigenvalue at x0, so the sampled
    maximum of that quantity is used. The tie point 0 is always included.
    """
    rng = np.random.default_rng(seed)
    points = np.vstack(
        [np.zeros(op.n_actions), rng.uniform(0.0, width, size=(n_points, op.n_actions))]
    )
    ratio = max(
        0.5 * float(np.max(np.abs(np.linalg.eigvalsh(op.hessian(p))))) for p in points
    )
    return SMOOTHNESS_SAFETY * ratio


def build_operator(
    kind: str, lam: float, n_actions: int, smoothness: Optional[float] = None
) -> SmoothOperator:
    if kind == "logsumexp_max":
        return LogSumExpMax(lam, n_actions)
    if kind == "logsumexp_min":
        return LogSumExpMin(lam, n_actions)
    if kind == "sqrt_reg":
        return SqrtRegularized(lam, n_actions, smoothness=smoothness)
    raise InvalidArgumentError(
        f"unknown operator kind '{kind}', expected one of {', '.join(OPERATOR_KINDS)}"
    )


def op_value(op: SmoothOperator, q: ArrayLike) -> float:
    return op.value(q)


def op_gradient(op: SmoothOperator, q: ArrayLike) -> GradientVector:
    return op.gradient(q)


def solve_lagrange(op: SmoothOperator, q: ArrayLike) -> float:
    if not isinstance(op, SqrtRegularized):
        raise UnsupportedOperationError(
            f"solve_lagrange needs a sqrt_reg operator, got {op.kind}"
        )
    return op.solve_lagrange(q)


def max_approx_gap(op: SmoothOperator, q: ArrayLike) -> float:
    return op.max_approx_gap(q)
