import logging
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from smooth_cruiser.core.errors import InvalidArgumentError
from smooth_cruiser.core.streams import CounterStream

logger = logging.getLogger(__name__)

ENV_FAMILIES = ("chain", "gridworld")
DEFAULT_REWARD_NOISE = 0.05

# chain actions
FORWARD, BACK = 0, 1
# gridworld actions
NORTH, SOUTH, EAST, WEST = 0, 1, 2, 3


@dataclass(frozen=True)
class TabularMdp:
    """Explicit finite MDP: ``transition[s, a, z] = P(z | s, a)``."""

    transition: NDArray[np.float64]
    reward_mean: NDArray[np.float64]
    reward_noise: float = 0.0
    name: str = "tabular"

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=float)
        reward = np.asarray(self.reward_mean, dtype=float)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise InvalidArgumentError(
                f"transition table must have shape (S, K, S), got {transition.shape}"
            )
        if reward.shape != transition.shape[:2]:
            raise InvalidArgumentError(
                f"reward table shape {reward.shape} does not match "
                f"{transition.shape[:2]}"
            )
        if np.any(transition < 0) or np.any(
            np.abs(transition.sum(axis=2) - 1.0) > 1e-12
        ):
            raise InvalidArgumentError("each transition row must be a distribution")
        if np.any(reward < 0) or np.any(reward > 1):
            raise InvalidArgumentError("mean rewards must lie in [0, 1]")
        if not 0.0 <= self.reward_noise <= 0.5:
            raise InvalidArgumentError(
                f"reward noise half-width must be in [0, 0.5], got {self.reward_noise}"
            )
        transition.setflags(write=False)
        reward.setflags(write=False)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "reward_mean", reward)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @cached_property
    def noise_width(self) -> NDArray[np.float64]:
        """Per-(s, a) noise half-width; never lets a draw leave [0, 1]."""
        r = self.reward_mean
        return np.minimum(self.reward_noise, np.minimum(r, 1.0 - r))

    @cached_property
    def transition_cdf(self) -> NDArray[np.float64]:
        return np.cumsum(self.transition, axis=2)

    def check_indices(self, s: int, a: int) -> None:
        if not (0 <= s < self.n_states and 0 <= a < self.n_actions):
            raise InvalidArgumentError(
                f"state/action ({s}, {a}) out of range for "
                f"{self.n_states} states and {self.n_actions} actions"
            )


@dataclass(frozen=True)
class EnvSpec:
    family: str
    size: int

    def __post_init__(self):
        if self.family not in ENV_FAMILIES:
            raise InvalidArgumentError(
                f"unknown environment family '{self.family}', "
                f"expected one of {', '.join(ENV_FAMILIES)}"
            )
        if self.size < 2:
            raise InvalidArgumentError(
                f"{self.family} size must be at least 2, got {self.size}"
            )

    @classmethod
    def parse(cls, text: str) -> "EnvSpec":
        family, sep, size = text.strip().partition(":")
        if not sep or not size.strip().isdigit():
            raise InvalidArgumentError(
                "environment spec must look like 'chain:<n>' or 'gridworld:<n>', "
                f"got '{text}'"
            )
        return cls(family.strip().lower(), int(size))

    @property
    def reference_state(self) -> int:
        # state 0 for the chain, cell (0, 0) for the grid
        return 0

    def __str__(self) -> str:
        return f"{self.family}:{self.size}"


def build_chain(n: int, reward_noise: float = 0.0) -> TabularMdp:
    transition = np.zeros((n, 2, n))
    reward = np.zeros((n, 2))
    for s in range(n):
        transition[s, FORWARD, min(s + 1, n - 1)] = 1.0
        transition[s, BACK, 0] = 1.0
        reward[s, BACK] = 0.1
    reward[n - 1, FORWARD] = 1.0
    return TabularMdp(transition, reward, reward_noise, name=f"chain:{n}")


def build_gridworld(n: int, reward_noise: float = 0.0) -> TabularMdp:
    n_states = n * n
    goal = n_states - 1
    moves = {NORTH: (-1, 0), SOUTH: (1, 0), EAST: (0, 1), WEST: (0, -1)}
    transition = np.zeros((n_states, 4, n_states))
    reward = np.zeros((n_states, 4))
    for s in range(n_states):
        row, col = divmod(s, n)
        for a, (dr, dc) in moves.items():
            if s == goal:
                transition[s, a, goal] = 1.0
                reward[s, a] = 1.0
                continue
            r2 = min(max(row + dr, 0), n - 1)
            c2 = min(max(col + dc, 0), n - 1)
            transition[s, a, r2 * n + c2] = 1.0
    return TabularMdp(transition, reward, reward_noise, name=f"gridworld:{n}")


def build_env(spec: EnvSpec, reward_noise: float = 0.0) -> TabularMdp:
    if spec.family == "chain":
        return build_chain(spec.size, reward_noise)
    return build_gridworld(spec.size, reward_noise)


@dataclass
class GenerativeOracle:
    """Sampling access to a TabularMdp with an exact call counter.

    Call ``i`` consumes draws ``2i`` and ``2i+1`` of the stream, so each draw is
    keyed by (seed, call index) regardless of which thread makes the call.
    """

    model: TabularMdp
    stream: CounterStream
    _calls: int = field(default=0, init=False)
    _lock: threading.Lock = field(
        default_factory=threading.Lock, init=False, repr=False
    )

    @classmethod
    def seeded(
        cls, model: TabularMdp, seed: int, stream_id: int = 0
    ) -> "GenerativeOracle":
        return cls(model, CounterStream(seed, stream_id))

    @property
    def call_count(self) -> int:
        return self._calls

    def __call__(self, s: int, a: int) -> Tuple[float, int]:
        self.model.check_indices(s, a)
        with self._lock:
            index = self._calls
            self._calls += 1
        u_next, u_noise = self.stream.values(2 * index, 2)
        cdf = self.model.transition_cdf[s, a]
        next_state = min(int(np.searchsorted(cdf, u_next, side="right")), len(cdf) - 1)
        width = self.model.noise_width[s, a]
        reward = self.model.reward_mean[s, a] + (2.0 * u_noise - 1.0) * width
        return min(max(float(reward), 0.0), 1.0), next_state


def oracle_call(oracle: GenerativeOracle, s: int, a: int) -> Tuple[float, int]:
    return oracle(s, a)
