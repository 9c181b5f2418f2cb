import csv
import json
import math
from typing import Any, List, Optional, Sequence, TextIO, Tuple

from pydantic import BaseModel, Field


class ErrorInfo(BaseModel):
    code: str
    message: str
    details: Optional[dict] = None


class ErrorResponse(BaseModel):
    error: ErrorInfo


class ValueTableReport(BaseModel):
    env: str
    operator: str
    gamma: float
    lam: float
    V: List[float]
    Q: List[List[float]]
    residual: float
    iterations: int
    policy: Optional[List[List[float]]] = None
    V_unregularized: Optional[List[float]] = None
    regularization_gap: Optional[float] = None
    regularization_gap_bound: Optional[float] = None


class PlanReport(BaseModel):
    env: str
    operator: str
    state: int
    epsilon: float
    gamma: float
    lam: float
    delta_prime: float
    n_scale: float
    seed: int
    estimate: float
    oracle_calls: int
    predicted_calls: int
    max_recursion_depth_seen: int
    q_estimate: List[float] = Field(default_factory=list)
    kappa: float
    v_max: float
    v_exact: Optional[float] = None


class BoundCurveRow(BaseModel):
    epsilon: float
    simulated: float
    bound_lemma: Optional[float] = None
    bound_sparse: float
    predicted_calls: int
    simulated_log10: float
    bound_lemma_log10: Optional[float] = None
    bound_sparse_log10: float
    predicted_calls_log10: float


class LambdaSweepRow(BaseModel):
    lam: float
    epsilon: float
    calls: float
    sparse_calls: float
    ratio: float
    condition_violated: bool = False


class ConsistencyReport(BaseModel):
    env: str
    state: int
    epsilon: float
    n_sim: int
    seed: int
    delta_hat: float
    std: float
    std_error: float
    hoeffding_halfwidth: float
    v_exact: float
    c_gamma: float
    kappa: float
    bound_violations: int
    within_bias_bound: bool
    warnings: List[str] = Field(default_factory=list)
    runs: Optional[List[float]] = None


class SelfTestCheck(BaseModel):
    name: str
    passed: bool
    detail: str = ""


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def to_json_text(payload: Any) -> str:
    """Stable JSON: sorted keys, two-space indent, non-finite floats as null."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="python")
    elif isinstance(payload, list):
        payload = [
            p.model_dump(mode="python") if isinstance(p, BaseModel) else p
            for p in payload
        ]
    text = json.dumps(_json_safe(payload), indent=2, sort_keys=True, allow_nan=False)
    return text + "\n"


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_csv(
    stream: TextIO, rows: Sequence[BaseModel], columns: Sequence[Tuple[str, str]]
) -> None:
    """Write ``rows`` with (header, attribute) column pairs."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow([header for header, _ in columns])
    for row in rows:
        writer.writerow([format_cell(getattr(row, attr)) for _, attr in columns])


BOUND_CURVE_COLUMNS: List[Tuple[str, str]] = [
    ("epsilon", "epsilon"),
    ("simulated", "simulated"),
    ("bound_lemma", "bound_lemma"),
    ("bound_sparse", "bound_sparse"),
    ("predicted_calls", "predicted_calls"),
    ("simulated_log10", "simulated_log10"),
    ("bound_lemma_log10", "bound_lemma_log10"),
    ("bound_sparse_log10", "bound_sparse_log10"),
    ("predicted_calls_log10", "predicted_calls_log10"),
]

LAMBDA_SWEEP_COLUMNS: List[Tuple[str, str]] = [
    ("lambda", "lam"),
    ("epsilon", "epsilon"),
    ("calls", "calls"),
    ("sparse_calls", "sparse_calls"),
    ("ratio", "ratio"),
    ("condition_violated", "condition_violated"),
]


class RunRow(BaseModel):
    run_index: int
    output: float


RUN_COLUMNS: List[Tuple[str, str]] = [("run_index", "run_index"), ("output", "output")]

