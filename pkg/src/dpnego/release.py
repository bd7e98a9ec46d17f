"""The execution sandbox: declarative query plans validated against the
contract, deterministic evaluation, and calibrated DP noise injection."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .contracts import FeatureKind, RESOLUTION_ORDER, ResolutionKind, ValidatedRequest
from .ingest import LoadSeries, RESOLUTION_SECONDS
from .negotiation import NonPositiveEpsilon
from .secretshare import ReleaseToken


class ScopeViolation(ValueError):
    pass


class NonWhitelistedOp(ValueError):
    pass


class ArityExceeded(ValueError):
    pass


class RuntimeBudgetExceeded(ValueError):
    pass


class DataGap(ValueError):
    pass


class NonPositiveSensitivity(ValueError):
    pass


class UnnoisedOutput(ValueError):
    pass


class TokenNotConsumed(ValueError):
    pass


class Mechanism(Enum):
    LAPLACE = "laplace"
    GAUSSIAN = "gaussian"
    RANDOMIZED_ROUNDING = "randomized_rounding"


@dataclass(frozen=True)
class DpConfig:
    gaussian_delta: float = 1e-5
    max_plan_steps: int = 32
    default_output_cap: int = 4


WHITELISTED_OPS = ("select", "window", "resample", "clip", "aggregate")
AGGREGATE_FNS = ("sum", "mean", "max", "count")


@dataclass(frozen=True)
class QueryPlan:
    """An ordered pipeline of whitelisted operations with a declared
    L1 sensitivity per output."""

    ops: tuple[dict, ...]
    delta: float
    output_arity: int
    mechanism: Mechanism = Mechanism.LAPLACE

    def to_dict(self) -> dict[str, Any]:
        return {
            "ops": list(self.ops),
            "delta": self.delta,
            "output_arity": self.output_arity,
            "mechanism": self.mechanism.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "QueryPlan":
        return cls(
            ops=tuple(doc["ops"]),
            delta=float(doc["delta"]),
            output_arity=int(doc["output_arity"]),
            mechanism=Mechanism(doc.get("mechanism", "laplace")),
        )

    @classmethod
    def from_json(cls, text: str) -> "QueryPlan":
        return cls.from_dict(json.loads(text))


def _coarser_or_equal(requested: ResolutionKind, contracted: ResolutionKind) -> bool:
    order = list(RESOLUTION_ORDER)
    return order.index(requested) >= order.index(contracted)


def validate_plan(
    plan: QueryPlan,
    contract: ValidatedRequest,
    cfg: DpConfig = DpConfig(),
    output_cap: int | None = None,
    runtime_budget: int | None = None,
) -> None:
    """Static validation: every referenced feature, window, and resolution must
    sit inside the contract scope, every op must be whitelisted, and the step
    count must fit the runtime budget."""
    cap = cfg.default_output_cap if output_cap is None else output_cap
    budget = cfg.max_plan_steps if runtime_budget is None else runtime_budget
    if len(plan.ops) > budget:
        raise RuntimeBudgetExceeded(
            f"plan has {len(plan.ops)} steps, budget is {budget}"
        )
    if plan.output_arity < 1:
        raise ScopeViolation("output_arity must be >= 1")
    if plan.output_arity > cap:
        raise ArityExceeded(f"arity {plan.output_arity} exceeds cap {cap}")
    if plan.delta <= 0:
        raise NonPositiveSensitivity("declared sensitivity must be positive")
    contracted_features = set(contract.request.features)
    aggregates = 0
    for op in plan.ops:
        name = op.get("op")
        if name not in WHITELISTED_OPS:
            raise NonWhitelistedOp(f"operation {name!r} is not whitelisted")
        if name == "select":
            try:
                asked = {FeatureKind(f) for f in op.get("features", [])}
            except ValueError as exc:
                raise ScopeViolation(str(exc)) from None
            if not asked <= contracted_features:
                raise ScopeViolation(
                    f"plan selects {sorted(f.value for f in asked - contracted_features)} "
                    "outside the contracted feature set"
                )
        elif name == "window":
            hours = op.get("hours")
            if not isinstance(hours, int) or hours < 1:
                raise ScopeViolation("window hours must be a positive integer")
            if hours > contract.request.window_hours:
                raise ScopeViolation(
                    f"window {hours}h exceeds contracted {contract.request.window_hours}h"
                )
        elif name == "resample":
            try:
                res = ResolutionKind(op.get("resolution"))
            except ValueError:
                raise ScopeViolation(f"bad resolution {op.get('resolution')!r}") from None
            if not _coarser_or_equal(res, contract.request.resolution):
                raise ScopeViolation(
                    f"resample to {res.value} is finer than contracted "
                    f"{contract.request.resolution.value}"
                )
        elif name == "clip":
            lo, hi = op.get("lo"), op.get("hi")
            if lo is None or hi is None or not lo < hi:
                raise ScopeViolation("clip needs lo < hi")
        elif name == "aggregate":
            if op.get("fn") not in AGGREGATE_FNS:
                raise NonWhitelistedOp(f"aggregate fn {op.get('fn')!r} not whitelisted")
            aggregates += 1
    if aggregates != plan.output_arity:
        raise ScopeViolation(
            f"plan produces {aggregates} outputs but declares {plan.output_arity}"
        )


def execute_plan(plan: QueryPlan, data: LoadSeries) -> tuple[float, ...]:
    """Deterministically evaluate the pipeline over local data.

    Missing samples fail closed with DataGap rather than being imputed, since
    imputation would silently change the declared sensitivity.
    """
    values = data.values
    spacing = data.spacing_seconds
    outputs: list[float] = []
    for op in plan.ops:
        name = op["op"]
        if name == "select":
            continue
        if name == "window":
            hours = op["hours"]
            offset = op.get("offset_hours", 0)
            start = int(offset * 3600 // spacing)
            needed = int(hours * 3600 // spacing)
            if needed < 1:
                raise DataGap("window shorter than one sample")
            if start + needed > len(values):
                raise DataGap(
                    f"window needs {start + needed} samples, series has {len(values)}"
                )
            values = values[start : start + needed]
        elif name == "resample":
            target = RESOLUTION_SECONDS[ResolutionKind(op["resolution"])]
            factor = target // spacing
            if factor < 1 or target % spacing != 0:
                raise DataGap("resample target finer than data spacing")
            if len(values) % factor != 0:
                raise DataGap("window not divisible by resample factor")
            values = values.reshape(-1, factor).mean(axis=1)
            spacing = target
        elif name == "clip":
            values = np.clip(values, op["lo"], op["hi"])
        elif name == "aggregate":
            if len(values) == 0:
                raise DataGap("aggregate over empty window")
            fn = op["fn"]
            if fn == "sum":
                outputs.append(float(values.sum()))
            elif fn == "mean":
                outputs.append(float(values.mean()))
            elif fn == "max":
                outputs.append(float(values.max()))
            else:
                outputs.append(float(len(values)))
    return tuple(outputs)


@dataclass(frozen=True)
class SanitizedOutput:
    """The only thing allowed to leave the sandbox."""

    values: tuple[float | int, ...]
    mechanism: Mechanism
    epsilon_charged: float
    noise_trace: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "values": list(self.values),
            "mechanism": self.mechanism.value,
            "epsilon_charged": self.epsilon_charged,
            "noise_trace": self.noise_trace,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def laplace_scale(delta_q: float, eps: float) -> float:
    """Per-coordinate Laplace scale b = delta/eps."""
    if eps <= 0:
        raise NonPositiveEpsilon("epsilon must be positive")
    if delta_q <= 0:
        raise NonPositiveSensitivity("sensitivity must be positive")
    return delta_q / eps


def gaussian_sigma(delta_q: float, eps: float, delta: float = 1e-5) -> float:
    """Analytic Gaussian sigma = delta_q * sqrt(2 ln(1.25/delta)) / eps."""
    if eps <= 0:
        raise NonPositiveEpsilon("epsilon must be positive")
    if delta_q <= 0:
        raise NonPositiveSensitivity("sensitivity must be positive")
    return delta_q * math.sqrt(2.0 * math.log(1.25 / delta)) / eps


def sample_laplace(rng: np.random.Generator, scale: float, n: int) -> np.ndarray:
    """Inverse-CDF Laplace sampler pinned to this package (stable goldens)."""
    u = rng.random(n) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def true_report_probability(eps: float, categories: int) -> float:
    """Randomized-rounding probability of reporting the true category."""
    return math.exp(eps) / (math.exp(eps) + categories - 1)


def dp_noise(
    values: Sequence[float | int],
    eps_star: float,
    delta_q: float,
    mechanism: Mechanism,
    seed: int,
    token: ReleaseToken,
    dp_cfg: DpConfig = DpConfig(),
    categories: int | None = None,
) -> SanitizedOutput:
    """Inject calibrated noise and stamp the output with its noise trace.

    Requires an already-consumed ReleaseToken: consumption is recorded before
    any sanitized value exists, so no release path can skip authorization.
    """
    if not token.consumed:
        raise TokenNotConsumed("release token must be consumed before noising")
    if eps_star <= 0:
        raise NonPositiveEpsilon("epsilon must be positive")
    if delta_q <= 0:
        raise NonPositiveSensitivity("sensitivity must be positive")
    rng = np.random.default_rng(seed)
    arr = list(values)
    if mechanism is Mechanism.LAPLACE:
        noise = sample_laplace(rng, laplace_scale(delta_q, eps_star), len(arr))
        noisy: tuple[float | int, ...] = tuple(float(v + e) for v, e in zip(arr, noise))
    elif mechanism is Mechanism.GAUSSIAN:
        sigma = gaussian_sigma(delta_q, eps_star, dp_cfg.gaussian_delta)
        noise = rng.normal(0.0, sigma, len(arr))
        noisy = tuple(float(v + e) for v, e in zip(arr, noise))
    else:
        if categories is None or categories < 2:
            raise ValueError("randomized rounding needs a category count >= 2")
        p_true = true_report_probability(eps_star, categories)
        vals = np.asarray(arr, dtype=np.int64)
        keep = rng.random(len(vals)) < p_true
        others = rng.integers(0, categories - 1, size=len(vals))
        others = np.where(others < vals, others, others + 1)
        noisy = tuple(int(v) for v in np.where(keep, vals, others))
    trace = hashlib.sha256(
        f"{token.token_id}|{mechanism.value}|{seed}|{len(arr)}|{eps_star}".encode()
    ).hexdigest()[:16]
    return SanitizedOutput(
        values=noisy,
        mechanism=mechanism,
        epsilon_charged=eps_star,
        noise_trace=trace,
    )


def compliance_check(
    output: SanitizedOutput,
    output_cap: int,
) -> None:
    """Final gate before anything leaves the box: arity within the contract
    cap and every value stamped by a noise mechanism."""
    if len(output.values) > output_cap:
        raise ArityExceeded(
            f"output arity {len(output.values)} exceeds cap {output_cap}"
        )
    if not output.noise_trace:
        raise UnnoisedOutput("output carries no noise trace")


def run_release(
    plan: QueryPlan,
    data: LoadSeries,
    contract: ValidatedRequest,
    eps_star: float,
    token: ReleaseToken,
    seed: int,
    dp_cfg: DpConfig = DpConfig(),
    output_cap: int | None = None,
    categories: int | None = None,
) -> SanitizedOutput:
    """Validate, execute, consume the token, noise, and compliance-check."""
    validate_plan(plan, contract, dp_cfg, output_cap)
    raw = execute_plan(plan, data)
    token.consume()
    sanitized = dp_noise(
        raw, eps_star, plan.delta, plan.mechanism, seed, token, dp_cfg, categories
    )
    compliance_check(
        sanitized, dp_cfg.default_output_cap if output_cap is None else output_cap
    )
    return sanitized
