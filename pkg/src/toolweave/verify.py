"""Two-tier verification of generated samples.

Tier 1 is deterministic rule checking against the registry (structure only:
existence, required parameters, value kinds). Tier 2 asks an LLM judge to
vet (profile, query, solution) triples at temperature 0. ``filter_corpus``
runs both tiers and partitions the batch exactly into accepted and rejected.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum

from . import prompts
from .gateway import Gateway, GatewayError, StructureError
from .grammar import ParseError, parse_solution, serialize_solution
from .model import (
    ParamSpec,
    Sample,
    Solution,
    ToolRegistry,
    UserProfile,
    Value,
    canonicalize_value,
)
from .store import profile_to_record

logger = logging.getLogger(__name__)

JUDGE_SHAPE = {
    "type": "object",
    "properties": {
        "param_correctness": {"enum": ["pass", "fail"]},
        "hallucination": {"enum": ["pass", "fail"]},
        "query_resolution": {"enum": ["pass", "fail"]},
        "reasons": {"type": "array", "items": {"type": "string"}},
    },
    "required": ["param_correctness", "hallucination", "query_resolution"],
}


class VerdictUnparsableError(Exception):
    """The judge never produced a conforming verdict within budget."""


class ViolationKind(str, Enum):
    UNPARSABLE = "unparsable"
    UNKNOWN_PLATFORM = "unknown-platform"
    UNKNOWN_TOOL = "unknown-tool"
    HALLUCINATED_PARAMETER = "hallucinated-parameter"
    MISSING_REQUIRED_PARAMETER = "missing-required-parameter"
    TYPE_MISMATCH = "type-mismatch"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    call_index: int | None = None
    param: str | None = None
    detail: str = ""

    @property
    def location(self) -> tuple[int | None, str | None]:
        return (self.call_index, self.param)


@dataclass(frozen=True)
class JudgeVerdict:
    param_correctness: bool
    hallucination: bool
    query_resolution: bool
    reasons: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.param_correctness and self.hallucination and self.query_resolution


@dataclass(frozen=True)
class RejectedSample:
    """A sample that failed verification, with the evidence."""

    sample: Sample
    reason: str  # "rule" | "judge" | "transport" | "verdict-unparsable"
    violations: tuple[Violation, ...] = ()
    verdict: JudgeVerdict | None = None


def _kind_matches(value: Value, spec: ParamSpec) -> bool:
    v = canonicalize_value(value)
    if spec.kind == "string":
        return isinstance(v, str)
    if spec.kind == "boolean":
        return isinstance(v, bool)
    if spec.kind == "number":
        return isinstance(v, (int, float)) and not isinstance(v, bool)
    if spec.kind == "integer":
        # integer-valued floats canonicalize to int; strings never coerce
        return isinstance(v, int) and not isinstance(v, bool)
    if spec.kind == "array":
        return isinstance(v, list)
    if spec.kind == "object":
        return isinstance(v, dict)
    if spec.kind == "enum":
        return isinstance(v, str) and v in (spec.enum_values or ())
    return False


def rule_validate(solution: Solution, registry: ToolRegistry) -> list[Violation]:
    """Structural check of one solution against the registry.

    Empty iff every call's platform, tool, and parameters exist, required
    parameters are present, and every value's kind matches its spec.
    """
    out: list[Violation] = []
    for ci, call in enumerate(solution.calls):
        platform = registry.platform_by_name.get(call.platform)
        if platform is None:
            out.append(
                Violation(ViolationKind.UNKNOWN_PLATFORM, ci,
                          detail=f"platform {call.platform!r} not in registry")
            )
            continue
        api = registry.lookup(call.platform, call.function)
        if api is None:
            out.append(
                Violation(ViolationKind.UNKNOWN_TOOL, ci,
                          detail=f"tool {call.function!r} not on platform {call.platform!r}")
            )
            continue
        for name, value in call.args.items():
            spec = api.param(name)
            if spec is None:
                out.append(
                    Violation(ViolationKind.HALLUCINATED_PARAMETER, ci, name,
                              detail=f"{call.function} has no parameter {name!r}")
                )
                continue
            if not _kind_matches(value, spec):
                expected = spec.kind if spec.kind != "enum" else f"one of {list(spec.enum_values or ())}"
                out.append(
                    Violation(ViolationKind.TYPE_MISMATCH, ci, name,
                              detail=f"expected {expected}, got {value!r}")
                )
        for required in api.required_params:
            if required not in call.args:
                out.append(
                    Violation(ViolationKind.MISSING_REQUIRED_PARAMETER, ci, required,
                              detail=f"{call.function} requires {required!r}")
                )
    return out


def rule_validate_text(text: str, registry: ToolRegistry) -> list[Violation]:
    """Text-level variant: an unparsable input is a single ``unparsable`` hit."""
    try:
        solution = parse_solution(text)
    except ParseError as exc:
        return [Violation(ViolationKind.UNPARSABLE, detail=str(exc))]
    return rule_validate(solution, registry)


def model_verify(
    profile: UserProfile,
    query: str,
    solution: Solution,
    gateway: Gateway,
    repair_budget: int = 2,
    seed: int | None = None,
) -> JudgeVerdict:
    """LLM-judge tier; runs at temperature 0. Call only after rule_validate."""
    prompt = prompts.render(
        "judge_verdict",
        profile_json=json.dumps(profile_to_record(profile), ensure_ascii=False, indent=1),
        query=query,
        solution_text=serialize_solution(solution),
    )
    request = gateway.request(
        system="You are a meticulous dataset verifier.",
        user=prompt,
        temperature=0.0,
        seed=seed,
    )
    try:
        raw = gateway.complete_structured(request, JUDGE_SHAPE, repair_budget)
    except StructureError as exc:
        raise VerdictUnparsableError(str(exc)) from exc
    return JudgeVerdict(
        param_correctness=raw["param_correctness"] == "pass",
        hallucination=raw["hallucination"] == "pass",
        query_resolution=raw["query_resolution"] == "pass",
        reasons=tuple(raw.get("reasons", ())),
    )


def filter_corpus(
    samples: list[Sample],
    registry: ToolRegistry,
    gateway: Gateway,
    profiles: dict[str, UserProfile],
    repair_budget: int = 2,
    seed: int | None = None,
) -> tuple[list[Sample], list[RejectedSample]]:
    """Run both tiers over a batch; exact partition into accepted/rejected.

    A gateway failure aborts only the affected sample, which lands in the
    rejected list with a transport reason.
    """
    accepted: list[Sample] = []
    rejected: list[RejectedSample] = []
    for sample in samples:
        violations = rule_validate(sample.gold, registry)
        if violations:
            rejected.append(
                RejectedSample(sample.with_status("rejected"), "rule",
                               violations=tuple(violations))
            )
            continue
        checked = sample.with_status("rule_checked")
        profile = profiles.get(sample.user_id)
        if profile is None:
            rejected.append(
                RejectedSample(checked.with_status("rejected"), "rule",
                               violations=(Violation(
                                   ViolationKind.UNKNOWN_PLATFORM, None,
                                   detail=f"no profile for user {sample.user_id!r}"),))
            )
            continue
        try:
            verdict = model_verify(
                profile, sample.query, sample.gold, gateway, repair_budget, seed=seed
            )
        except VerdictUnparsableError as exc:
            rejected.append(
                RejectedSample(checked.with_status("rejected"), "verdict-unparsable",
                               verdict=None)
            )
            logger.warning("sample %s: %s", sample.id, exc)
            continue
        except GatewayError as exc:
            rejected.append(
                RejectedSample(checked.with_status("rejected"), "transport")
            )
            logger.warning("sample %s: gateway failure %s", sample.id, exc)
            continue
        if verdict.passed:
            accepted.append(checked.with_status("model_verified"))
        else:
            rejected.append(
                RejectedSample(checked.with_status("rejected"), "judge", verdict=verdict)
            )
    return accepted, rejected


def rejection_to_record(r: RejectedSample) -> dict:
    record = {
        "sample_id": r.sample.id,
        "reason": r.reason,
        "violations": [
            {"kind": v.kind.value, "call": v.call_index, "param": v.param, "detail": v.detail}
            for v in r.violations
        ],
    }
    if r.verdict is not None:
        record["verdict"] = {
            "param_correctness": r.verdict.param_correctness,
            "hallucination": r.verdict.hallucination,
            "query_resolution": r.verdict.query_resolution,
            "reasons": list(r.verdict.reasons),
        }
    return record
