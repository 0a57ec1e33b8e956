"""Two-agent generation of (query, gold solution) pairs.

The user agent role-plays queries from basic plus implicit features while
withholding personal detail values; the assistant agent sees the full
profile, platforms, and APIs and answers in the call-text format. Every
persisted sample gets complete per-parameter provenance: a deterministic
substring pass first, LLM adjudication only for ambiguous values.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace

from . import prompts
from .gateway import ChatMessage, ChatRequest, Gateway
from .grammar import ParseError, parse_solution, serialize_value
from .model import (
    Platform,
    Provenance,
    Sample,
    Scenario,
    Solution,
    ToolApi,
    UserProfile,
    Value,
    canonicalize_value,
    stable_id,
)
from .store import profile_to_record

logger = logging.getLogger(__name__)

WITHHELD_KEYWORDS = ("username", "password", "email", "address", "phone", "location")
MIN_LEAK_LENGTH = 3  # shorter values false-positive on unrelated digits/words


class QueryGenError(Exception):
    pass


class LeakageDetectedError(QueryGenError):
    """A withheld profile value kept appearing verbatim in the query."""


class UnresolvableProvenanceError(QueryGenError):
    """Adjudication failed to tag ambiguous parameters within budget."""


@dataclass(frozen=True)
class QueryGenConfig:
    queries_per_user_scenario: int = 5
    repair_budget: int = 2
    withheld_keywords: tuple[str, ...] = WITHHELD_KEYWORDS
    profile_dependent_floor: float = 0.5
    seed: int | None = None


def withheld_values(profile: UserProfile, keywords: tuple[str, ...]) -> dict[str, str]:
    """Basic-feature values that must never appear verbatim in a query."""
    out = {}
    for label, value in profile.basic_features.items():
        lowered = label.lower()
        if any(k in lowered for k in keywords) and len(value.strip()) >= MIN_LEAK_LENGTH:
            out[label] = value.strip()
    return out


def _leaks(query: str, withheld: dict[str, str]) -> list[str]:
    lowered = query.lower()
    return sorted(label for label, value in withheld.items() if value.lower() in lowered)


def generate_query(
    profile: UserProfile,
    scenario: Scenario,
    platforms: list[Platform],
    gateway: Gateway,
    config: QueryGenConfig = QueryGenConfig(),
    avoid: tuple[str, ...] = (),
) -> str:
    """User-agent query; withheld basic-feature values must not leak."""
    prompt = prompts.render(
        "user_query",
        basic_json=json.dumps(profile.basic_features, ensure_ascii=False, indent=1),
        implicit_json=json.dumps(profile.implicit_features, ensure_ascii=False, indent=1),
        scenario_name=scenario.name,
        platforms_json=json.dumps(
            [{"name": p.name, "characteristics": p.characteristics} for p in platforms],
            ensure_ascii=False, indent=1,
        ),
        avoid_list="\n".join(f"  - {q}" for q in avoid) or "  (none yet)",
    )
    withheld = withheld_values(profile, config.withheld_keywords)
    extra = ""
    for attempt in range(config.repair_budget + 1):
        request = gateway.request(
            system="You role-play users of online platforms.",
            user=prompt + extra,
            seed=config.seed,
        )
        query = gateway.complete(request).strip()
        leaking = _leaks(query, withheld)
        if not leaking:
            return query
        extra = (
            f"\nYour previous request leaked the literal values of: {leaking}. "
            "Refer to them indirectly instead."
        )
    raise LeakageDetectedError(f"withheld values kept leaking: {leaking}")


def _api_json(api: ToolApi) -> dict:
    properties = {}
    for p in api.params:
        prop: dict = {"type": p.kind if p.kind != "enum" else "string",
                      "description": p.description}
        if p.enum_values:
            prop["enum"] = list(p.enum_values)
        properties[p.name] = prop
    out = {
        "type": "function",
        "function": {
            "name": api.name,
            "description": api.description,
            "parameters": {
                "type": "object",
                "properties": properties,
                "required": list(api.required_params),
            },
        },
    }
    if api.response_fields:
        out["function"]["response"] = {
            "type": "object",
            "properties": {
                f.name: {"type": f.kind, "description": f.description}
                for f in api.response_fields
            },
        }
    return out


def build_assistant_prompt(
    profile: UserProfile,
    platforms: list[Platform],
    apis: list[ToolApi],
    include_implicit: bool = True,
) -> str:
    """The assistant agent's system prompt: profile, platforms, APIs."""
    profile_json: dict = {"basic_features": dict(profile.basic_features)}
    if include_implicit:
        profile_json["implicit_features"] = dict(profile.implicit_features)
    profile_json["user_history"] = {
        scenario: [{"platform": b.platform, "action": b.action} for b in records]
        for scenario, records in profile.history.items()
    }
    platform_by_id = {p.id: p for p in platforms}
    return prompts.render(
        "assistant_solution",
        profile_json=json.dumps(profile_json, ensure_ascii=False, indent=1),
        platforms_json=json.dumps(
            [{"name": p.name, "profile": p.characteristics} for p in platforms],
            ensure_ascii=False, indent=1,
        ),
        apis_json=json.dumps(
            [_api_json(a) for a in apis if a.platform_id in platform_by_id],
            ensure_ascii=False, indent=1,
        ),
    )


def generate_solution(
    profile: UserProfile,
    query: str,
    platforms: list[Platform],
    apis: list[ToolApi],
    gateway: Gateway,
    config: QueryGenConfig = QueryGenConfig(),
) -> Solution:
    """Assistant-agent gold solution, parsed from the call-text format."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    system = build_assistant_prompt(profile, platforms, apis)
    messages: tuple[ChatMessage, ...] = (
        ChatMessage("system", system),
        ChatMessage("user", query),
    )
    last_error: ParseError | None = None
    for attempt in range(config.repair_budget + 1):
        request = ChatRequest(
            model_id=gateway.model_id, messages=messages, temperature=0.7,
            seed=config.seed,
        )
        text = gateway.complete(request).strip()
        try:
            return parse_solution(text)
        except ParseError as exc:
            last_error = exc
            messages = messages + (
                ChatMessage("assistant", text or "<empty>"),
                ChatMessage(
                    "user",
                    f"Your reply was not parsable: {exc}. Respond again with only "
                    "the {platform:[func(...)]} text.",
                ),
            )
    assert last_error is not None
    raise last_error


def _value_text(value: Value) -> str:
    """Canonical text form used for substring matching."""
    v = canonicalize_value(value)
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, (int, float)):
        return str(v)
    return serialize_value(v)


_ADJUDICATION_SHAPE = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "call": {"type": "integer"},
            "param": {"type": "string"},
            "source": {"enum": ["profile", "query"]},
        },
        "required": ["call", "param", "source"],
    },
}


def annotate_provenance(
    sample: Sample,
    profile: UserProfile,
    gateway: Gateway,
    config: QueryGenConfig = QueryGenConfig(),
) -> Provenance:
    """Tag every gold parameter as profile- or query-originated.

    Deterministic first pass: query if the canonical value text appears in
    the query, profile if it appears among profile feature values. The LLM
    adjudicates only values matching neither or both.
    """
    query_lower = sample.query.lower()
    feature_values = [v.strip().lower() for v in profile.features.values()]

    tags: dict[tuple[int, str], str] = {}
    ambiguous: list[tuple[int, str, Value]] = []
    for ci, call in enumerate(sample.gold.calls):
        for name, value in call.args.items():
            text = _value_text(value).lower()
            in_query = bool(text) and text in query_lower
            in_profile = bool(text) and any(text in fv for fv in feature_values)
            if in_query and not in_profile:
                tags[(ci, name)] = "query"
            elif in_profile and not in_query:
                tags[(ci, name)] = "profile"
            else:
                ambiguous.append((ci, name, value))

    if ambiguous:
        tags.update(_adjudicate(sample, profile, ambiguous, gateway, config))

    provenance = Provenance(tags=tags)
    if not provenance.covers(sample.gold):
        raise UnresolvableProvenanceError(
            f"provenance incomplete for sample {sample.id!r}"
        )
    return provenance


def _adjudicate(
    sample: Sample,
    profile: UserProfile,
    items: list[tuple[int, str, Value]],
    gateway: Gateway,
    config: QueryGenConfig,
) -> dict[tuple[int, str], str]:
    listed = "\n".join(
        f"- call {ci}, {name} = {_value_text(value)}" for ci, name, value in items
    )
    prompt = prompts.render(
        "provenance_adjudication",
        profile_json=json.dumps(profile_to_record(profile), ensure_ascii=False, indent=1),
        query=sample.query,
        items=listed,
    )
    request = gateway.request(
        system="You annotate dataset parameters precisely.",
        user=prompt,
        temperature=0.0,
        seed=config.seed,
    )
    try:
        raw = gateway.complete_structured(
            request, _ADJUDICATION_SHAPE, config.repair_budget
        )
    except Exception as exc:
        raise UnresolvableProvenanceError(str(exc)) from exc
    verdicts = {(entry["call"], entry["param"]): entry["source"] for entry in raw}
    missing = [(ci, name) for ci, name, _ in items if (ci, name) not in verdicts]
    if missing:
        raise UnresolvableProvenanceError(f"adjudication skipped {missing}")
    return {(ci, name): verdicts[(ci, name)] for ci, name, _ in items}


def synthesize_sample(
    profile: UserProfile,
    scenario: Scenario,
    platforms: list[Platform],
    apis: list[ToolApi],
    gateway: Gateway,
    config: QueryGenConfig = QueryGenConfig(),
    avoid: tuple[str, ...] = (),
) -> Sample:
    """One full two-agent exchange: query, gold solution, provenance."""
    query = generate_query(profile, scenario, platforms, gateway, config, avoid)
    solution = generate_solution(profile, query, platforms, apis, gateway, config)
    draft = Sample(
        id=stable_id("smp", profile.user_id, scenario.id, query),
        user_id=profile.user_id,
        scenario=scenario.name,
        query=query,
        gold=solution,
        provenance=Provenance({key: "query" for key in solution.param_keys()}),
        status="draft",
    )
    provenance = annotate_provenance(draft, profile, gateway, config)
    return replace(draft, provenance=provenance)
