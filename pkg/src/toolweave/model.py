"""Core domain types shared by every pipeline stage.

Everything here is an immutable record: scenarios, platforms, tool APIs,
user profiles, tool-call solutions, and annotated samples. The module also
owns the two cross-cutting primitives every other stage relies on:
``validate_registry`` (referential/uniqueness checks over a tool library)
and ``canonicalize_value`` (the normal form used for value equality).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Union

# JSON-like argument values: text, numbers, booleans, null, lists, maps.
Value = Union[str, int, float, bool, None, list["Value"], dict[str, "Value"]]

PARAM_KINDS = ("string", "number", "integer", "boolean", "array", "object", "enum")
FEATURE_KINDS = ("basic", "implicit")
SAMPLE_STATUSES = ("draft", "rule_checked", "model_verified", "accepted", "rejected")
SPLITS = ("train", "test")
PROVENANCE_SOURCES = ("profile", "query")


def stable_id(prefix: str, *parts: str) -> str:
    """Content-derived identifier, stable across reruns."""
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()[:10]
    return f"{prefix}_{digest}"


@dataclass(frozen=True)
class Scenario:
    """A top-level demand domain (e.g. shopping) grouping its platforms."""

    id: str
    name: str
    description: str = ""


@dataclass(frozen=True)
class Platform:
    """A named provider inside a scenario, with trait descriptions."""

    id: str
    scenario_id: str
    name: str
    characteristics: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ParamSpec:
    """One parameter of a tool API."""

    name: str
    kind: str
    description: str = ""
    enum_values: tuple[str, ...] | None = None
    required: bool = False


@dataclass(frozen=True)
class ResponseField:
    name: str
    kind: str
    description: str = ""


@dataclass(frozen=True)
class ToolApi:
    """A callable tool definition. A schema only, never a live endpoint."""

    name: str
    platform_id: str
    description: str = ""
    params: tuple[ParamSpec, ...] = ()
    response_fields: tuple[ResponseField, ...] = ()

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    @property
    def required_params(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params if p.required)


@dataclass(frozen=True)
class SourceRef:
    """Pointer from a feature leaf back to the library element it came from."""

    kind: str  # "platform_characteristic" | "api_parameter"
    owner_id: str
    name: str


@dataclass(frozen=True)
class FeatureNode:
    """Node of the user feature tree. ``kind`` is fixed at creation."""

    id: str
    label: str
    kind: str  # "basic" | "implicit"
    children: tuple[str, ...] = ()
    source_refs: tuple[SourceRef, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class BehaviorRecord:
    """One past action of a user on a platform."""

    platform: str
    action: str


@dataclass(frozen=True)
class UserProfile:
    """Observable basic features, latent preference features, and history."""

    user_id: str
    basic_features: dict[str, str] = field(default_factory=dict)
    implicit_features: dict[str, str] = field(default_factory=dict)
    history: dict[str, tuple[BehaviorRecord, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        overlap = set(self.basic_features) & set(self.implicit_features)
        if overlap:
            raise ValueError(f"basic/implicit feature labels overlap: {sorted(overlap)}")

    @property
    def features(self) -> dict[str, str]:
        """Union of basic and implicit features (labels are disjoint)."""
        return {**self.basic_features, **self.implicit_features}

    def with_history(self, history: dict[str, tuple[BehaviorRecord, ...]]) -> "UserProfile":
        return replace(self, history=dict(history))


@dataclass(frozen=True)
class ToolCall:
    """One function call: platform, tool name, and an ordered argument map."""

    platform: str
    function: str
    args: dict[str, Value] = field(default_factory=dict)


@dataclass(frozen=True)
class Solution:
    """An ordered list of tool calls answering one query."""

    calls: tuple[ToolCall, ...] = ()

    def param_keys(self) -> tuple[tuple[int, str], ...]:
        """Every (call-index, param-name) pair, in textual order."""
        return tuple(
            (i, name) for i, call in enumerate(self.calls) for name in call.args
        )


@dataclass(frozen=True)
class Provenance:
    """Per-parameter origin tags keyed by (call-index, param-name)."""

    tags: dict[tuple[int, str], str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key, source in self.tags.items():
            if source not in PROVENANCE_SOURCES:
                raise ValueError(f"bad provenance source {source!r} for {key}")

    def covers(self, solution: Solution) -> bool:
        """True iff the key set equals the solution's (call, param) pairs."""
        return set(self.tags) == set(solution.param_keys())

    @property
    def profile_keys(self) -> frozenset[tuple[int, str]]:
        return frozenset(k for k, v in self.tags.items() if v == "profile")


@dataclass(frozen=True)
class Sample:
    """A query with its gold solution, provenance, and workflow status."""

    id: str
    user_id: str
    scenario: str
    query: str
    gold: Solution
    provenance: Provenance
    status: str = "draft"
    split: str | None = None

    def __post_init__(self) -> None:
        if self.status not in SAMPLE_STATUSES:
            raise ValueError(f"unknown sample status {self.status!r}")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")

    @property
    def profile_dependent(self) -> bool:
        """True iff at least one gold parameter originates from the profile."""
        return bool(self.provenance.profile_keys)

    def with_status(self, status: str) -> "Sample":
        return replace(self, status=status)


@dataclass(frozen=True)
class ToolRegistry:
    """The generated library: scenarios, platforms, and tool APIs."""

    scenarios: tuple[Scenario, ...] = ()
    platforms: tuple[Platform, ...] = ()
    apis: tuple[ToolApi, ...] = ()

    @cached_property
    def scenario_by_id(self) -> dict[str, Scenario]:
        return {s.id: s for s in self.scenarios}

    @cached_property
    def platform_by_name(self) -> dict[str, Platform]:
        return {p.name: p for p in self.platforms}

    @cached_property
    def platform_by_id(self) -> dict[str, Platform]:
        return {p.id: p for p in self.platforms}

    @cached_property
    def api_by_key(self) -> dict[tuple[str, str], ToolApi]:
        """APIs keyed by (platform name, function name)."""
        out: dict[tuple[str, str], ToolApi] = {}
        for api in self.apis:
            platform = self.platform_by_id.get(api.platform_id)
            if platform is not None:
                out[(platform.name, api.name)] = api
        return out

    def lookup(self, platform_name: str, function: str) -> ToolApi | None:
        return self.api_by_key.get((platform_name, function))

    def validate(self) -> list["RegistryViolation"]:
        return validate_registry(self.scenarios, self.platforms, self.apis)


@dataclass(frozen=True)
class RegistryViolation:
    """One broken registry invariant; violations are data, not failures."""

    entity: str
    rule: str
    detail: str = ""


def validate_registry(
    scenarios: tuple[Scenario, ...] | list[Scenario],
    platforms: tuple[Platform, ...] | list[Platform],
    apis: tuple[ToolApi, ...] | list[ToolApi],
) -> list[RegistryViolation]:
    """Check cross-references and uniqueness invariants of a tool library.

    Returns an empty list iff every reference resolves and every uniqueness
    rule holds. Each violation names the offending entity and the rule.
    """
    out: list[RegistryViolation] = []

    seen_scn: set[str] = set()
    for s in scenarios:
        if s.id in seen_scn:
            out.append(RegistryViolation(f"scenario:{s.id}", "duplicate-id"))
        seen_scn.add(s.id)
        if not s.name.strip():
            out.append(RegistryViolation(f"scenario:{s.id}", "empty-name"))

    scn_ids = {s.id for s in scenarios}
    seen_plt: set[str] = set()
    names_in_scn: set[tuple[str, str]] = set()
    for p in platforms:
        if p.id in seen_plt:
            out.append(RegistryViolation(f"platform:{p.id}", "duplicate-id"))
        seen_plt.add(p.id)
        if p.scenario_id not in scn_ids:
            out.append(
                RegistryViolation(
                    f"platform:{p.name}", "dangling-reference",
                    f"scenario_id {p.scenario_id!r} does not resolve",
                )
            )
        key = (p.scenario_id, p.name)
        if key in names_in_scn:
            out.append(
                RegistryViolation(
                    f"platform:{p.name}", "duplicate-name",
                    f"name repeated within scenario {p.scenario_id}",
                )
            )
        names_in_scn.add(key)
        if not p.characteristics:
            out.append(RegistryViolation(f"platform:{p.name}", "no-characteristics"))

    plt_ids = {p.id for p in platforms}
    api_names_in_plt: set[tuple[str, str]] = set()
    for api in apis:
        ent = f"api:{api.name}"
        if api.platform_id not in plt_ids:
            out.append(
                RegistryViolation(
                    ent, "dangling-reference",
                    f"platform_id {api.platform_id!r} does not resolve",
                )
            )
        key = (api.platform_id, api.name)
        if key in api_names_in_plt:
            out.append(
                RegistryViolation(
                    ent, "duplicate-name",
                    f"name repeated within platform {api.platform_id}",
                )
            )
        api_names_in_plt.add(key)

        seen_params: set[str] = set()
        for spec in api.params:
            if spec.name in seen_params:
                out.append(
                    RegistryViolation(ent, "duplicate-param", f"param {spec.name!r}")
                )
            seen_params.add(spec.name)
            if spec.kind not in PARAM_KINDS:
                out.append(
                    RegistryViolation(ent, "unknown-kind", f"param {spec.name!r}: {spec.kind!r}")
                )
            if spec.kind == "enum" and not spec.enum_values:
                out.append(
                    RegistryViolation(
                        ent, "enum-without-values", f"param {spec.name!r}"
                    )
                )
            if spec.kind != "enum" and spec.enum_values:
                out.append(
                    RegistryViolation(
                        ent, "values-without-enum", f"param {spec.name!r}"
                    )
                )
        for rf in api.response_fields:
            if rf.kind not in PARAM_KINDS:
                out.append(
                    RegistryViolation(ent, "unknown-kind", f"response {rf.name!r}: {rf.kind!r}")
                )
    return out


def canonicalize_value(v: Value) -> Value:
    """Normal form for argument values; idempotent.

    Text is trimmed, integer-valued floats become integers, lists and maps
    canonicalize recursively, map keys are emitted in sorted order.
    """
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, str):
        return v.strip()
    if isinstance(v, float):
        if math.isfinite(v) and v.is_integer():
            return int(v)
        return v
    if isinstance(v, int):
        return v
    if isinstance(v, list):
        return [canonicalize_value(x) for x in v]
    if isinstance(v, dict):
        return {k: canonicalize_value(v[k]) for k in sorted(v)}
    raise TypeError(f"not a Value: {type(v).__name__}")


def values_equal(a: Value, b: Value) -> bool:
    """Equality under canonicalization (the evaluator's value test)."""
    return canonicalize_value(a) == canonicalize_value(b)
