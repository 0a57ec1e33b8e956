"""Tool-library synthesis: scenarios, platforms, functionality tree, APIs.

The library grows as a tree: scenario roots, platform children, then
depth-first refinement of functionality descriptions until nodes are
specific enough to define concrete tool APIs as leaves. Platforms of one
scenario are prompted with a shared functionality-category list so that
functionally similar tools exist across platforms.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from . import prompts
from .gateway import Gateway
from .grammar import IDENT_RE
from .model import (
    PARAM_KINDS,
    ParamSpec,
    Platform,
    ResponseField,
    Scenario,
    ToolApi,
    ToolRegistry,
    stable_id,
    validate_registry,
)

logger = logging.getLogger(__name__)


class ToolGenError(Exception):
    """Library generation failed (invalid output, broken invariant)."""


class DistinctnessError(ToolGenError):
    """The generator kept returning duplicate names after repairs."""


class TargetUnreachableError(ToolGenError):
    """API-count target missed with the regeneration budget exhausted."""


@dataclass(frozen=True)
class ToolGenConfig:
    platforms_per_scenario: int = 3
    apis_per_platform: int = 24
    max_depth: int = 4  # functionality levels below the platform level
    regen_budget: int = 3
    repair_budget: int = 2
    seed: int | None = None


@dataclass(frozen=True)
class ApiTreeNode:
    """One tree node; scenarios at level 0, platforms at level 1, API leaves."""

    id: str
    level: int
    kind: str  # "scenario" | "platform" | "functionality" | "api"
    label: str
    payload: Scenario | Platform | ToolApi | None = None
    children: tuple[str, ...] = ()


@dataclass(frozen=True)
class ApiTree:
    nodes: dict[str, ApiTreeNode] = field(default_factory=dict)
    roots: tuple[str, ...] = ()

    def children_of(self, node_id: str) -> list[ApiTreeNode]:
        return [self.nodes[c] for c in self.nodes[node_id].children]

    def to_dict(self) -> dict:
        def node_dict(n: ApiTreeNode) -> dict:
            return {
                "id": n.id, "level": n.level, "kind": n.kind, "label": n.label,
                "children": list(n.children),
            }

        return {
            "roots": list(self.roots),
            "nodes": {nid: node_dict(n) for nid, n in sorted(self.nodes.items())},
        }


@dataclass(frozen=True)
class ExpandContext:
    """Prompt context that a bare tree node does not carry."""

    scenario: Scenario
    platform: Platform
    path: tuple[str, ...] = ()
    quota: int = 4
    force_leaf: bool = False


_PLATFORMS_SHAPE = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "name": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"},
            "characteristics": {
                "type": "object",
                "minProperties": 1,
                "additionalProperties": {"type": "string"},
            },
        },
        "required": ["name", "characteristics"],
    },
}

_CATEGORIES_SHAPE = {
    "type": "array",
    "items": {"type": "string"},
    "minItems": 2,
    "maxItems": 8,
}

_API_SHAPE = {
    "type": "object",
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"},
        "description": {"type": "string"},
        "params": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"},
                    "kind": {"enum": list(PARAM_KINDS)},
                    "description": {"type": "string"},
                    "required": {"type": "boolean"},
                    "enum_values": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                },
                "required": ["name", "kind"],
            },
        },
        "response_fields": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "kind": {"enum": list(PARAM_KINDS)},
                    "description": {"type": "string"},
                },
                "required": ["name", "kind"],
            },
        },
    },
    "required": ["name", "description", "params"],
}


def _expand_shape(force_leaf: bool) -> dict:
    kinds = ["apis"] if force_leaf else ["refine", "apis"]
    return {
        "type": "object",
        "properties": {
            "kind": {"enum": kinds},
            "children": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "apis": {"type": "array", "items": _API_SHAPE, "minItems": 1},
        },
        "required": ["kind"],
    }


def _param_from_spec(raw: dict) -> ParamSpec:
    kind = raw["kind"]
    enum_values = raw.get("enum_values")
    if kind == "enum" and not enum_values:
        raise ToolGenError(f"enum parameter {raw['name']!r} without enum_values")
    if kind != "enum" and enum_values:
        raise ToolGenError(f"non-enum parameter {raw['name']!r} carries enum_values")
    return ParamSpec(
        name=raw["name"],
        kind=kind,
        description=raw.get("description", ""),
        enum_values=tuple(enum_values) if enum_values else None,
        required=bool(raw.get("required", False)),
    )


def _api_from_spec(raw: dict, platform_id: str) -> ToolApi:
    params = tuple(_param_from_spec(p) for p in raw["params"])
    seen: set[str] = set()
    for p in params:
        if p.name in seen:
            raise ToolGenError(f"api {raw['name']!r} repeats parameter {p.name!r}")
        seen.add(p.name)
    fields = tuple(
        ResponseField(f["name"], f["kind"], f.get("description", ""))
        for f in raw.get("response_fields", ())
    )
    return ToolApi(
        name=raw["name"],
        platform_id=platform_id,
        description=raw["description"],
        params=params,
        response_fields=fields,
    )


def generate_platforms(
    scenario: Scenario,
    count: int,
    gateway: Gateway,
    config: ToolGenConfig = ToolGenConfig(),
) -> list[Platform]:
    """Mint ``count`` platforms with pairwise-distinct names and traits."""
    if count < 2:
        raise ValueError("count must be >= 2: preference needs alternative platforms")
    shape = dict(_PLATFORMS_SHAPE, minItems=count, maxItems=count)
    prompt = prompts.render(
        "platforms",
        scenario_name=scenario.name,
        scenario_description=scenario.description or scenario.name,
        count=str(count),
    )
    extra = ""
    for _ in range(config.repair_budget + 1):
        request = gateway.request(
            system="You design realistic online service platforms.",
            user=prompt + extra,
            seed=config.seed,
        )
        raw = gateway.complete_structured(request, shape, config.repair_budget)
        names = [entry["name"] for entry in raw]
        if len(set(names)) == len(names):
            return [
                Platform(
                    id=stable_id("plt", scenario.id, entry["name"]),
                    scenario_id=scenario.id,
                    name=entry["name"],
                    characteristics=dict(entry["characteristics"]),
                )
                for entry in raw
            ]
        extra = f"\nYour previous attempt repeated names: {sorted(set(names))}. All names must differ."
    raise DistinctnessError(f"duplicate platform names persisted for scenario {scenario.name!r}")


def scenario_categories(
    scenario: Scenario, gateway: Gateway, config: ToolGenConfig = ToolGenConfig()
) -> list[str]:
    """Shared functionality-category labels for one scenario's platforms."""
    prompt = prompts.render(
        "scenario_categories",
        scenario_name=scenario.name,
        scenario_description=scenario.description or scenario.name,
    )
    request = gateway.request(
        system="You design tool taxonomies for online platforms.",
        user=prompt,
        seed=config.seed,
    )
    raw = gateway.complete_structured(request, _CATEGORIES_SHAPE, config.repair_budget)
    return [str(c) for c in raw]


def expand_functionality(
    node: ApiTreeNode,
    gateway: Gateway,
    config: ToolGenConfig,
    context: ExpandContext,
) -> list[ApiTreeNode]:
    """One depth-first expansion step: refined children or API leaves."""
    if node.kind not in ("platform", "functionality"):
        raise ValueError(f"cannot expand a {node.kind} node")
    depth_below_platform = node.level - 1
    force_leaf = context.force_leaf or depth_below_platform >= config.max_depth
    if node.kind == "platform":
        force_leaf = False
        leaf_instruction = (
            "This is the platform itself: refine it into its functionality "
            "categories (kind=refine). Prefer these shared scenario categories "
            f"so platforms stay comparable: {json.dumps(list(context.path), ensure_ascii=False)}."
        )
    elif force_leaf:
        leaf_instruction = "Maximum refinement depth reached: you must define APIs now."
    else:
        leaf_instruction = (
            "Decide yourself: refine further only if the node is still too "
            "broad to define concrete APIs."
        )
    prompt = prompts.render(
        "expand_node",
        scenario_name=context.scenario.name,
        platform_name=context.platform.name,
        platform_characteristics=json.dumps(context.platform.characteristics, ensure_ascii=False),
        path=" > ".join(context.path) or "(top)",
        node_label=node.label,
        leaf_instruction=leaf_instruction,
        quota=str(max(context.quota, 1)),
    )
    shape = _expand_shape(force_leaf and node.kind != "platform")
    if node.kind == "platform":
        shape = dict(shape)
        shape["properties"] = dict(shape["properties"])
        shape["properties"]["kind"] = {"enum": ["refine"]}
    request = gateway.request(
        system="You expand functionality trees into concrete tool APIs.",
        user=prompt,
        seed=config.seed,
    )
    raw = gateway.complete_structured(request, shape, config.repair_budget)

    if raw["kind"] == "refine":
        children = raw.get("children") or []
        if not children:
            raise ToolGenError(f"refine reply without children at {node.label!r}")
        return [
            ApiTreeNode(
                id=stable_id("fn", context.platform.id, *context.path, node.label, label),
                level=node.level + 1,
                kind="functionality",
                label=label,
            )
            for label in children
        ]
    api_specs = raw.get("apis") or []
    if not api_specs:
        raise ToolGenError(f"apis reply without apis at {node.label!r}")
    out = []
    for spec in api_specs:
        api = _api_from_spec(spec, context.platform.id)
        out.append(
            ApiTreeNode(
                id=stable_id("api", context.platform.id, api.name),
                level=node.level + 1,
                kind="api",
                label=api.name,
                payload=api,
            )
        )
    return out


def _split_quota(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [max(base + (1 if i < rem else 0), 1) for i in range(parts)]


def _more_apis(
    scenario: Scenario,
    platform: Platform,
    categories: list[str],
    existing: list[str],
    count: int,
    gateway: Gateway,
    config: ToolGenConfig,
) -> list[ToolApi]:
    prompt = prompts.render(
        "more_apis",
        count=str(count),
        scenario_name=scenario.name,
        platform_name=platform.name,
        categories=json.dumps(categories, ensure_ascii=False),
        existing_names=json.dumps(existing, ensure_ascii=False),
    )
    request = gateway.request(
        system="You expand functionality trees into concrete tool APIs.",
        user=prompt,
        seed=config.seed,
    )
    raw = gateway.complete_structured(
        request, {"type": "array", "items": _API_SHAPE, "minItems": 1}, config.repair_budget
    )
    return [_api_from_spec(spec, platform.id) for spec in raw]


def build_tool_library(
    scenarios: list[Scenario],
    config: ToolGenConfig,
    gateway: Gateway,
) -> tuple[ApiTree, ToolRegistry]:
    """Whole-stage orchestration; counts must match the configured targets."""
    if not scenarios:
        raise ValueError("scenarios must be non-empty")

    nodes: dict[str, ApiTreeNode] = {}
    roots: list[str] = []
    all_platforms: list[Platform] = []
    all_apis: list[ToolApi] = []

    for scenario in scenarios:
        scn_node = ApiTreeNode(
            id=stable_id("scn", scenario.id), level=0, kind="scenario",
            label=scenario.name, payload=scenario,
        )
        categories = scenario_categories(scenario, gateway, config)
        platforms = generate_platforms(
            scenario, config.platforms_per_scenario, gateway, config
        )
        all_platforms.extend(platforms)

        platform_node_ids = []
        category_labels_by_platform: dict[str, set[str]] = {}
        for platform in platforms:
            plt_node = ApiTreeNode(
                id=stable_id("pltnode", platform.id), level=1, kind="platform",
                label=platform.name, payload=platform,
            )
            kept_apis, plt_children = _expand_platform(
                scenario, platform, plt_node, categories, gateway, config, nodes
            )
            nodes[plt_node.id] = ApiTreeNode(
                id=plt_node.id, level=1, kind="platform", label=platform.name,
                payload=platform, children=tuple(plt_children),
            )
            platform_node_ids.append(plt_node.id)
            category_labels_by_platform[platform.name] = {
                nodes[c].label for c in plt_children
            }
            all_apis.extend(kept_apis)

        if len(platforms) >= 2:
            shared = set.intersection(*category_labels_by_platform.values()) if (
                category_labels_by_platform
            ) else set()
            if not shared:
                # fall back to the weaker pairwise requirement before failing
                labels = list(category_labels_by_platform.values())
                pairwise = any(
                    labels[i] & labels[j]
                    for i in range(len(labels))
                    for j in range(i + 1, len(labels))
                )
                if not pairwise:
                    raise ToolGenError(
                        f"no functionality overlap across platforms of {scenario.name!r}"
                    )

        nodes[scn_node.id] = ApiTreeNode(
            id=scn_node.id, level=0, kind="scenario", label=scenario.name,
            payload=scenario, children=tuple(platform_node_ids),
        )
        roots.append(scn_node.id)

    registry = ToolRegistry(
        scenarios=tuple(scenarios), platforms=tuple(all_platforms), apis=tuple(all_apis)
    )
    violations = validate_registry(registry.scenarios, registry.platforms, registry.apis)
    if violations:
        raise ToolGenError(f"generated library violates registry invariants: {violations[:3]}")
    return ApiTree(nodes=nodes, roots=tuple(roots)), registry


def _expand_platform(
    scenario: Scenario,
    platform: Platform,
    plt_node: ApiTreeNode,
    categories: list[str],
    gateway: Gateway,
    config: ToolGenConfig,
    nodes: dict[str, ApiTreeNode],
) -> tuple[list[ToolApi], list[str]]:
    """Depth-first expansion of one platform; enforces the API-count target."""
    target = config.apis_per_platform

    first_level = expand_functionality(
        plt_node, gateway, config,
        ExpandContext(scenario=scenario, platform=platform, path=tuple(categories)),
    )
    quotas = _split_quota(target, len(first_level))

    api_nodes: list[tuple[ApiTreeNode, str]] = []  # (api node, parent id)
    seen_names: set[str] = set()

    def dfs(node: ApiTreeNode, path: tuple[str, ...], quota: int) -> None:
        children = expand_functionality(
            node, gateway, config,
            ExpandContext(scenario=scenario, platform=platform, path=path, quota=quota),
        )
        child_ids = []
        api_children = [c for c in children if c.kind == "api"]
        fn_children = [c for c in children if c.kind == "functionality"]
        for child in api_children:
            api: ToolApi = child.payload  # type: ignore[assignment]
            if api.name in seen_names:
                logger.debug("dropping duplicate api %s on %s", api.name, platform.name)
                continue
            seen_names.add(api.name)
            api_nodes.append((child, node.id))
            child_ids.append(child.id)
        if fn_children:
            sub_quotas = _split_quota(quota, len(fn_children))
            for child, q in zip(fn_children, sub_quotas):
                nodes[child.id] = child
                child_ids.append(child.id)
                dfs(child, path + (child.label,), q)
        nodes[node.id] = ApiTreeNode(
            id=node.id, level=node.level, kind=node.kind, label=node.label,
            payload=node.payload, children=tuple(child_ids),
        )

    plt_children = []
    for child, quota in zip(first_level, quotas):
        nodes[child.id] = child
        plt_children.append(child.id)
        dfs(child, (child.label,), quota)

    # enforce the per-platform API target: trim overshoot, regenerate shortfall
    if len(api_nodes) > target:
        for node, parent_id in api_nodes[target:]:
            parent = nodes[parent_id]
            nodes[parent_id] = ApiTreeNode(
                id=parent.id, level=parent.level, kind=parent.kind, label=parent.label,
                payload=parent.payload,
                children=tuple(c for c in parent.children if c != node.id),
            )
        api_nodes = api_nodes[:target]

    budget = config.regen_budget
    while len(api_nodes) < target:
        if budget <= 0:
            raise TargetUnreachableError(
                f"platform {platform.name!r}: {len(api_nodes)}/{target} APIs, "
                "regeneration budget exhausted"
            )
        budget -= 1
        need = target - len(api_nodes)
        extra = _more_apis(
            scenario, platform, categories, sorted(seen_names), need, gateway, config
        )
        attach_to = plt_children[0] if plt_children else plt_node.id
        for api in extra[:need]:
            if api.name in seen_names:
                continue
            seen_names.add(api.name)
            child = ApiTreeNode(
                id=stable_id("api", platform.id, api.name),
                level=nodes[attach_to].level + 1,
                kind="api", label=api.name, payload=api,
            )
            parent = nodes[attach_to]
            nodes[attach_to] = ApiTreeNode(
                id=parent.id, level=parent.level, kind=parent.kind, label=parent.label,
                payload=parent.payload, children=parent.children + (child.id,),
            )
            api_nodes.append((child, attach_to))

    for node, _ in api_nodes:
        nodes[node.id] = node
    kept = [node.payload for node, _ in api_nodes]
    return kept, plt_children  # type: ignore[return-value]
