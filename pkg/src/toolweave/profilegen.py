"""User-profile construction.

Three steps: build a feature tree bottom-up by clustering platform
characteristics and API parameters (classifying clusters as basic or
implicit in the first round), assign concrete values top-down layer by
layer (k_l alternatives per partial lineage, multiplying into
N = prod(k_l) distinct profiles), then populate behavior histories by
role-play.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace

from . import prompts
from .gateway import Gateway
from .model import (
    BehaviorRecord,
    FeatureNode,
    Platform,
    Scenario,
    SourceRef,
    ToolApi,
    UserProfile,
    stable_id,
)
from .store import profile_to_record

logger = logging.getLogger(__name__)


class ProfileGenError(Exception):
    pass


class NonConvergenceError(ProfileGenError):
    """Clustering failed to reduce node count within the round cap."""


class DuplicateValuesError(ProfileGenError):
    """A layer's alternatives stayed duplicated after the repair round."""


class DanglingPlatformError(ProfileGenError):
    """Role-play emitted a platform that is not in the library."""


ROOT_LABEL = "persona"

_CLUSTER_SHAPE = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "object",
        "properties": {
            "label": {"type": "string", "minLength": 1},
            "kind": {"enum": ["basic", "implicit"]},
            "members": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        },
        "required": ["label", "kind", "members"],
    },
}

_BEHAVIOR_SHAPE = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "platform": {"type": "string"},
            "action": {"type": "string", "minLength": 1},
        },
        "required": ["platform", "action"],
    },
}


@dataclass(frozen=True)
class FeatureTree:
    root: str
    nodes: dict[str, FeatureNode]
    layer_index: dict[int, tuple[str, ...]]

    @property
    def depth(self) -> int:
        return max(self.layer_index)

    def labels_at(self, level: int) -> list[str]:
        return [self.nodes[nid].label for nid in self.layer_index[level]]

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "nodes": {
                nid: {
                    "label": n.label, "kind": n.kind, "children": list(n.children),
                    "source_refs": [
                        {"kind": r.kind, "owner_id": r.owner_id, "name": r.name}
                        for r in n.source_refs
                    ],
                }
                for nid, n in sorted(self.nodes.items())
            },
            "layers": {str(k): list(v) for k, v in sorted(self.layer_index.items())},
        }


@dataclass(frozen=True)
class AssignmentPlan:
    """Alternatives per layer, root first; the product is the profile count."""

    k_per_layer: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_per_layer", tuple(self.k_per_layer))
        if not self.k_per_layer or any(k < 1 for k in self.k_per_layer):
            raise ValueError("k_per_layer must be non-empty positive integers")

    @property
    def profile_count(self) -> int:
        return math.prod(self.k_per_layer)


def _collect_leaves(
    platforms: list[Platform], apis: list[ToolApi]
) -> dict[str, list[SourceRef]]:
    """Leaf label -> source refs; same-label leaves merge their sources."""
    leaves: dict[str, list[SourceRef]] = {}
    for p in platforms:
        for trait in p.characteristics:
            leaves.setdefault(trait, []).append(
                SourceRef("platform_characteristic", p.id, trait)
            )
    for api in apis:
        for param in api.params:
            leaves.setdefault(param.name, []).append(
                SourceRef("api_parameter", api.platform_id + ":" + api.name, param.name)
            )
    return leaves


def _cluster_call(
    template: str,
    items_text: str,
    item_labels: set[str],
    threshold: int,
    gateway: Gateway,
    repair_budget: int,
    seed: int | None,
) -> list[dict]:
    """One clustering round; the reply must partition the given labels."""
    prompt = prompts.render(template, items=items_text, threshold=str(threshold))
    request = gateway.request(
        system="You organize user-profile features into a hierarchy.",
        user=prompt,
        seed=seed,
    )
    raw = gateway.complete_structured(request, _CLUSTER_SHAPE, repair_budget)
    assigned: list[str] = [m for cluster in raw for m in cluster["members"]]
    if sorted(assigned) != sorted(item_labels):
        missing = item_labels - set(assigned)
        unknown = set(assigned) - item_labels
        raise ProfileGenError(
            f"clustering must partition the items exactly "
            f"(missing={sorted(missing)}, unknown={sorted(unknown)})"
        )
    return raw


def build_feature_tree(
    platforms: list[Platform],
    apis: list[ToolApi],
    threshold: int,
    gateway: Gateway,
    repair_budget: int = 2,
    round_cap: int = 6,
    seed: int | None = None,
) -> FeatureTree:
    """Bottom-up clustering of characteristics and parameters into a tree."""
    if threshold < 2:
        raise ValueError("threshold must be >= 2")
    leaf_sources = _collect_leaves(platforms, apis)
    if not leaf_sources:
        raise ProfileGenError("no feature leaves: empty platforms and APIs")

    nodes: dict[str, FeatureNode] = {}
    label_owner: dict[str, str] = {}

    def add_node(node: FeatureNode) -> FeatureNode:
        # profile maps are keyed by label: keep labels unique tree-wide
        label = node.label
        n = 2
        while label in label_owner:
            label = f"{node.label}_{n}"
            n += 1
        node = replace(node, label=label)
        label_owner[label] = node.id
        nodes[node.id] = node
        return node

    # initial clustering round assigns basic/implicit kinds
    leaf_labels = sorted(leaf_sources)
    clusters = _cluster_call(
        "cluster_features",
        "\n".join(f"- {label}" for label in leaf_labels),
        set(leaf_labels),
        threshold,
        gateway,
        repair_budget,
        seed,
    )
    tops: list[FeatureNode] = []
    for cluster in clusters:
        kind = cluster["kind"]
        member_nodes = []
        for member in cluster["members"]:
            leaf = add_node(
                FeatureNode(
                    id=stable_id("feat", "leaf", member),
                    label=member,
                    kind=kind,
                    source_refs=tuple(leaf_sources[member]),
                )
            )
            member_nodes.append(leaf)
        if len(member_nodes) == 1:
            tops.append(member_nodes[0])  # hoist singleton: no 1-child parents
            continue
        parent = add_node(
            FeatureNode(
                id=stable_id("feat", "cluster", cluster["label"], *cluster["members"]),
                label=cluster["label"],
                kind=kind,
                children=tuple(n.id for n in member_nodes),
            )
        )
        tops.append(parent)

    rounds = 0
    while len(tops) > threshold:
        if rounds >= round_cap:
            raise NonConvergenceError(
                f"{len(tops)} top nodes after {round_cap} clustering rounds "
                f"(threshold {threshold})"
            )
        rounds += 1
        top_by_label = {n.label: n for n in tops}
        clusters = _cluster_call(
            "cluster_round",
            "\n".join(f"- {n.label}: {n.kind}" for n in tops),
            set(top_by_label),
            threshold,
            gateway,
            repair_budget,
            seed,
        )
        new_tops: list[FeatureNode] = []
        for cluster in clusters:
            members = [top_by_label[m] for m in cluster["members"]]
            kinds = {m.kind for m in members}
            kind = "implicit" if kinds != {"basic"} else "basic"
            if len(members) == 1:
                new_tops.append(members[0])
                continue
            parent = add_node(
                FeatureNode(
                    id=stable_id("feat", "round", str(rounds), cluster["label"],
                                 *cluster["members"]),
                    label=cluster["label"],
                    kind=kind,
                    children=tuple(m.id for m in members),
                )
            )
            new_tops.append(parent)
        tops = new_tops

    if len(tops) == 1:
        root = tops[0]
    else:
        root = add_node(
            FeatureNode(
                id=stable_id("feat", "root", *(n.id for n in tops)),
                label=ROOT_LABEL,
                kind="basic",
                children=tuple(n.id for n in tops),
            )
        )

    layer_index: dict[int, list[str]] = {}

    def walk(node_id: str, level: int) -> None:
        layer_index.setdefault(level, []).append(node_id)
        for child in nodes[node_id].children:
            walk(child, level + 1)

    walk(root.id, 0)
    return FeatureTree(
        root=root.id,
        nodes=nodes,
        layer_index={k: tuple(v) for k, v in layer_index.items()},
    )


_ASSIGN_SHAPE_TEMPLATE = {
    "type": "array",
    "items": {"type": "object", "additionalProperties": {"type": "string"}},
}


def assign_characteristics(
    tree: FeatureTree,
    plan: AssignmentPlan,
    gateway: Gateway,
    repair_budget: int = 2,
    seed: int | None = None,
) -> list[UserProfile]:
    """Top-down value assignment: exactly prod(k_l) pairwise-distinct profiles.

    Every layer-l call requests only k_l alternatives for that layer's
    features, conditioned on the lineage fixed so far; alternatives multiply
    across layers into the final profile count.
    """
    if len(plan.k_per_layer) != tree.depth + 1:
        raise ValueError(
            f"plan length {len(plan.k_per_layer)} != tree depth + 1 ({tree.depth + 1})"
        )

    paths: list[dict[str, str]] = [{}]
    for level in range(tree.depth + 1):
        k = plan.k_per_layer[level]
        labels = sorted(tree.labels_at(level))
        shape = dict(_ASSIGN_SHAPE_TEMPLATE, minItems=k, maxItems=k)
        shape["items"] = dict(shape["items"], required=labels, properties={
            label: {"type": "string", "minLength": 1} for label in labels
        })
        new_paths: list[dict[str, str]] = []
        for path in paths:
            alternatives = _assign_layer(
                labels, path, k, shape, gateway, repair_budget, seed
            )
            for alt in alternatives:
                merged = dict(path)
                merged.update({label: alt[label].strip() for label in labels})
                new_paths.append(merged)
        paths = new_paths

    profiles = []
    for path in paths:
        basic = {}
        implicit = {}
        for node in tree.nodes.values():
            value = path[node.label]
            if node.kind == "basic":
                basic[node.label] = value
            else:
                implicit[node.label] = value
        profiles.append(
            UserProfile(
                user_id=stable_id("usr", *(f"{k}={v}" for k, v in sorted(path.items()))),
                basic_features=basic,
                implicit_features=implicit,
            )
        )

    distinct = {tuple(sorted(p.features.items())) for p in profiles}
    if len(distinct) != plan.profile_count:
        raise DuplicateValuesError(
            f"{len(profiles) - len(distinct)} duplicate profiles out of {len(profiles)}"
        )
    return profiles


def _assign_layer(
    labels: list[str],
    context: dict[str, str],
    k: int,
    shape: dict,
    gateway: Gateway,
    repair_budget: int,
    seed: int | None,
) -> list[dict[str, str]]:
    prompt = prompts.render(
        "assign_values",
        context_json=json.dumps(context, ensure_ascii=False, sort_keys=True) or "{}",
        features="\n".join(f"- {label}" for label in labels),
        k=str(k),
    )
    extra = ""
    for attempt in range(2):  # one LLM dedup repair round
        request = gateway.request(
            system="You mint diverse synthetic user profiles.",
            user=prompt + extra,
            seed=seed,
        )
        raw = gateway.complete_structured(request, shape, repair_budget)
        fingerprints = {tuple(sorted((k2, v.strip()) for k2, v in alt.items())) for alt in raw}
        if len(fingerprints) == k:
            return raw
        extra = "\nYour previous alternatives were not pairwise distinct. Vary the values."
    raise DuplicateValuesError(f"layer values stayed duplicated for features {labels}")


def generate_behaviors(
    profile: UserProfile,
    platforms: list[Platform],
    per_scenario_count: int,
    gateway: Gateway,
    scenarios: list[Scenario],
    repair_budget: int = 2,
    seed: int | None = None,
) -> UserProfile:
    """Role-play per-scenario action records; every platform must resolve."""
    if per_scenario_count < 1:
        raise ValueError("per_scenario_count must be >= 1")
    history: dict[str, tuple[BehaviorRecord, ...]] = {}
    scenario_by_id = {s.id: s for s in scenarios}
    by_scenario: dict[str, list[Platform]] = {}
    for p in platforms:
        scenario = scenario_by_id.get(p.scenario_id)
        if scenario is None:
            raise ProfileGenError(f"platform {p.name!r} references unknown scenario")
        by_scenario.setdefault(scenario.name, []).append(p)

    for scenario_name in sorted(by_scenario):
        scenario_platforms = by_scenario[scenario_name]
        allowed = {p.name for p in scenario_platforms}
        shape = dict(_BEHAVIOR_SHAPE, minItems=per_scenario_count,
                     maxItems=per_scenario_count)
        prompt = prompts.render(
            "behaviors",
            profile_json=json.dumps(
                {k: v for k, v in profile_to_record(profile).items() if k != "history"},
                ensure_ascii=False, indent=1,
            ),
            scenario_name=scenario_name,
            platforms_json=json.dumps(
                [{"name": p.name, "characteristics": p.characteristics}
                 for p in scenario_platforms],
                ensure_ascii=False, indent=1,
            ),
            count=str(per_scenario_count),
        )
        extra = ""
        records: list[BehaviorRecord] | None = None
        for attempt in range(2):  # one repair round for unknown platforms
            request = gateway.request(
                system="You role-play user activity on online platforms.",
                user=prompt + extra,
                seed=seed,
            )
            raw = gateway.complete_structured(request, shape, repair_budget)
            bad = sorted({r["platform"] for r in raw} - allowed)
            if not bad:
                records = [BehaviorRecord(r["platform"], r["action"]) for r in raw]
                break
            extra = (
                f"\nYou used platforms that do not exist: {bad}. "
                f"Only use: {sorted(allowed)}."
            )
        if records is None:
            raise DanglingPlatformError(
                f"role-play kept inventing platforms for scenario {scenario_name!r}"
            )
        history[scenario_name] = tuple(records)
    return profile.with_history(history)
