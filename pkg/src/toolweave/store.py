"""Flat-file persistence for every pipeline artifact, plus the corpus split.

Records are line-delimited JSON, one entity per line, UTF-8, stable field
order. Loading is strict: unknown or missing fields raise SchemaMismatchError
with the file and line number. ``load(save(x)) == x`` for every entity type.

Directory layout under a corpus root:

    scenarios.jsonl  platforms.jsonl  tools.jsonl  profiles.jsonl
    samples.jsonl    rejections.jsonl
    splits/train.jsonl  splits/test.jsonl
    manifest.json
    predictions/<model>.jsonl   reports/<model>.json
    apitree.json  featuretree.json   (audit artifacts)

Field schemas are documented in docs/formats.md and are bit-exact contracts.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, TypeVar

from .model import (
    BehaviorRecord,
    ParamSpec,
    Platform,
    Provenance,
    ResponseField,
    Sample,
    Scenario,
    Solution,
    ToolApi,
    ToolCall,
    ToolRegistry,
    UserProfile,
)

T = TypeVar("T")


class SchemaMismatchError(Exception):
    def __init__(self, path: Path | str, line: int, detail: str):
        self.path = str(path)
        self.line = line
        self.detail = detail
        super().__init__(f"{path}:{line}: {detail}")


def _require_fields(record: dict, required: set[str], optional: set[str] = frozenset()):
    keys = set(record)
    missing = required - keys
    unknown = keys - required - optional
    if missing or unknown:
        parts = []
        if missing:
            parts.append(f"missing fields {sorted(missing)}")
        if unknown:
            parts.append(f"unknown fields {sorted(unknown)}")
        raise ValueError("; ".join(parts))


# -- per-entity record codecs (stable field order) ---------------------------

def scenario_to_record(s: Scenario) -> dict:
    return {"id": s.id, "name": s.name, "description": s.description}


def record_to_scenario(r: dict) -> Scenario:
    _require_fields(r, {"id", "name", "description"})
    return Scenario(id=r["id"], name=r["name"], description=r["description"])


def platform_to_record(p: Platform) -> dict:
    return {
        "id": p.id, "scenario_id": p.scenario_id, "name": p.name,
        "characteristics": dict(p.characteristics),
    }


def record_to_platform(r: dict) -> Platform:
    _require_fields(r, {"id", "scenario_id", "name", "characteristics"})
    return Platform(
        id=r["id"], scenario_id=r["scenario_id"], name=r["name"],
        characteristics=dict(r["characteristics"]),
    )


def api_to_record(a: ToolApi) -> dict:
    params = []
    for p in a.params:
        rec: dict[str, Any] = {
            "name": p.name, "kind": p.kind, "description": p.description,
            "required": p.required,
        }
        if p.enum_values is not None:
            rec["enum_values"] = list(p.enum_values)
        params.append(rec)
    return {
        "platform_id": a.platform_id,
        "name": a.name,
        "description": a.description,
        "params": params,
        "response_fields": [
            {"name": f.name, "kind": f.kind, "description": f.description}
            for f in a.response_fields
        ],
    }


def record_to_api(r: dict) -> ToolApi:
    _require_fields(r, {"platform_id", "name", "description", "params", "response_fields"})
    params = []
    for p in r["params"]:
        _require_fields(p, {"name", "kind", "description", "required"}, {"enum_values"})
        enum_values = tuple(p["enum_values"]) if "enum_values" in p else None
        params.append(
            ParamSpec(
                name=p["name"], kind=p["kind"], description=p["description"],
                enum_values=enum_values, required=p["required"],
            )
        )
    fields = []
    for f in r["response_fields"]:
        _require_fields(f, {"name", "kind", "description"})
        fields.append(ResponseField(name=f["name"], kind=f["kind"], description=f["description"]))
    return ToolApi(
        name=r["name"], platform_id=r["platform_id"], description=r["description"],
        params=tuple(params), response_fields=tuple(fields),
    )


def profile_to_record(u: UserProfile) -> dict:
    return {
        "user_id": u.user_id,
        "basic_features": dict(u.basic_features),
        "implicit_features": dict(u.implicit_features),
        "history": {
            scenario: [{"platform": b.platform, "action": b.action} for b in records]
            for scenario, records in u.history.items()
        },
    }


def record_to_profile(r: dict) -> UserProfile:
    _require_fields(r, {"user_id", "basic_features", "implicit_features", "history"})
    history = {}
    for scenario, records in r["history"].items():
        entries = []
        for b in records:
            _require_fields(b, {"platform", "action"})
            entries.append(BehaviorRecord(platform=b["platform"], action=b["action"]))
        history[scenario] = tuple(entries)
    return UserProfile(
        user_id=r["user_id"],
        basic_features=dict(r["basic_features"]),
        implicit_features=dict(r["implicit_features"]),
        history=history,
    )


def solution_to_record(s: Solution) -> dict:
    return {
        "calls": [
            {"platform": c.platform, "function": c.function, "args": dict(c.args)}
            for c in s.calls
        ]
    }


def record_to_solution(r: dict) -> Solution:
    _require_fields(r, {"calls"})
    calls = []
    for c in r["calls"]:
        _require_fields(c, {"platform", "function", "args"})
        calls.append(ToolCall(platform=c["platform"], function=c["function"], args=dict(c["args"])))
    return Solution(calls=tuple(calls))


def sample_to_record(s: Sample) -> dict:
    provenance = [
        {"call": ci, "param": name, "source": s.provenance.tags[(ci, name)]}
        for ci, name in sorted(s.provenance.tags)
    ]
    return {
        "id": s.id,
        "user_id": s.user_id,
        "scenario": s.scenario,
        "query": s.query,
        "gold": solution_to_record(s.gold),
        "provenance": provenance,
        "status": s.status,
        "split": s.split,
    }


def record_to_sample(r: dict) -> Sample:
    _require_fields(
        r, {"id", "user_id", "scenario", "query", "gold", "provenance", "status", "split"}
    )
    tags = {}
    for t in r["provenance"]:
        _require_fields(t, {"call", "param", "source"})
        tags[(t["call"], t["param"])] = t["source"]
    return Sample(
        id=r["id"], user_id=r["user_id"], scenario=r["scenario"], query=r["query"],
        gold=record_to_solution(r["gold"]), provenance=Provenance(tags=tags),
        status=r["status"], split=r["split"],
    )


def prediction_to_record(sample_id: str, prediction: str) -> dict:
    return {"sample_id": sample_id, "prediction": prediction}


def record_to_prediction(r: dict) -> tuple[str, str]:
    _require_fields(r, {"sample_id", "prediction"})
    return r["sample_id"], r["prediction"]


# -- generic JSONL I/O --------------------------------------------------------

def save_jsonl(path: Path, records: Iterable[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")


def load_jsonl(path: Path, decode: Callable[[dict], T]) -> list[T]:
    out: list[T] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                out.append(decode(record))
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaMismatchError(path, lineno, str(exc)) from exc
    return out


# -- the split ----------------------------------------------------------------

@dataclass(frozen=True)
class Split:
    """Partition of the corpus; untrained users are fully held out."""

    train: tuple[Sample, ...]
    test: tuple[Sample, ...]
    untrained_users: frozenset[str]

    @property
    def test_trained(self) -> tuple[Sample, ...]:
        return tuple(s for s in self.test if s.user_id not in self.untrained_users)

    @property
    def test_untrained(self) -> tuple[Sample, ...]:
        return tuple(s for s in self.test if s.user_id in self.untrained_users)

    def user_split(self) -> dict[str, str]:
        """user_id -> "trained" | "untrained" over users seen in the corpus."""
        out = {}
        for s in self.train + self.test:
            out[s.user_id] = "untrained" if s.user_id in self.untrained_users else "trained"
        return out


def split_corpus(
    samples: list[Sample],
    profiles: list[UserProfile],
    untrained_user_count: int,
    trained_test_fraction: float,
    seed: int,
) -> Split:
    """Hold out whole users, then sample a fraction of remaining queries.

    All queries of ``untrained_user_count`` uniformly chosen users go to the
    test set; of the remaining users' queries, round(fraction * count) are
    sampled uniformly into the test set. Deterministic given the seed.
    """
    users = sorted({p.user_id for p in profiles})
    if untrained_user_count >= len(users):
        raise ValueError("untrained_user_count must be smaller than the user count")
    if untrained_user_count < 0:
        raise ValueError("untrained_user_count must be >= 0")
    if not 0 < trained_test_fraction < 1:
        raise ValueError("trained_test_fraction must be in (0, 1)")

    rng = random.Random(seed)
    untrained = frozenset(rng.sample(users, untrained_user_count))

    trained_pool = [s for s in samples if s.user_id not in untrained]
    n_test = round(trained_test_fraction * len(trained_pool))
    chosen = set(rng.sample(range(len(trained_pool)), n_test))

    test: list[Sample] = []
    train: list[Sample] = []
    pool_index = 0
    for s in samples:
        if s.user_id in untrained:
            test.append(replace(s, split="test"))
            continue
        if pool_index in chosen:
            test.append(replace(s, split="test"))
        else:
            train.append(replace(s, split="train"))
        pool_index += 1
    return Split(train=tuple(train), test=tuple(test), untrained_users=untrained)


# -- manifest -----------------------------------------------------------------

@dataclass(frozen=True)
class CorpusManifest:
    counts: dict[str, int] = field(default_factory=dict)
    split: dict[str, int] = field(default_factory=dict)
    seed: int | None = None
    untrained_users: tuple[str, ...] = ()
    stage_checksums: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "split": dict(self.split),
            "seed": self.seed,
            "untrained_users": list(self.untrained_users),
            "stage_checksums": dict(self.stage_checksums),
        }

    @classmethod
    def from_dict(cls, r: dict) -> "CorpusManifest":
        _require_fields(r, {"counts", "split", "seed", "untrained_users", "stage_checksums"})
        return cls(
            counts=dict(r["counts"]),
            split=dict(r["split"]),
            seed=r["seed"],
            untrained_users=tuple(r["untrained_users"]),
            stage_checksums=dict(r["stage_checksums"]),
        )


class Store:
    """Typed access to one corpus directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    # paths
    @property
    def scenarios_path(self) -> Path: return self.root / "scenarios.jsonl"
    @property
    def platforms_path(self) -> Path: return self.root / "platforms.jsonl"
    @property
    def tools_path(self) -> Path: return self.root / "tools.jsonl"
    @property
    def profiles_path(self) -> Path: return self.root / "profiles.jsonl"
    @property
    def samples_path(self) -> Path: return self.root / "samples.jsonl"
    @property
    def rejections_path(self) -> Path: return self.root / "rejections.jsonl"
    @property
    def train_path(self) -> Path: return self.root / "splits" / "train.jsonl"
    @property
    def test_path(self) -> Path: return self.root / "splits" / "test.jsonl"
    @property
    def manifest_path(self) -> Path: return self.root / "manifest.json"
    @property
    def apitree_path(self) -> Path: return self.root / "apitree.json"
    @property
    def featuretree_path(self) -> Path: return self.root / "featuretree.json"

    def predictions_path(self, model: str) -> Path:
        return self.root / "predictions" / f"{model}.jsonl"

    def report_path(self, model: str) -> Path:
        return self.root / "reports" / f"{model}.json"

    # entity streams
    def save_scenarios(self, items: Iterable[Scenario]) -> None:
        save_jsonl(self.scenarios_path, (scenario_to_record(x) for x in items))

    def load_scenarios(self) -> list[Scenario]:
        return load_jsonl(self.scenarios_path, record_to_scenario)

    def save_platforms(self, items: Iterable[Platform]) -> None:
        save_jsonl(self.platforms_path, (platform_to_record(x) for x in items))

    def load_platforms(self) -> list[Platform]:
        return load_jsonl(self.platforms_path, record_to_platform)

    def save_apis(self, items: Iterable[ToolApi]) -> None:
        save_jsonl(self.tools_path, (api_to_record(x) for x in items))

    def load_apis(self) -> list[ToolApi]:
        return load_jsonl(self.tools_path, record_to_api)

    def save_profiles(self, items: Iterable[UserProfile]) -> None:
        save_jsonl(self.profiles_path, (profile_to_record(x) for x in items))

    def load_profiles(self) -> list[UserProfile]:
        return load_jsonl(self.profiles_path, record_to_profile)

    def save_samples(self, items: Iterable[Sample], path: Path | None = None) -> None:
        save_jsonl(path or self.samples_path, (sample_to_record(x) for x in items))

    def load_samples(self, path: Path | None = None) -> list[Sample]:
        return load_jsonl(path or self.samples_path, record_to_sample)

    def save_predictions(self, model: str, items: Iterable[tuple[str, str]]) -> None:
        save_jsonl(
            self.predictions_path(model),
            (prediction_to_record(sid, text) for sid, text in items),
        )

    def load_predictions(self, model: str) -> dict[str, str]:
        pairs = load_jsonl(self.predictions_path(model), record_to_prediction)
        return dict(pairs)

    def load_registry(self) -> ToolRegistry:
        return ToolRegistry(
            scenarios=tuple(self.load_scenarios()),
            platforms=tuple(self.load_platforms()),
            apis=tuple(self.load_apis()),
        )

    def save_manifest(self, manifest: CorpusManifest) -> None:
        self.manifest_path.parent.mkdir(parents=True, exist_ok=True)
        self.manifest_path.write_text(
            json.dumps(manifest.to_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    def load_manifest(self) -> CorpusManifest:
        if not self.manifest_path.exists():
            return CorpusManifest()
        try:
            return CorpusManifest.from_dict(json.loads(self.manifest_path.read_text("utf-8")))
        except (ValueError, KeyError) as exc:
            raise SchemaMismatchError(self.manifest_path, 0, str(exc)) from exc
