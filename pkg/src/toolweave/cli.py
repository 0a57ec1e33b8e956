"""Pipeline orchestration and the command-line entry point.

Stages run individually (``--stage``) against a YAML config; each stage
persists its outputs through the store, updates the manifest, and records a
checksum so that rerunning a completed stage with unchanged inputs is a
no-op. Stage order:

    gen-tools -> gen-profiles -> gen-behaviors -> gen-queries -> verify
    -> split -> eval (reads predictions/<model>.jsonl) / serve-review
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .demo import demo_backend
from .gateway import Gateway, RemoteBackend
from .grammar import serialize_solution
from .model import Sample, Scenario, stable_id
from .profilegen import AssignmentPlan, assign_characteristics, build_feature_tree, generate_behaviors
from .querygen import QueryGenConfig, synthesize_sample
from .store import (
    CorpusManifest,
    Store,
    load_jsonl,
    record_to_prediction,
    save_jsonl,
    split_corpus,
)
from .toolgen import ToolGenConfig, build_tool_library
from .verify import filter_corpus, rejection_to_record
from .evalkit import compute_report, evaluate_sample, format_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_STAGE_ERROR = 1
EXIT_MISSING_DEPENDENCY = 2
EXIT_CONFIG_INVALID = 3


class ConfigError(Exception):
    pass


class MissingDependencyError(Exception):
    pass


@dataclass(frozen=True)
class ProfileGenSettings:
    cluster_threshold: int = 8
    k_per_layer: tuple[int, ...] = (2, 2)
    behaviors_per_scenario: int = 3


@dataclass(frozen=True)
class SplitSettings:
    untrained_user_count: int = 1
    trained_test_fraction: float = 0.2


@dataclass(frozen=True)
class GatewaySettings:
    backend: str = "scripted"  # "scripted" | "remote"
    model_id: str = "demo"
    endpoint: str = "https://api.openai.com"
    cache_dir: str | None = None
    max_workers: int = 4
    max_retries: int = 3


@dataclass(frozen=True)
class ReviewSettings:
    host: str = "127.0.0.1"
    port: int = 8023
    page_size: int = 20
    static_dir: str = "frontend/dist"


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    data_dir: str = "data"
    scenarios: tuple[Scenario, ...] = ()
    toolgen: ToolGenConfig = ToolGenConfig()
    profilegen: ProfileGenSettings = ProfileGenSettings()
    querygen: QueryGenConfig = QueryGenConfig()
    verify_repair_budget: int = 2
    split: SplitSettings = SplitSettings()
    gateway: GatewaySettings = GatewaySettings()
    review: ReviewSettings = ReviewSettings()


def _sub(d: dict, key: str) -> dict:
    value = d.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section {key!r} must be a mapping")
    return value


def config_from_dict(raw: dict) -> PipelineConfig:
    if "seed" not in raw:
        raise ConfigError("config must set a seed; runs must be reproducible")
    scenarios = []
    for entry in raw.get("scenarios", ()):
        if isinstance(entry, str):
            name, description = entry, ""
        else:
            name, description = entry["name"], entry.get("description", "")
        scenarios.append(
            Scenario(id=stable_id("scn", name), name=name, description=description)
        )
    tg = _sub(raw, "toolgen")
    pg = _sub(raw, "profilegen")
    qg = _sub(raw, "querygen")
    sp = _sub(raw, "split")
    gw = _sub(raw, "gateway")
    rv = _sub(raw, "review")
    seed = int(raw["seed"])
    try:
        return PipelineConfig(
            seed=seed,
            data_dir=str(raw.get("data_dir", "data")),
            scenarios=tuple(scenarios),
            toolgen=ToolGenConfig(
                platforms_per_scenario=int(tg.get("platforms_per_scenario", 3)),
                apis_per_platform=int(tg.get("apis_per_platform", 24)),
                max_depth=int(tg.get("max_depth", 4)),
                regen_budget=int(tg.get("regen_budget", 3)),
                repair_budget=int(tg.get("repair_budget", 2)),
                seed=seed,
            ),
            profilegen=ProfileGenSettings(
                cluster_threshold=int(pg.get("cluster_threshold", 8)),
                k_per_layer=tuple(int(k) for k in pg.get("k_per_layer", (2, 2))),
                behaviors_per_scenario=int(pg.get("behaviors_per_scenario", 3)),
            ),
            querygen=QueryGenConfig(
                queries_per_user_scenario=int(qg.get("queries_per_user_scenario", 5)),
                repair_budget=int(qg.get("repair_budget", 2)),
                withheld_keywords=tuple(
                    qg.get("withheld_keywords", QueryGenConfig().withheld_keywords)
                ),
                profile_dependent_floor=float(qg.get("profile_dependent_floor", 0.5)),
                seed=seed,
            ),
            verify_repair_budget=int(_sub(raw, "verify").get("repair_budget", 2)),
            split=SplitSettings(
                untrained_user_count=int(sp.get("untrained_user_count", 1)),
                trained_test_fraction=float(sp.get("trained_test_fraction", 0.2)),
            ),
            gateway=GatewaySettings(
                backend=str(gw.get("backend", "scripted")),
                model_id=str(gw.get("model_id", "demo")),
                endpoint=str(gw.get("endpoint", "https://api.openai.com")),
                cache_dir=gw.get("cache_dir"),
                max_workers=int(gw.get("max_workers", 4)),
                max_retries=int(gw.get("max_retries", 3)),
            ),
            review=ReviewSettings(
                host=str(rv.get("host", "127.0.0.1")),
                port=int(rv.get("port", 8023)),
                page_size=int(rv.get("page_size", 20)),
                static_dir=str(rv.get("static_dir", "frontend/dist")),
            ),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> PipelineConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(raw)


def build_gateway(config: PipelineConfig) -> Gateway:
    settings = config.gateway
    if settings.backend == "scripted":
        backend = demo_backend()
    elif settings.backend == "remote":
        backend = RemoteBackend(settings.endpoint, max_retries=settings.max_retries)
    else:
        raise ConfigError(f"unknown gateway backend {settings.backend!r}")
    return Gateway(
        backend,
        model_id=settings.model_id,
        cache_dir=settings.cache_dir,
        max_workers=settings.max_workers,
    )


# -- stage registry ------------------------------------------------------------

@dataclass(frozen=True)
class StageSpec:
    name: str
    deps: tuple[str, ...]
    config_keys: tuple[str, ...]
    outputs: tuple[str, ...]  # store path attribute names


STAGES: dict[str, StageSpec] = {
    spec.name: spec
    for spec in (
        StageSpec("gen-tools", (), ("scenarios", "toolgen"),
                  ("scenarios_path", "platforms_path", "tools_path", "apitree_path")),
        StageSpec("gen-profiles", ("gen-tools",), ("profilegen",),
                  ("profiles_path", "featuretree_path")),
        StageSpec("gen-behaviors", ("gen-tools", "gen-profiles"), ("profilegen",),
                  ("profiles_path",)),
        StageSpec("gen-queries", ("gen-tools", "gen-behaviors"), ("querygen",),
                  ("samples_path",)),
        StageSpec("verify", ("gen-queries",), ("verify",),
                  ("samples_path", "rejections_path")),
        StageSpec("split", ("verify",), ("split",),
                  ("train_path", "test_path")),
    )
}


def _config_fingerprint(config: PipelineConfig, keys: tuple[str, ...]) -> str:
    payload = {
        "seed": config.seed,
        "backend": config.gateway.backend,
        "model_id": config.gateway.model_id,
    }
    for key in keys:
        if key == "scenarios":
            payload[key] = [(s.name, s.description) for s in config.scenarios]
        elif key == "toolgen":
            payload[key] = repr(config.toolgen)
        elif key == "profilegen":
            payload[key] = repr(config.profilegen)
        elif key == "querygen":
            payload[key] = repr(config.querygen)
        elif key == "verify":
            payload[key] = config.verify_repair_budget
        elif key == "split":
            payload[key] = repr(config.split)
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]


def _output_fingerprint(store: Store, spec: StageSpec) -> str:
    digest = hashlib.sha256()
    for attr in spec.outputs:
        path: Path = getattr(store, attr)
        digest.update(attr.encode())
        digest.update(path.read_bytes() if path.exists() else b"<missing>")
    return digest.hexdigest()[:16]


def _input_fingerprint(store: Store, spec: StageSpec, config: PipelineConfig) -> str:
    manifest = store.load_manifest()
    parts = [_config_fingerprint(config, spec.config_keys)]
    for dep in spec.deps:
        recorded = manifest.stage_checksums.get(dep, "")
        if not recorded:
            raise MissingDependencyError(
                f"stage {spec.name!r} requires {dep!r} to have run first"
            )
        parts.append(recorded)
    return hashlib.sha256("|".join(parts).encode("utf-8")).hexdigest()[:16]


def _outputs_exist(store: Store, spec: StageSpec) -> bool:
    return all(getattr(store, attr).exists() for attr in spec.outputs)


def _record_stage(store: Store, spec: StageSpec, input_hash: str,
                  counts: dict[str, int] | None = None,
                  split_counts: dict[str, int] | None = None,
                  untrained_users: tuple[str, ...] | None = None,
                  seed: int | None = None) -> None:
    manifest = store.load_manifest()
    checksums = dict(manifest.stage_checksums)
    checksums[spec.name] = f"{input_hash}:{_output_fingerprint(store, spec)}"
    manifest = CorpusManifest(
        counts={**manifest.counts, **(counts or {})},
        split=dict(split_counts) if split_counts is not None else dict(manifest.split),
        seed=seed if seed is not None else manifest.seed,
        untrained_users=(untrained_users if untrained_users is not None
                         else manifest.untrained_users),
        stage_checksums=checksums,
    )
    store.save_manifest(manifest)


# -- stage implementations -------------------------------------------------------

def _stage_gen_tools(store: Store, config: PipelineConfig, gateway: Gateway) -> dict:
    if not config.scenarios:
        raise ConfigError("no scenarios configured")
    tree, registry = build_tool_library(list(config.scenarios), config.toolgen, gateway)
    store.save_scenarios(registry.scenarios)
    store.save_platforms(registry.platforms)
    store.save_apis(registry.apis)
    store.apitree_path.write_text(
        json.dumps(tree.to_dict(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return {"scenarios": len(registry.scenarios), "platforms": len(registry.platforms),
            "apis": len(registry.apis)}


def _stage_gen_profiles(store: Store, config: PipelineConfig, gateway: Gateway) -> dict:
    registry = store.load_registry()
    tree = build_feature_tree(
        list(registry.platforms), list(registry.apis),
        config.profilegen.cluster_threshold, gateway, seed=config.seed,
    )
    store.featuretree_path.write_text(
        json.dumps(tree.to_dict(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    k = list(config.profilegen.k_per_layer)
    needed = tree.depth + 1
    if len(k) < needed:
        logger.info("padding k_per_layer %s with ones to tree depth + 1 = %d", k, needed)
        k = k + [1] * (needed - len(k))
    elif len(k) > needed:
        raise ConfigError(
            f"k_per_layer has {len(k)} layers but the feature tree depth + 1 is {needed}"
        )
    profiles = assign_characteristics(tree, AssignmentPlan(tuple(k)), gateway,
                                      seed=config.seed)
    store.save_profiles(profiles)
    return {"users": len(profiles)}


def _stage_gen_behaviors(store: Store, config: PipelineConfig, gateway: Gateway) -> dict:
    registry = store.load_registry()
    profiles = store.load_profiles()
    out = [
        generate_behaviors(
            profile, list(registry.platforms),
            config.profilegen.behaviors_per_scenario, gateway,
            list(registry.scenarios), seed=config.seed,
        )
        for profile in profiles
    ]
    store.save_profiles(out)
    return {"users": len(out)}


def _stage_gen_queries(store: Store, config: PipelineConfig, gateway: Gateway) -> dict:
    registry = store.load_registry()
    profiles = store.load_profiles()
    samples: list[Sample] = []
    for profile in profiles:
        for scenario in registry.scenarios:
            platforms = [p for p in registry.platforms if p.scenario_id == scenario.id]
            apis = [a for a in registry.apis
                    if a.platform_id in {p.id for p in platforms}]
            avoid: list[str] = []
            for _ in range(config.querygen.queries_per_user_scenario):
                sample = synthesize_sample(
                    profile, scenario, platforms, apis, gateway,
                    config.querygen, avoid=tuple(avoid),
                )
                avoid.append(sample.query)
                samples.append(sample)
    store.save_samples(samples)
    dependent = sum(1 for s in samples if s.profile_dependent)
    fraction = dependent / len(samples) if samples else 0.0
    if fraction < config.querygen.profile_dependent_floor:
        logger.warning(
            "profile-dependent fraction %.2f below floor %.2f",
            fraction, config.querygen.profile_dependent_floor,
        )
    return {"queries": len(samples)}


def _stage_verify(store: Store, config: PipelineConfig, gateway: Gateway) -> dict:
    registry = store.load_registry()
    samples = store.load_samples()
    profiles = {p.user_id: p for p in store.load_profiles()}
    accepted, rejected = filter_corpus(
        samples, registry, gateway, profiles,
        repair_budget=config.verify_repair_budget, seed=config.seed,
    )
    by_id = {s.id: s for s in accepted}
    by_id.update({r.sample.id: r.sample for r in rejected})
    store.save_samples([by_id[s.id] for s in samples])
    save_jsonl(store.rejections_path, (rejection_to_record(r) for r in rejected))
    return {"verified": len(accepted), "rejected": len(rejected)}


def _stage_split(store: Store, config: PipelineConfig, gateway: Gateway) -> dict:
    samples = store.load_samples()
    verified = [s for s in samples if s.status == "model_verified"]
    profiles = store.load_profiles()
    split = split_corpus(
        verified, profiles,
        config.split.untrained_user_count, config.split.trained_test_fraction,
        config.seed,
    )
    store.save_samples(split.train, store.train_path)
    store.save_samples(split.test, store.test_path)
    tagged = {s.id: s for s in split.train + split.test}
    store.save_samples([tagged.get(s.id, s) for s in samples])
    split_counts = {
        "train": len(split.train),
        "test_trained": len(split.test_trained),
        "test_untrained": len(split.test_untrained),
    }
    manifest = store.load_manifest()
    store.save_manifest(replace(
        manifest, split=split_counts, untrained_users=tuple(sorted(split.untrained_users)),
    ))
    return {}


def run_generation_stage(stage: str, config: PipelineConfig) -> int:
    """Run one checksum-guarded pipeline stage; 0 on success or no-op."""
    spec = STAGES[stage]
    store = Store(config.data_dir)
    store.root.mkdir(parents=True, exist_ok=True)
    try:
        input_hash = _input_fingerprint(store, spec, config)
    except MissingDependencyError as exc:
        logger.error("%s", exc)
        return EXIT_MISSING_DEPENDENCY

    manifest = store.load_manifest()
    recorded = manifest.stage_checksums.get(stage, "")
    if recorded.startswith(input_hash + ":") and _outputs_exist(store, spec):
        print(f"{stage}: up to date, skipping")
        return EXIT_OK

    gateway = build_gateway(config)
    runner = {
        "gen-tools": _stage_gen_tools,
        "gen-profiles": _stage_gen_profiles,
        "gen-behaviors": _stage_gen_behaviors,
        "gen-queries": _stage_gen_queries,
        "verify": _stage_verify,
        "split": _stage_split,
    }[stage]
    counts = runner(store, config, gateway)
    if stage == "split":
        _record_stage(store, spec, input_hash, seed=config.seed)
    else:
        _record_stage(store, spec, input_hash, counts=counts, seed=config.seed)
    summary = ", ".join(f"{k}={v}" for k, v in counts.items()) or "done"
    print(f"{stage}: {summary}")
    return EXIT_OK


def run_eval(config: PipelineConfig, model: str, predictions_path: Path | None) -> int:
    store = Store(config.data_dir)
    if not store.test_path.exists():
        logger.error("eval requires the split stage output (%s)", store.test_path)
        return EXIT_MISSING_DEPENDENCY
    path = predictions_path or store.predictions_path(model)
    if not path.exists():
        logger.error("predictions file not found: %s", path)
        return EXIT_MISSING_DEPENDENCY

    predictions = dict(load_jsonl(path, record_to_prediction))
    test_samples = store.load_samples(store.test_path)
    missing = [s.id for s in test_samples if s.id not in predictions]
    if missing:
        logger.error("predictions missing for %d samples (e.g. %s)",
                     len(missing), missing[:3])
        return EXIT_STAGE_ERROR

    manifest = store.load_manifest()
    untrained = set(manifest.untrained_users)
    user_split = {
        s.user_id: ("untrained" if s.user_id in untrained else "trained")
        for s in test_samples
    }
    evals = [evaluate_sample(predictions[s.id], s) for s in test_samples]
    report = compute_report(evals, user_split)
    store.report_path(model).parent.mkdir(parents=True, exist_ok=True)
    store.report_path(model).write_text(
        json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    print(format_table(report))
    print(f"eval: report written to {store.report_path(model)}")
    return EXIT_OK


def run_serve_review(config: PipelineConfig) -> int:
    import uvicorn

    from .review import create_app

    app = create_app(
        config.data_dir,
        page_size=config.review.page_size,
        static_dir=config.review.static_dir,
    )
    uvicorn.run(app, host=config.review.host, port=config.review.port, log_level="info")
    return EXIT_OK


def run_stage(stage: str, config: PipelineConfig, model: str | None = None,
              predictions: Path | None = None) -> int:
    if stage in STAGES:
        return run_generation_stage(stage, config)
    if stage == "eval":
        return run_eval(config, model or config.gateway.model_id, predictions)
    if stage == "serve-review":
        return run_serve_review(config)
    logger.error("unknown stage %r (known: %s, eval, serve-review)",
                 stage, ", ".join(STAGES))
    return EXIT_CONFIG_INVALID


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="toolweave",
        description="Synthesize and evaluate personalized tool-invocation data.",
    )
    parser.add_argument("--config", required=True, help="YAML pipeline config")
    parser.add_argument("--stage", required=True,
                        help="gen-tools | gen-profiles | gen-behaviors | gen-queries | "
                             "verify | split | eval | serve-review")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--backend", choices=["remote", "scripted"],
                        help="override the gateway backend")
    parser.add_argument("--model", help="model id (and predictions/report name for eval)")
    parser.add_argument("--predictions", type=Path,
                        help="explicit predictions file for eval")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if args.seed is not None:
            raw = yaml.safe_load(Path(args.config).read_text(encoding="utf-8"))
            raw["seed"] = args.seed
            config = config_from_dict(raw)
        if args.backend:
            config = replace(config, gateway=replace(config.gateway, backend=args.backend))
        if args.model:
            config = replace(config, gateway=replace(config.gateway, model_id=args.model))
    except ConfigError as exc:
        logger.error("invalid config: %s", exc)
        return EXIT_CONFIG_INVALID

    try:
        return run_stage(args.stage, config, model=args.model,
                         predictions=args.predictions)
    except ConfigError as exc:
        logger.error("invalid config: %s", exc)
        return EXIT_CONFIG_INVALID
    except MissingDependencyError as exc:
        logger.error("%s", exc)
        return EXIT_MISSING_DEPENDENCY
    except Exception as exc:  # stage-specific failures surface with context
        logger.exception("stage %s failed: %s", args.stage, exc)
        return EXIT_STAGE_ERROR


def write_gold_predictions(store: Store, model: str = "gold") -> Path:
    """Serialize every test-split gold as that sample's prediction."""
    samples = store.load_samples(store.test_path)
    store.save_predictions(model, ((s.id, serialize_solution(s.gold)) for s in samples))
    return store.predictions_path(model)


if __name__ == "__main__":
    sys.exit(main())
