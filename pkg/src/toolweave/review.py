"""HTTP service for human review of model-verified samples.

Annotators page through pending samples, accept/reject them, or submit
edits (gold calls and/or provenance tags). Edits must pass rule validation
and provenance completeness before they persist. Every decision lands in an
append-only audit log; replaying the log over the pre-review corpus
reproduces the final statuses. Accepted samples export as the benchmark.

Endpoints (bodies use the dataset-store sample schema):

    GET  /api/samples?status=pending&scenario=&page=&page_size=
    GET  /api/samples/{id}
    POST /api/samples/{id}/decision
    GET  /api/progress
    POST /api/export
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .model import Provenance, Sample, ToolRegistry, UserProfile
from .store import (
    CorpusManifest,
    Store,
    profile_to_record,
    record_to_solution,
    sample_to_record,
    save_jsonl,
)
from .verify import Violation, rule_validate

logger = logging.getLogger(__name__)

PENDING_STATUS = "model_verified"
ACTIONS = ("accept", "reject", "edit")


class DecisionBody(BaseModel):
    action: str
    annotator_id: str
    timestamp: str
    edited_gold: dict | None = None
    edited_provenance: list[dict] | None = None


class ExportBody(BaseModel):
    destination: str


@dataclass(frozen=True)
class ReviewDecision:
    sample_id: str
    action: str
    annotator_id: str
    timestamp: str
    edited_gold: dict | None = None
    edited_provenance: list[dict] | None = None

    def key(self) -> tuple[str, str, str]:
        return (self.sample_id, self.annotator_id, self.timestamp)

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "action": self.action,
            "annotator_id": self.annotator_id,
            "timestamp": self.timestamp,
            "edited_gold": self.edited_gold,
            "edited_provenance": self.edited_provenance,
        }


def _provenance_from_records(records: list[dict]) -> Provenance:
    return Provenance({(r["call"], r["param"]): r["source"] for r in records})


class ProvenanceIncompleteError(Exception):
    """Edited provenance keys do not equal the gold (call, param) set."""


def apply_decision(sample: Sample, decision: ReviewDecision,
                   registry: ToolRegistry) -> tuple[Sample, list[Violation]]:
    """Pure decision semantics: returns the updated sample or violations.

    ``edit`` persists the supplied gold/provenance and accepts the sample;
    the edited artifacts must rule-validate and keep provenance complete.
    """
    if decision.action == "reject":
        return sample.with_status("rejected"), []
    if decision.action == "accept":
        return sample.with_status("accepted"), []

    gold = sample.gold
    provenance = sample.provenance
    if decision.edited_gold is not None:
        gold = record_to_solution(decision.edited_gold)
    if decision.edited_provenance is not None:
        provenance = _provenance_from_records(decision.edited_provenance)
    violations = rule_validate(gold, registry)
    if violations:
        return sample, violations
    if not provenance.covers(gold):
        raise ProvenanceIncompleteError(
            "provenance keys must equal the gold (call, param) set exactly"
        )
    updated = replace(sample, gold=gold, provenance=provenance, status="accepted")
    return updated, []


class ReviewState:
    """Corpus + audit log behind the endpoints; decision writes serialize."""

    def __init__(self, root: str | Path):
        self.store = Store(root)
        self.lock = threading.Lock()
        self.samples: dict[str, Sample] = {
            s.id: s for s in self.store.load_samples()
        }
        self.order = [s_id for s_id in self.samples]
        self.profiles: dict[str, UserProfile] = {
            p.user_id: p for p in self.store.load_profiles()
        }
        self.registry = self.store.load_registry()
        self.decided: dict[tuple[str, str, str], str] = {}
        self.decided_samples: set[str] = set()
        if self.audit_path.exists():
            for line in self.audit_path.read_text("utf-8").splitlines():
                record = json.loads(line)
                self.decided[(record["sample_id"], record["annotator_id"],
                              record["timestamp"])] = record["action"]
                self.decided_samples.add(record["sample_id"])

    @property
    def audit_path(self) -> Path:
        return self.store.root / "reviews" / "audit.jsonl"

    def sample_view(self, sample: Sample) -> dict:
        record = sample_to_record(sample)
        profile = self.profiles.get(sample.user_id)
        record["profile"] = profile_to_record(profile) if profile else None
        return record

    def list_samples(self, status: str, scenario: str | None,
                     page: int, page_size: int) -> dict:
        if status == "pending":
            keep = lambda s: s.status == PENDING_STATUS and s.id not in self.decided_samples
        elif status == "all":
            keep = lambda s: True
        else:
            keep = lambda s: s.status == status
        items = [self.samples[s_id] for s_id in self.order if keep(self.samples[s_id])]
        if scenario:
            items = [s for s in items if s.scenario == scenario]
        items.sort(key=lambda s: (s.scenario, s.id))  # stable review order
        total = len(items)
        pages = max((total + page_size - 1) // page_size, 1)
        start = (page - 1) * page_size
        return {
            "items": [self.sample_view(s) for s in items[start:start + page_size]],
            "page": page,
            "page_size": page_size,
            "total": total,
            "pages": pages,
        }

    def submit(self, sample_id: str, decision: ReviewDecision) -> dict:
        with self.lock:
            sample = self.samples.get(sample_id)
            if sample is None:
                raise HTTPException(404, f"unknown sample {sample_id}")
            if decision.key() in self.decided:
                return self.sample_view(sample)  # idempotent replay
            if sample_id in self.decided_samples:
                raise HTTPException(409, f"sample {sample_id} already decided")
            if sample.status != PENDING_STATUS:
                raise HTTPException(409, f"sample {sample_id} is not awaiting review")
            if decision.action not in ACTIONS:
                raise HTTPException(422, f"unknown action {decision.action!r}")
            if decision.action == "edit" and decision.edited_gold is None and (
                decision.edited_provenance is None
            ):
                raise HTTPException(422, "edit requires edited_gold and/or edited_provenance")

            try:
                updated, violations = apply_decision(sample, decision, self.registry)
            except ProvenanceIncompleteError as exc:
                raise HTTPException(
                    422, detail={"error": "invalid-edit", "provenance": str(exc)}
                ) from exc
            except (KeyError, ValueError) as exc:
                raise HTTPException(422, f"invalid edit payload: {exc}") from exc
            if violations:
                raise HTTPException(
                    422,
                    detail={
                        "error": "invalid-edit",
                        "violations": [
                            {"kind": v.kind.value, "call": v.call_index,
                             "param": v.param, "detail": v.detail}
                            for v in violations
                        ],
                    },
                )

            self.samples[sample_id] = updated
            self.decided[decision.key()] = decision.action
            self.decided_samples.add(sample_id)
            self._append_audit(decision)
            self._persist_samples()
            return self.sample_view(updated)

    def _append_audit(self, decision: ReviewDecision) -> None:
        self.audit_path.parent.mkdir(parents=True, exist_ok=True)
        with self.audit_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(decision.to_record(), ensure_ascii=False) + "\n")

    def _persist_samples(self) -> None:
        self.store.save_samples([self.samples[s_id] for s_id in self.order])

    def progress(self) -> dict:
        counts = {"pending": 0, "accepted": 0, "rejected": 0, "total": len(self.samples)}
        for sample in self.samples.values():
            if sample.status == PENDING_STATUS and sample.id not in self.decided_samples:
                counts["pending"] += 1
            elif sample.status == "accepted":
                counts["accepted"] += 1
            elif sample.status == "rejected":
                counts["rejected"] += 1
        return counts

    def export(self, destination: str | Path) -> dict:
        accepted = [self.samples[s_id] for s_id in self.order
                    if self.samples[s_id].status == "accepted"]
        destination = Path(destination)
        destination.mkdir(parents=True, exist_ok=True)
        save_jsonl(destination / "benchmark.jsonl",
                   (sample_to_record(s) for s in accepted))
        counts = {"accepted": len(accepted)}
        by_split: dict[str, int] = {}
        for s in accepted:
            key = s.split or "unsplit"
            by_split[key] = by_split.get(key, 0) + 1
        manifest = {"counts": counts, "by_split": by_split}
        (destination / "manifest.json").write_text(
            json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        return manifest


def export_benchmark(state: ReviewState, destination: str | Path) -> dict:
    return state.export(destination)


def replay_audit(samples: list[Sample], audit_path: str | Path) -> dict[str, str]:
    """Final status per sample implied by replaying the audit log."""
    statuses = {s.id: s.status for s in samples}
    path = Path(audit_path)
    if not path.exists():
        return statuses
    seen: set[tuple[str, str, str]] = set()
    for line in path.read_text("utf-8").splitlines():
        record = json.loads(line)
        key = (record["sample_id"], record["annotator_id"], record["timestamp"])
        if key in seen:
            continue
        seen.add(key)
        statuses[record["sample_id"]] = (
            "rejected" if record["action"] == "reject" else "accepted"
        )
    return statuses


def create_app(root: str | Path, page_size: int = 20,
               static_dir: str | Path | None = None) -> FastAPI:
    state = ReviewState(root)
    default_page_size = page_size
    app = FastAPI(title="toolweave review service")
    app.state.review = state

    @app.get("/api/samples")
    def list_samples(status: str = "pending", scenario: str = "",
                     page: int = 1, page_size: int = default_page_size):
        return state.list_samples(status, scenario or None, max(page, 1), page_size)

    @app.get("/api/samples/{sample_id}")
    def get_sample(sample_id: str):
        sample = state.samples.get(sample_id)
        if sample is None:
            raise HTTPException(404, f"unknown sample {sample_id}")
        return state.sample_view(sample)

    @app.post("/api/samples/{sample_id}/decision")
    def post_decision(sample_id: str, body: DecisionBody):
        decision = ReviewDecision(
            sample_id=sample_id,
            action=body.action,
            annotator_id=body.annotator_id,
            timestamp=body.timestamp,
            edited_gold=body.edited_gold,
            edited_provenance=body.edited_provenance,
        )
        return state.submit(sample_id, decision)

    @app.get("/api/progress")
    def progress():
        return state.progress()

    @app.post("/api/export")
    def export(body: ExportBody):
        return state.export(body.destination)

    if static_dir and Path(static_dir).exists():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
