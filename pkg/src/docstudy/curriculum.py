"""Training recipes as data: ordered stage plans over dataset manifests.

The ten method presets live in a versioned fixture file; planning
validates that every referenced manifest is supplied, and rendering
materializes one trainer-consumable record list per stage. This package
never trains anything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .dataset import KIND_DOC, DatasetManifest
from .errors import DataError, UsageError
from .rng import Stream, mix_key

MIX_CONCAT = "concat"
MIX_INTERLEAVE = "interleave"
MIX_PREFIX_PAIR = "prefix_pair"

TEST_DOC_REF = "test_doc"


@lru_cache(maxsize=1)
def load_presets() -> dict:
    text = resources.files("docstudy").joinpath("data", "method_presets.json").read_text("utf-8")
    return json.loads(text)


def preset_ids() -> tuple[str, ...]:
    return tuple(load_presets().keys())


@dataclass(frozen=True)
class Replay:
    source: str
    size: int
    seed: int


@dataclass(frozen=True)
class Stage:
    index: int
    epochs: int
    mix: str
    refs: tuple[str, ...]
    replay: Replay | None = None


@dataclass(frozen=True)
class StagePlan:
    method: str
    stages: tuple[Stage, ...]

    def to_dict(self) -> dict:
        stages = []
        for stage in self.stages:
            entry = {
                "index": stage.index,
                "epochs": stage.epochs,
                "mix": stage.mix,
                "refs": list(stage.refs),
            }
            if stage.replay is not None:
                entry["replay"] = {
                    "source": stage.replay.source,
                    "size": stage.replay.size,
                    "seed": stage.replay.seed,
                }
            stages.append(entry)
        return {"method": self.method, "stages": stages}

    @classmethod
    def from_dict(cls, data: dict) -> "StagePlan":
        stages = []
        for entry in data["stages"]:
            replay = entry.get("replay")
            stages.append(
                Stage(
                    index=entry["index"],
                    epochs=entry["epochs"],
                    mix=entry["mix"],
                    refs=tuple(entry["refs"]),
                    replay=Replay(**replay) if replay else None,
                )
            )
        return cls(method=data["method"], stages=tuple(stages))


def required_refs(preset: str, cross_domain: bool = False) -> set[str]:
    spec = _preset_spec(preset, cross_domain)
    names: set[str] = set()
    for stage in spec:
        names.update(stage["refs"])
        if "replay" in stage:
            names.add(stage["replay"]["source"])
    return names


def _preset_spec(preset: str, cross_domain: bool) -> list[dict]:
    presets = load_presets()
    if preset not in presets:
        raise UsageError(
            f"unknown preset {preset!r}; valid presets: {', '.join(sorted(presets))}"
        )
    entry = presets[preset]
    if cross_domain and "cross_domain_stages" in entry:
        return entry["cross_domain_stages"]
    return entry["stages"]


def plan(preset: str, refs: dict, seed: int = 0, cross_domain: bool = False) -> StagePlan:
    """Instantiate a preset against the supplied manifest references."""
    spec = _preset_spec(preset, cross_domain)
    missing = sorted(required_refs(preset, cross_domain) - set(refs))
    if missing:
        raise DataError(f"preset {preset!r} is missing manifest refs: {', '.join(missing)}")
    stages = []
    for i, entry in enumerate(spec, start=1):
        replay = None
        if "replay" in entry:
            replay = Replay(
                source=entry["replay"]["source"],
                size=entry["replay"]["size"],
                seed=seed,
            )
        stages.append(
            Stage(
                index=i,
                epochs=entry["epochs"],
                mix=entry["mix"],
                refs=tuple(entry["refs"]),
                replay=replay,
            )
        )
    return StagePlan(method=preset, stages=tuple(stages))


def fairness_epochs(stage_plan: StagePlan, test_ref: str = TEST_DOC_REF) -> int:
    """Total epochs over stages whose refs include the test-document set."""
    return sum(s.epochs for s in stage_plan.stages if test_ref in s.refs)


def sample_replay(manifest: DatasetManifest, size: int, seed: int) -> list[dict]:
    """Seeded sample without replacement, stable in original order."""
    n = len(manifest.records)
    if size > n:
        raise DataError(f"replay size {size} exceeds manifest of {n} records")
    indices = Stream(mix_key(seed, "replay")).sample_indices(n, size)
    return [manifest.records[i] for i in indices]


def _interleave(groups: list[list[dict]]) -> list[dict]:
    """Proportional merge: record r of a group of n sorts at (r + 0.5) / n."""
    keyed = []
    for g_index, group in enumerate(groups):
        n = len(group)
        if n == 0:
            continue
        for r_index, record in enumerate(group):
            keyed.append(((r_index + 0.5) / n, g_index, r_index, record))
    keyed.sort(key=lambda item: item[:3])
    return [item[3] for item in keyed]


def _prefix_pair(groups: list[list[dict]]) -> list[dict]:
    """Each document preceded by its own QA/task records, documents in order."""
    docs: list[dict] = []
    others: list[dict] = []
    for group in groups:
        for record in group:
            (docs if record.get("kind") == KIND_DOC else others).append(record)
    doc_ids = [rec["payload"]["id"] for rec in docs]
    known = set(doc_ids)
    by_doc: dict[str, list[dict]] = {doc_id: [] for doc_id in doc_ids}
    for record in others:
        doc_id = record.get("payload", {}).get("doc_id")
        if doc_id not in known:
            raise DataError(f"record references unknown document id {doc_id!r} in pairing mode")
        by_doc[doc_id].append(record)
    paired: list[dict] = []
    for doc_id, doc in zip(doc_ids, docs):
        paired.extend(by_doc[doc_id])
        paired.append(doc)
    return paired


def render_stage_inputs(
    stage_plan: StagePlan, stage_index: int, manifests: dict[str, DatasetManifest]
) -> list[dict]:
    """Materialize one stage as a flat record list per its mixing mode."""
    matches = [s for s in stage_plan.stages if s.index == stage_index]
    if not matches:
        raise DataError(f"plan for {stage_plan.method} has no stage {stage_index}")
    stage = matches[0]
    missing = [name for name in stage.refs if name not in manifests]
    if stage.replay and stage.replay.source not in manifests:
        missing.append(stage.replay.source)
    if missing:
        raise DataError(f"missing manifests for stage {stage_index}: {', '.join(missing)}")

    groups = [list(manifests[name].records) for name in stage.refs]
    if stage.mix == MIX_CONCAT:
        records = [record for group in groups for record in group]
    elif stage.mix == MIX_INTERLEAVE:
        records = _interleave(groups)
    elif stage.mix == MIX_PREFIX_PAIR:
        records = _prefix_pair(groups)
    else:
        raise DataError(f"unknown mixing mode {stage.mix!r}")

    if stage.replay is not None:
        sampled = sample_replay(
            manifests[stage.replay.source], stage.replay.size, stage.replay.seed
        )
        records = _interleave([records, sampled])
    return records


def write_plan(stage_plan: StagePlan, path) -> None:
    Path(path).write_text(
        json.dumps(stage_plan.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8"
    )


def plan_schema() -> dict:
    text = resources.files("docstudy").joinpath("data", "stageplan.schema.json").read_text("utf-8")
    return json.loads(text)
