"""Operator command surface: ingest, gen-tasks, gen-qa, split, plan, eval,
stats, verify.

Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error. Every
command overwrites byte-identical outputs when re-run on identical inputs;
all randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import analysis, curriculum, dataset, metrics, qagen, stats, taskgen
from .corpus import Corpus, ingest_jsonl, serialize_corpus
from .errors import DataError, UsageError

logger = logging.getLogger(__name__)

SEED_ENV = "DOCSTUDY_SEED"
JOBS_ENV = "DOCSTUDY_JOBS"
OUT_ENV = "DOCSTUDY_OUT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        config = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path}: {exc.msg}") from exc
    if not isinstance(config, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return config


def _resolve(flag_value, config: dict, key: str, env: str | None, default, cast):
    """Precedence: command-line flag > config file > environment > default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return cast(config[key])
    if env and os.environ.get(env):
        return cast(os.environ[env])
    return default


def _ensure_out(out: str) -> Path:
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return path


def _analyzer_overrides(args) -> dict:
    overrides = {}
    if getattr(args, "lexicon", None):
        overrides["lexicon"] = analysis.load_lexicon(args.lexicon)
    if getattr(args, "abbreviations", None):
        overrides["abbreviations"] = analysis.load_abbreviations(args.abbreviations)
    return overrides


def _build_suites(corpus: Corpus, config: taskgen.TaskConfig, seed: int, jobs: int, overrides: dict):
    def one(doc):
        adoc = analysis.analyze_document(doc, **overrides)
        return taskgen.build_suite(adoc, config, seed=seed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, corpus.documents))
    return [one(doc) for doc in corpus.documents]


def cmd_ingest(args, config) -> int:
    seed = _resolve(args.seed, config, "seed", SEED_ENV, 0, int)
    out = _ensure_out(_resolve(args.out, config, "out", OUT_ENV, ".", str))
    corpus = ingest_jsonl(args.corpus, name=args.name, seed=seed)
    target = out / f"{corpus.name}.jsonl"
    _atomic_write(target, serialize_corpus(corpus))
    print(f"ingested {len(corpus)} documents -> {target}")
    return 0


def cmd_gen_tasks(args, config) -> int:
    seed = _resolve(args.seed, config, "seed", SEED_ENV, 0, int)
    jobs = _resolve(args.jobs, config, "jobs", JOBS_ENV, 1, int)
    out = _ensure_out(_resolve(args.out, config, "out", OUT_ENV, ".", str))
    task_config = (
        taskgen.TaskConfig.from_file(args.task_config) if args.task_config else taskgen.TaskConfig()
    )
    corpus = ingest_jsonl(args.corpus, name=args.name, seed=seed)
    suites = _build_suites(corpus, task_config, seed, jobs, _analyzer_overrides(args))

    records = [dataset.task_record(ex) for suite in suites for ex in suite.examples]
    name = args.name or corpus.name
    manifest_path = out / f"{name}_tasks.jsonl"
    manifest = dataset.build_manifest(records, name=name, split="train", seed=seed)
    _atomic_write(manifest_path, dataset.manifest_bytes(manifest))
    _write_json(out / f"{name}_tasks_stats.json", stats.suite_stats(suites))

    if args.reading:
        reading_records = []
        for doc, suite in zip(corpus.documents, suites):
            text = taskgen.format_reading_comprehension(suite, task_config)
            reading_records.append(
                {
                    "kind": dataset.KIND_DOC,
                    "payload": {"id": doc.id, "title": doc.title, "body": text},
                }
            )
        reading = dataset.build_manifest(reading_records, name=f"{name}_reading", split="train", seed=seed)
        _atomic_write(out / f"{name}_reading.jsonl", dataset.manifest_bytes(reading))

    print(f"generated {len(records)} task records over {len(corpus)} documents -> {manifest_path}")
    return 0


def cmd_gen_qa(args, config) -> int:
    jobs = _resolve(args.jobs, config, "jobs", JOBS_ENV, 1, int)
    out = _ensure_out(_resolve(args.out, config, "out", OUT_ENV, ".", str))
    corpus = ingest_jsonl(args.corpus, name=args.name, seed=0)
    cache_dir = Path(args.cache_dir) if args.cache_dir else out / "qa_cache"
    cache_dir.mkdir(parents=True, exist_ok=True)

    uncached = [
        doc
        for doc in corpus.documents
        if not qagen.cache_path(cache_dir, doc.id, args.task).exists()
    ]
    client = None
    if uncached:
        client = qagen.ChatClient(
            endpoint=args.endpoint,
            api_key=args.api_key,
            model=args.model,
            temperature=args.temperature,
            max_tokens=args.max_tokens,
            max_concurrency=jobs,
        )

    def one(doc):
        return qagen.generate_for_document(doc, args.task, client, cache_dir)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parsed = list(pool.map(one, corpus.documents))
    else:
        parsed = [one(doc) for doc in corpus.documents]

    pairs = [pair for result in parsed for pair in result.pairs]
    discarded = sum(result.discarded for result in parsed)
    name = args.name or corpus.name
    target = out / f"{name}_qa_{args.task}.jsonl"
    qagen.write_qa_jsonl(pairs, target)
    print(f"collected {len(pairs)} QA pairs ({discarded} blocks discarded) -> {target}")
    return 0


def cmd_split(args, config) -> int:
    seed = _resolve(args.seed, config, "seed", SEED_ENV, 0, int)
    out = _ensure_out(_resolve(args.out, config, "out", OUT_ENV, ".", str))
    corpus = ingest_jsonl(args.corpus, name=args.name, seed=seed)
    spec = dataset.SplitSpec(test_fraction=args.fraction, seed=seed, ngram_size=args.ngram)
    train, test = dataset.split_corpus(corpus, spec)
    name = args.name or corpus.name
    _atomic_write(out / f"{name}_train.jsonl", serialize_corpus(train))
    _atomic_write(out / f"{name}_test.jsonl", serialize_corpus(test))
    _write_json(out / f"{name}_overlap.json", dataset.overlap_report(train, test, spec.ngram_size))

    if args.qa:
        pairs = qagen.read_qa_jsonl(args.qa)
        train_ids, test_ids = train.ids(), test.ids()
        qa_train, qa_test = [], []
        for pair in pairs:
            if pair.doc_id in train_ids:
                qa_train.append(pair)
            elif pair.doc_id in test_ids:
                qa_test.append(pair)
            else:
                raise DataError(f"QA pair references unknown document id {pair.doc_id!r}")
        qagen.write_qa_jsonl(qa_train, out / f"{name}_qa_train.jsonl")
        qagen.write_qa_jsonl(qa_test, out / f"{name}_qa_test.jsonl")

    print(f"split {len(corpus)} documents into {len(train)} train / {len(test)} test")
    return 0


def _parse_refs(args) -> dict:
    refs = {}
    if args.refs_file:
        refs.update(json.loads(Path(args.refs_file).read_text("utf-8")))
    for item in args.ref or []:
        if "=" not in item:
            raise UsageError(f"--ref expects name=path, got {item!r}")
        name, _, path = item.partition("=")
        refs[name] = path
    return refs


def cmd_plan(args, config) -> int:
    seed = _resolve(args.seed, config, "seed", SEED_ENV, 0, int)
    out = _ensure_out(_resolve(args.out, config, "out", OUT_ENV, ".", str))
    refs = _parse_refs(args)
    needed = curriculum.required_refs(args.preset, args.cross_domain)
    missing_files = [name for name in sorted(needed) if name in refs and not Path(refs[name]).exists()]
    if missing_files:
        raise DataError(f"referenced manifest files do not exist: {', '.join(missing_files)}")
    stage_plan = curriculum.plan(args.preset, refs, seed=seed, cross_domain=args.cross_domain)
    target = out / f"{args.preset}_plan.json"
    _write_json(target, stage_plan.to_dict())

    if args.render:
        manifests = {
            name: dataset.read_manifest(refs[name], name=name) for name in sorted(needed)
        }
        for stage in stage_plan.stages:
            records = curriculum.render_stage_inputs(stage_plan, stage.index, manifests)
            rendered = dataset.build_manifest(
                records, name=f"{args.preset}_stage{stage.index}", split="train", seed=seed
            )
            _atomic_write(
                out / f"{args.preset}_stage{stage.index}.jsonl",
                dataset.manifest_bytes(rendered),
            )
    print(f"planned {args.preset}: {len(stage_plan.stages)} stages -> {target}")
    return 0


def _read_jsonl(path) -> list[dict]:
    rows = []
    for line_no, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc
    return rows


def cmd_eval(args, config) -> int:
    out = _ensure_out(_resolve(args.out, config, "out", OUT_ENV, ".", str))
    if not args.predictions and not args.logprobs:
        raise UsageError("eval needs --predictions/--references and/or --logprobs")

    ppl = None
    if args.logprobs:
        records = [
            metrics.LogProbRecord(doc_id=row["doc_id"], logprobs=row["logprobs"])
            for row in _read_jsonl(args.logprobs)
        ]
        ppl = metrics.aggregate_ppl(records)

    judgments = None
    diagnostics: dict = {}
    if args.predictions:
        if not args.references:
            raise UsageError("--predictions requires --references")
        predictions = {row["item_id"]: row["prediction"] for row in _read_jsonl(args.predictions)}
        references = {row["item_id"]: row for row in _read_jsonl(args.references)}
        judgments, diagnostics = metrics.score_items(predictions, references)

    if judgments is not None:
        report = metrics.build_report(judgments, ppl=ppl, diagnostics=diagnostics)
        payload = report.to_dict()
    elif ppl is not None:
        payload = {"metrics": {}, "count": 0, "items": [], "diagnostics": {}, "ppl": round(ppl, 6)}
    target = out / f"{args.name}_report.json"
    _write_json(target, payload)
    print(f"evaluation report -> {target}")
    return 0


def cmd_stats(args, config) -> int:
    out = _ensure_out(_resolve(args.out, config, "out", OUT_ENV, ".", str))
    corpus = ingest_jsonl(args.corpus, name=args.name)
    qa_pairs = qagen.read_qa_jsonl(args.qa) if args.qa else None
    name = args.name or corpus.name
    target = out / f"{name}_stats.json"
    _write_json(target, stats.corpus_stats(corpus, qa_pairs))
    print(f"statistics -> {target}")
    return 0


def cmd_verify(args, config) -> int:
    failures = 0
    for path in args.paths:
        result = dataset.verify_manifest(path)
        if result.ok:
            print(f"{path}: ok")
        else:
            failures += 1
            where = "" if result.first_divergence is None else f" (record {result.first_divergence})"
            print(f"{path}: MISMATCH {result.reason}{where}")
    if failures:
        raise DataError(f"{failures} manifest(s) failed verification")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="docstudy", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="master random seed")
    parser.add_argument("--jobs", type=int, default=None, help="parallel workers")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a raw JSONL corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--name", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gen-tasks", help="generate study-task manifests")
    p.add_argument("--corpus", required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--task-config", default=None)
    p.add_argument("--reading", action="store_true", help="also emit reading-format documents")
    p.add_argument("--lexicon", default=None, help="override preposition lexicon file")
    p.add_argument("--abbreviations", default=None, help="override abbreviation list file")
    p.set_defaults(func=cmd_gen_tasks)

    p = sub.add_parser("gen-qa", help="generate QA pairs via a chat endpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", choices=[qagen.TASK_GENERATION, qagen.TASK_NLI], required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--api-key", default=None)
    p.add_argument("--model", default="gpt-4")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--max-tokens", type=int, default=2048)
    p.set_defaults(func=cmd_gen_qa)

    p = sub.add_parser("split", help="train/test split with zero document overlap")
    p.add_argument("--corpus", required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--ngram", type=int, default=8)
    p.add_argument("--qa", default=None, help="QA JSONL routed by document side")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("plan", help="emit a training-stage plan for a method preset")
    p.add_argument("--preset", required=True)
    p.add_argument("--ref", action="append", help="name=path manifest reference")
    p.add_argument("--refs-file", default=None)
    p.add_argument("--cross-domain", action="store_true")
    p.add_argument("--render", action="store_true", help="materialize per-stage manifests")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="score model outputs")
    p.add_argument("--predictions", default=None)
    p.add_argument("--references", default=None)
    p.add_argument("--logprobs", default=None)
    p.add_argument("--name", default="eval")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="corpus and QA statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa", default=None)
    p.add_argument("--name", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("verify", help="verify manifest checksums")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        config = _load_config(args.config)
        return args.func(args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
