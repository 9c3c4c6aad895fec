"""Command-line entry point: every pipeline stage plus evaluation utilities."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .beir_io import export_beir, load_beir
from .chunking import ChunkConfig, Passage, run_chunk
from .errors import ConfigError, StellaError
from .evaluation import Bm25Index, build_report, f1_validate, write_run
from .evaluation.dense import rank_by_cosine
from .evaluation.figures import render_report_figures
from .gateway.config import build_gateway
from .ingest import run_ingest
from .pipeline import STAGES, PipelineConfig, run_all, run_stage
from .querygen import QueryRecord, describe_terms, generate_taq, generate_tcq
from .selection import CandidatePassage, ClusterConfig
from .storage import read_jsonl, write_json, write_jsonl, write_text
from .terminology import TermFilterConfig, load_dictionary, run_terms
from .xlingual import TranslationRecord, audit_back_translation, audit_term_preservation, translate_all

log = logging.getLogger("stella")


class JsonLogFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "level": record.levelname.lower(),
            "logger": record.name,
            "message": record.getMessage(),
        }
        return json.dumps(payload, ensure_ascii=False)


def _setup_logging(level: str, as_json: bool) -> None:
    handler = logging.StreamHandler()
    if as_json:
        handler.setFormatter(JsonLogFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.basicConfig(level=getattr(logging, level.upper()), handlers=[handler])


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    if not getattr(args, "config", None):
        raise ConfigError("this command needs --config <pipeline.toml>")
    return PipelineConfig.from_toml(args.config, mock=args.mock or None)


def _gateway_from(args: argparse.Namespace):
    if getattr(args, "config", None):
        cfg = PipelineConfig.from_toml(args.config, mock=args.mock or None)
        return build_gateway(cfg.gateway_profiles, mock=cfg.mock, seed=cfg.seed)
    if args.mock:
        return build_gateway({}, mock=True, seed=getattr(args, "seed", 0))
    raise ConfigError("model access requires --config with gateway profiles, or --mock")


# --- subcommand handlers --------------------------------------------------------

def cmd_ingest(args) -> int:
    stats = run_ingest(args.manifest, args.out)
    print(json.dumps(stats))
    return 0


def cmd_chunk(args) -> int:
    cfg = ChunkConfig(chunk_size=args.size, overlap=args.overlap)
    stats = run_chunk(args.infile, args.out, cfg)
    print(json.dumps(stats))
    return 0


def cmd_terms(args) -> int:
    cfg = TermFilterConfig(min_doc_frequency=args.min_df, zipf_threshold=args.zipf_threshold)
    tagger = None
    if args.config or args.mock:
        tagger = _gateway_from(args).pos_tag
    stats = run_terms(args.passages, args.freq, args.out, cfg, tagger=tagger)
    print(json.dumps(stats))
    return 0


def cmd_select(args) -> int:
    from .pipeline import run_select

    gateway = _gateway_from(args)
    cluster = ClusterConfig(k=args.k, per_medoid=args.per_medoid, seed=args.seed)
    stats = run_select(Path(args.passages), Path(args.dict), Path(args.out), cluster,
                       args.min_distinct, gateway, sample_cap=args.sample or None)
    print(json.dumps(stats))
    return 0


def cmd_generate(args) -> int:
    gateway = _gateway_from(args)
    dictionary = load_dictionary(args.dict)
    by_doc: dict[str, list[Passage]] = {}
    for _, obj in read_jsonl(args.passages):
        p = Passage.from_dict(obj)
        by_doc.setdefault(p.doc_id, []).append(p)
    for doc in by_doc.values():
        doc.sort(key=lambda p: p.ordinal)
    records = []
    skipped = 0
    for _, obj in read_jsonl(args.candidates):
        candidate = CandidatePassage.from_dict(obj)
        doc_passages = by_doc.get(candidate.passage.doc_id, [candidate.passage])
        terms = describe_terms(candidate, doc_passages, dictionary, gateway, w=args.window)
        if len(terms) < 2:
            skipped += 1
            continue
        records.append(generate_tcq(candidate, terms, candidate.intent, gateway,
                                    max_repairs=args.max_repairs, dictionary=dictionary))
        records.append(generate_taq(candidate, terms, candidate.intent, gateway,
                                    max_repairs=args.max_repairs, dictionary=dictionary))
    write_jsonl(args.out, (r.to_dict() for r in records))
    print(json.dumps({"records": len(records), "skipped": skipped}))
    return 0


def cmd_translate(args) -> int:
    gateway = _gateway_from(args)
    dictionary = load_dictionary(args.dict)
    records = [QueryRecord.from_dict(obj) for _, obj in read_jsonl(args.queries)]
    langs = [l.strip() for l in args.langs.split(",") if l.strip()]
    translations = translate_all([r for r in records if r.valid], langs, dictionary, gateway,
                                 max_repairs=args.max_repairs)
    write_jsonl(args.out, (t.to_dict() for t in translations))
    failed = sum(1 for t in translations if not t.term_check_passed)
    print(json.dumps({"translations": len(translations), "term_check_failures": failed}))
    return 0


def cmd_audit(args) -> int:
    gateway = _gateway_from(args)
    originals = {obj["query_id"]: obj["final_query"] for _, obj in read_jsonl(args.queries)}
    translations = [TranslationRecord.from_dict(obj) for _, obj in read_jsonl(args.translations)]
    report = {
        "back_translation": audit_back_translation(translations, originals, gateway,
                                                   threshold=args.threshold),
        "term_preservation": audit_term_preservation(translations),
    }
    write_json(args.out, report)
    print(json.dumps({"term_preservation_failures":
                      report["term_preservation"]["failure_count"]}))
    return 0


def cmd_export(args) -> int:
    passages = [Passage.from_dict(obj) for _, obj in read_jsonl(args.passages)]
    queries = [QueryRecord.from_dict(obj) for _, obj in read_jsonl(args.queries)]
    translations = []
    if args.translations:
        translations = [TranslationRecord.from_dict(obj)
                        for _, obj in read_jsonl(args.translations)]
    titles = {}
    if args.accepted:
        titles = {obj["doc_id"]: obj.get("title", "") for _, obj in read_jsonl(args.accepted)}
    counts = export_beir(passages, queries, translations, args.out, titles,
                         corpus_scope=args.corpus_scope)
    print(json.dumps(counts))
    return 0


def _discover_splits(beir_dir: Path) -> dict[str, Path]:
    if (beir_dir / "corpus.jsonl").exists():
        return {beir_dir.name: beir_dir}
    splits = {}
    for child in sorted(beir_dir.iterdir()):
        if (child / "corpus.jsonl").exists():
            splits[child.name] = child
    if not splits:
        raise ConfigError(f"no BEIR splits under {beir_dir}")
    return splits


def _embed_batched(gateway, texts: list[str]):
    vectors = []
    batch = max(1, gateway.config.max_batch)
    for i in range(0, len(texts), batch):
        vectors.extend(gateway.embed(texts[i:i + batch]))
    return vectors


def run_eval(
    beir_dir: str | Path,
    retriever: str,
    k: int,
    out_path: str | Path,
    figures: bool = True,
    gateway=None,
    k1: float = 1.2,
    b: float = 0.75,
) -> dict[str, Any]:
    """Evaluate one retriever over one or many language splits."""
    beir_dir = Path(beir_dir)
    out_path = Path(out_path)
    splits = _discover_splits(beir_dir)

    runs: dict[str, dict[str, list[tuple[str, float]]]] = {}
    qrels: dict[str, str] = {}
    metadata: dict[str, dict[str, str]] = {}
    for lang, split_dir in splits.items():
        split = load_beir(split_dir)
        qrels.update(split.qrels)
        for qid, q in split.queries.items():
            metadata[qid] = q.get("metadata", {})
        texts = {pid: (f"{e['title']} {e['text']}".strip() if e.get("title") else e["text"])
                 for pid, e in split.corpus.items()}
        run: dict[str, list[tuple[str, float]]] = {}
        if retriever == "bm25":
            index = Bm25Index.build(texts.items(), k1=k1, b=b)
            for qid, q in split.queries.items():
                run[qid] = index.search(q["text"], k)
        elif retriever == "dense":
            if gateway is None:
                raise ConfigError("dense retrieval needs a gateway (--config or --mock)")
            ids = sorted(texts)
            corpus_vectors = list(zip(ids, _embed_batched(gateway, [texts[i] for i in ids])))
            qids = sorted(split.queries)
            query_vectors = _embed_batched(gateway, [split.queries[q]["text"] for q in qids])
            for qid, qvec in zip(qids, query_vectors):
                run[qid] = rank_by_cosine(qvec, corpus_vectors, k)
        else:
            raise ConfigError(f"unknown retriever {retriever!r}")
        runs[lang] = run
        write_run(run, out_path.parent / "runs" / f"{retriever}_{lang}.trec", tag=retriever)

    report = build_report(runs, qrels, metadata, k=k, retriever=retriever)
    write_json(out_path, report.to_dict())
    write_text(out_path.with_suffix(".txt"), report.render_text())
    if figures:
        render_report_figures(report, out_path.parent / "figures")
    return report.to_dict()


def cmd_eval(args) -> int:
    gateway = None
    if args.retriever == "dense":
        gateway = _gateway_from(args)
    report = run_eval(args.beir, args.retriever, args.k, args.out,
                      figures=not args.no_figures, gateway=gateway, k1=args.k1, b=args.b)
    print(json.dumps({"overall": report["overall"], "gap": report["gap"],
                      "tcq_avg": report["tcq_avg"], "taq_avg": report["taq_avg"]}))
    return 0


def _read_labels(path: str) -> dict[str, str]:
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("{"):
        return {str(k): str(v) for k, v in json.loads(text).items()}
    labels = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("\t")
        labels[key.strip()] = value.strip()
    return labels


def cmd_validate_intents(args) -> int:
    result = f1_validate(_read_labels(args.pred), _read_labels(args.ref))
    output = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        write_text(args.out, output + "\n")
    print(output)
    return 0


def cmd_stage(args) -> int:
    cfg = _load_config(args)
    counts = run_stage(args.stage, cfg)
    print(json.dumps(counts, default=str))
    return 0


def cmd_run_all(args) -> int:
    cfg = _load_config(args)
    results = run_all(cfg)
    print(json.dumps({stage: results[stage] for stage in ("ingest", "export")
                      if stage in results} | {"chain_verified": results["chain_verified"]},
                     default=str))
    return 0


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stella",
        description="Build and evaluate terminology-aware IR benchmarks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    parser.add_argument("--log-json", action="store_true", help="emit JSON log lines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="filter a document manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("chunk", help="split documents into token passages")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=100)
    p.add_argument("--overlap", type=int, default=20)
    p.set_defaults(func=cmd_chunk)

    p = sub.add_parser("terms", help="build the terminology dictionary")
    p.add_argument("--passages", required=True)
    p.add_argument("--freq", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-df", type=int, default=10)
    p.add_argument("--zipf-threshold", type=float, default=3.5)
    p.add_argument("--config")
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_terms)

    p = sub.add_parser("select", help="select candidate passages")
    p.add_argument("--passages", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--per-medoid", type=int, default=20)
    p.add_argument("--min-distinct", type=int, default=5)
    p.add_argument("--sample", type=int, default=0,
                   help="cap each intent pool before clustering (0 = full pool)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("generate", help="generate TCQ/TAQ query pairs")
    p.add_argument("--candidates", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--passages", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--max-repairs", type=int, default=3)
    p.add_argument("--config")
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("translate", help="translate queries into target languages")
    p.add_argument("--queries", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--langs", default="ko,id,th,fr,zh,ja")
    p.add_argument("--out", required=True)
    p.add_argument("--max-repairs", type=int, default=3)
    p.add_argument("--config")
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("audit", help="run back-translation and term-preservation audits")
    p.add_argument("--queries", required=True)
    p.add_argument("--translations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.93)
    p.add_argument("--config")
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("export", help="write the BEIR-compatible dataset")
    p.add_argument("--passages", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--translations", default="")
    p.add_argument("--accepted", default="")
    p.add_argument("--corpus-scope", choices=["full", "positives"], default="full")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("eval", help="evaluate a retriever over a BEIR directory")
    p.add_argument("--beir", required=True)
    p.add_argument("--retriever", choices=["bm25", "dense"], default="bm25")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--config")
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validate-intents", help="score predicted intents against reference labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate_intents)

    p = sub.add_parser("stage", help="run a single pipeline stage")
    p.add_argument("stage", choices=list(STAGES))
    p.add_argument("--config", required=True)
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_stage)

    p = sub.add_parser("run-all", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=cmd_run_all)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.log_level, args.log_json)
    try:
        return args.func(args)
    except StellaError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
