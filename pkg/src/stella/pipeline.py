"""Stage orchestration: config, artifact paths, provenance manifests, run-all.

Every stage writes its outputs atomically and records a manifest of input
fingerprints, a config hash, and output fingerprints.  ``run-all`` executes
the stages in order and verifies that each stage consumed exactly the bytes
its predecessor produced, so a finished run carries a checkable provenance
chain.  With ``mock=True``, all model traffic goes to the deterministic
offline backends and two runs over the same inputs produce byte-identical
artifacts.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .beir_io import export_beir
from .chunking import ChunkConfig, Passage, run_chunk
from .errors import MissingArtifact, StellaError
from .gateway.config import build_gateway
from .ingest import run_ingest
from .querygen import QueryRecord, describe_terms, generate_taq, generate_tcq
from .selection import (
    CandidatePassage,
    ClusterConfig,
    classify_pool,
    density_filter,
    distinct_terms,
    select_representatives,
)
from .storage import fingerprint, fingerprint_obj, read_jsonl, write_json, write_jsonl
from .terminology import TermFilterConfig, load_dictionary, run_terms
from .xlingual import audit_back_translation, audit_term_preservation, translate_all
from .xlingual import TranslationRecord

log = logging.getLogger(__name__)

STAGES = ("ingest", "chunk", "terms", "select", "generate", "translate", "audit", "export")


@dataclass
class PipelineConfig:
    manifest: Path
    freq_table: Path
    out_dir: Path
    seed: int = 0
    mock: bool = False
    chunk: ChunkConfig = field(default_factory=ChunkConfig)
    term_filter: TermFilterConfig = field(default_factory=TermFilterConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    min_distinct_terms: int = 5
    description_window: int = 2
    max_repairs: int = 3
    languages: tuple[str, ...] = ("ko", "id", "th", "fr", "zh", "ja")
    bt_threshold: float = 0.93
    max_workers: int = 8
    gateway_profiles: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_toml(cls, path: str | Path, mock: bool | None = None) -> "PipelineConfig":
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        path = Path(path)
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        base = path.parent

        def respath(value: str) -> Path:
            p = Path(value)
            return p if p.is_absolute() else (base / p)

        paths = raw.get("paths", {})
        chunk_cfg = raw.get("chunk", {})
        terms_cfg = raw.get("terms", {})
        select_cfg = raw.get("select", {})
        generate_cfg = raw.get("generate", {})
        translate_cfg = raw.get("translate", {})
        cfg = cls(
            manifest=respath(paths.get("manifest", "manifest.jsonl")),
            freq_table=respath(paths.get("freq_table", "wordfreq.tsv")),
            out_dir=respath(paths.get("out_dir", "out")),
            seed=raw.get("seed", 0),
            mock=raw.get("mock", False) if mock is None else mock,
            chunk=ChunkConfig(
                chunk_size=chunk_cfg.get("size", 100),
                overlap=chunk_cfg.get("overlap", 20),
            ),
            term_filter=TermFilterConfig(
                min_doc_frequency=terms_cfg.get("min_doc_frequency", 10),
                zipf_threshold=terms_cfg.get("zipf_threshold", 3.5),
            ),
            cluster=ClusterConfig(
                k=select_cfg.get("k", 5),
                per_medoid=select_cfg.get("per_medoid", 20),
                seed=raw.get("seed", 0),
            ),
            min_distinct_terms=select_cfg.get("min_distinct_terms", 5),
            description_window=generate_cfg.get("window", 2),
            max_repairs=generate_cfg.get("max_repairs", 3),
            languages=tuple(translate_cfg.get("languages", ["ko", "id", "th", "fr", "zh", "ja"])),
            bt_threshold=translate_cfg.get("bt_threshold", 0.93),
            max_workers=raw.get("max_workers", 8),
            gateway_profiles=raw.get("gateway", {}),
        )
        return cfg

    # artifact paths -----------------------------------------------------------

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def manifest_path(self, stage: str) -> Path:
        return self.out_dir / "manifests" / f"{stage}.json"

    def config_hash(self) -> str:
        snapshot = {
            "seed": self.seed,
            "chunk": [self.chunk.chunk_size, self.chunk.overlap],
            "terms": self.term_filter.to_dict(),
            "cluster": [self.cluster.k, self.cluster.per_medoid],
            "min_distinct_terms": self.min_distinct_terms,
            "window": self.description_window,
            "max_repairs": self.max_repairs,
            "languages": list(self.languages),
            "bt_threshold": self.bt_threshold,
        }
        return fingerprint_obj(snapshot)


def _relpath(cfg: PipelineConfig, path: Path) -> str:
    """Workdir-relative artifact name, so manifests are location-independent."""
    import os

    return os.path.relpath(path, cfg.out_dir.parent)


def _write_stage_manifest(
    cfg: PipelineConfig, stage: str, input_fps: dict[str, str], outputs: list[Path],
    counts: dict[str, Any],
) -> None:
    manifest = {
        "stage": stage,
        "config_hash": cfg.config_hash(),
        "inputs": input_fps,
        "outputs": {_relpath(cfg, p): fingerprint(p) for p in outputs if p.is_file()},
        "counts": counts,
    }
    write_json(cfg.manifest_path(stage), manifest)


def _require(cfg: PipelineConfig, paths: list[Path]) -> dict[str, str]:
    """Assert inputs exist and fingerprint them before the stage mutates anything."""
    for p in paths:
        if not p.exists():
            raise MissingArtifact(f"required artifact missing: {p}")
    return {_relpath(cfg, p): fingerprint(p) for p in paths}


def _gateway(cfg: PipelineConfig):
    return build_gateway(cfg.gateway_profiles, mock=cfg.mock, seed=cfg.seed)


# --- stages ------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig) -> dict[str, Any]:
    fps = _require(cfg, [cfg.manifest])
    counts = run_ingest(cfg.manifest, cfg.out_dir)
    _write_stage_manifest(cfg, "ingest", fps,
                          [cfg.path("accepted.jsonl"), cfg.path("ledger.json")], counts)
    return counts


def stage_chunk(cfg: PipelineConfig) -> dict[str, Any]:
    src = cfg.path("accepted.jsonl")
    fps = _require(cfg, [src])
    counts = run_chunk(src, cfg.path("passages.jsonl"), cfg.chunk)
    _write_stage_manifest(cfg, "chunk", fps, [cfg.path("passages.jsonl")], counts)
    return counts


def stage_terms(cfg: PipelineConfig) -> dict[str, Any]:
    src = cfg.path("passages.jsonl")
    fps = _require(cfg, [src, cfg.freq_table])
    gateway = _gateway(cfg)
    counts = run_terms(src, cfg.freq_table, cfg.path("dict.json"),
                       cfg.term_filter, tagger=gateway.pos_tag)
    _write_stage_manifest(cfg, "terms", fps, [cfg.path("dict.json")], counts)
    return counts


def run_select(
    passages_path: Path,
    dict_path: Path,
    out_path: Path,
    cluster: ClusterConfig,
    min_distinct: int,
    gateway,
    max_workers: int = 8,
    report_path: Path | None = None,
    sample_cap: int | None = None,
) -> dict[str, Any]:
    """Density filter, intent pooling, clustering, representative extraction.

    ``sample_cap`` truncates each intent pool (in passage order) before
    clustering, for desk-scale runs over large pools.
    """
    dictionary = load_dictionary(dict_path)
    passages = [Passage.from_dict(obj) for _, obj in read_jsonl(passages_path)]
    dense = density_filter(passages, dictionary, min_distinct)
    terms_by_passage = {p.passage_id: distinct_terms(p, dictionary) for p in dense}
    pools, unparseable = classify_pool(dense, gateway, max_workers=max_workers)

    candidates: list[CandidatePassage] = []
    flags: dict[str, Any] = {}
    for intent in sorted(pools, key=lambda i: i.value):
        pool_passages = pools[intent]
        if sample_cap is not None:
            pool_passages = pool_passages[:sample_cap]
        vectors = []
        batch = max(1, gateway.config.max_batch)
        for i in range(0, len(pool_passages), batch):
            chunk = [p.text for p in pool_passages[i:i + batch]]
            if chunk:
                vectors.extend(gateway.embed(chunk))
        pool = list(zip(pool_passages, vectors))
        result = select_representatives(pool, intent, cluster, terms_by_passage)
        candidates.extend(result.candidates)
        flags[intent.value] = {
            "pool": len(pool), "selected": len(result.candidates),
            "backfilled": result.backfilled, "flagged": result.flagged,
            "total_deviation": result.clustering.total_deviation if result.clustering else None,
        }

    candidates.sort(key=lambda c: c.passage.passage_id)
    write_jsonl(out_path, (c.to_dict() for c in candidates))
    counts = {
        "density_filtered": len(dense),
        "unparseable_intent": len(unparseable),
        "candidates": len(candidates),
        "intents": flags,
    }
    if report_path is not None:
        write_json(report_path, counts)
    return counts


def stage_select(cfg: PipelineConfig) -> dict[str, Any]:
    passages_path = cfg.path("passages.jsonl")
    dict_path = cfg.path("dict.json")
    fps = _require(cfg, [passages_path, dict_path])
    counts = run_select(
        passages_path, dict_path, cfg.path("candidates.jsonl"), cfg.cluster,
        cfg.min_distinct_terms, _gateway(cfg), cfg.max_workers,
        report_path=cfg.path("selection_report.json"),
    )
    _write_stage_manifest(cfg, "select", fps,
                          [cfg.path("candidates.jsonl"), cfg.path("selection_report.json")],
                          {k: counts[k] for k in ("density_filtered", "unparseable_intent", "candidates")})
    return counts


def stage_generate(cfg: PipelineConfig) -> dict[str, Any]:
    candidates_path = cfg.path("candidates.jsonl")
    passages_path = cfg.path("passages.jsonl")
    dict_path = cfg.path("dict.json")
    fps = _require(cfg, [candidates_path, passages_path, dict_path])
    dictionary = load_dictionary(dict_path)
    gateway = _gateway(cfg)

    by_doc: dict[str, list[Passage]] = {}
    for _, obj in read_jsonl(passages_path):
        p = Passage.from_dict(obj)
        by_doc.setdefault(p.doc_id, []).append(p)
    for doc_passages in by_doc.values():
        doc_passages.sort(key=lambda p: p.ordinal)

    candidates = [CandidatePassage.from_dict(obj) for _, obj in read_jsonl(candidates_path)]
    candidates.sort(key=lambda c: c.passage.passage_id)

    records: list[QueryRecord] = []
    skipped: list[str] = []
    invalid = 0
    for candidate in candidates:
        doc_passages = by_doc.get(candidate.passage.doc_id, [candidate.passage])
        terms = describe_terms(candidate, doc_passages, dictionary, gateway,
                               w=cfg.description_window)
        if len(terms) < 2:
            skipped.append(candidate.passage.passage_id)
            continue
        tcq = generate_tcq(candidate, terms, candidate.intent, gateway,
                           max_repairs=cfg.max_repairs, dictionary=dictionary)
        taq = generate_taq(candidate, terms, candidate.intent, gateway,
                           max_repairs=cfg.max_repairs, dictionary=dictionary)
        for record in (tcq, taq):
            records.append(record)
            if not record.valid:
                invalid += 1

    write_jsonl(cfg.path("queries.jsonl"), (r.to_dict() for r in records))
    counts = {
        "candidates": len(candidates),
        "skipped_too_few_terms": len(skipped),
        "records": len(records),
        "invalid_records": invalid,
        "repair_rounds_total": sum(r.repair_rounds for r in records),
    }
    write_json(cfg.path("generation_report.json"), {**counts, "skipped_ids": skipped})
    _write_stage_manifest(cfg, "generate", fps,
                          [cfg.path("queries.jsonl"), cfg.path("generation_report.json")], counts)
    return counts


def stage_translate(cfg: PipelineConfig) -> dict[str, Any]:
    queries_path = cfg.path("queries.jsonl")
    dict_path = cfg.path("dict.json")
    fps = _require(cfg, [queries_path, dict_path])
    dictionary = load_dictionary(dict_path)
    gateway = _gateway(cfg)
    records = [QueryRecord.from_dict(obj) for _, obj in read_jsonl(queries_path)]
    exportable = [r for r in records if r.valid]
    translations = translate_all(exportable, cfg.languages, dictionary, gateway,
                                 max_repairs=cfg.max_repairs, max_workers=cfg.max_workers)
    write_jsonl(cfg.path("translations.jsonl"), (t.to_dict() for t in translations))
    failed = sum(1 for t in translations if not t.term_check_passed)
    counts = {"translations": len(translations), "term_check_failures": failed,
              "languages": list(cfg.languages)}
    _write_stage_manifest(cfg, "translate", fps,
                          [cfg.path("translations.jsonl")], counts)
    return counts


def stage_audit(cfg: PipelineConfig) -> dict[str, Any]:
    queries_path = cfg.path("queries.jsonl")
    translations_path = cfg.path("translations.jsonl")
    fps = _require(cfg, [queries_path, translations_path])
    gateway = _gateway(cfg)
    originals = {
        obj["query_id"]: obj["final_query"] for _, obj in read_jsonl(queries_path)
    }
    translations = [TranslationRecord.from_dict(obj) for _, obj in read_jsonl(translations_path)]
    bt_report = audit_back_translation(translations, originals, gateway,
                                       threshold=cfg.bt_threshold)
    term_report = audit_term_preservation(translations)
    report = {"back_translation": bt_report, "term_preservation": term_report}
    write_json(cfg.path("audits.json"), report)
    # persist the recorded bt cosines alongside the translations
    write_jsonl(cfg.path("translations.jsonl"), (t.to_dict() for t in translations))
    _write_stage_manifest(cfg, "audit", fps,
                          [cfg.path("audits.json"), cfg.path("translations.jsonl")],
                          {"term_preservation_failures": term_report["failure_count"]})
    return report


def stage_export(cfg: PipelineConfig) -> dict[str, Any]:
    passages_path = cfg.path("passages.jsonl")
    queries_path = cfg.path("queries.jsonl")
    translations_path = cfg.path("translations.jsonl")
    accepted_path = cfg.path("accepted.jsonl")
    fps = _require(cfg, [passages_path, queries_path, translations_path])
    passages = [Passage.from_dict(obj) for _, obj in read_jsonl(passages_path)]
    queries = [QueryRecord.from_dict(obj) for _, obj in read_jsonl(queries_path)]
    translations = [TranslationRecord.from_dict(obj) for _, obj in read_jsonl(translations_path)]
    titles = {}
    if accepted_path.exists():
        titles = {obj["doc_id"]: obj.get("title", "") for _, obj in read_jsonl(accepted_path)}
    counts = export_beir(passages, queries, translations, cfg.path("beir"), titles)
    beir_files = sorted(cfg.path("beir").rglob("*.*"))
    _write_stage_manifest(cfg, "export", fps, beir_files, counts)
    return counts


_STAGE_FUNCS = {
    "ingest": stage_ingest,
    "chunk": stage_chunk,
    "terms": stage_terms,
    "select": stage_select,
    "generate": stage_generate,
    "translate": stage_translate,
    "audit": stage_audit,
    "export": stage_export,
}


def run_stage(name: str, cfg: PipelineConfig) -> dict[str, Any]:
    if name not in _STAGE_FUNCS:
        raise StellaError(f"unknown stage {name!r}; stages: {', '.join(STAGES)}")
    log.info("stage %s starting", name)
    counts = _STAGE_FUNCS[name](cfg)
    log.info("stage %s done: %s", name, json.dumps(counts, default=str)[:400])
    return counts


def verify_chain(cfg: PipelineConfig) -> list[str]:
    """Check that every stage consumed the fingerprints its producer wrote."""
    problems = []
    produced: dict[str, str] = {}
    for stage in STAGES:
        path = cfg.manifest_path(stage)
        if not path.exists():
            problems.append(f"missing manifest for stage {stage}")
            continue
        manifest = json.loads(path.read_text(encoding="utf-8"))
        for artifact, fp in manifest.get("inputs", {}).items():
            if artifact in produced and produced[artifact] != fp:
                problems.append(
                    f"stage {stage} consumed {artifact} with fingerprint {fp[:12]}, "
                    f"but it was produced as {produced[artifact][:12]}"
                )
        for artifact, fp in manifest.get("outputs", {}).items():
            produced[artifact] = fp
    return problems


def run_all(cfg: PipelineConfig) -> dict[str, Any]:
    results = {}
    for stage in STAGES:
        results[stage] = run_stage(stage, cfg)
    problems = verify_chain(cfg)
    if problems:
        raise StellaError("provenance chain broken: " + "; ".join(problems))
    results["chain_verified"] = True
    return results
