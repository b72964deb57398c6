"""Pipeline driver: ingest -> chunk -> embed -> run -> report -> correlate.

One declarative config file (YAML/JSON) describes an experiment; flags
override. Stages are content-addressed by a key derived from their inputs, so
reruns reuse artifacts byte-for-byte instead of recomputing.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import threading
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from .corpus import (Collection, ingest_beir, ingest_gutenqa, load_collection,
                     save_collection)
from .embedding import (EmbedderSpec, build_embedder, read_vectors, write_vectors)
from .errors import ChunkbenchError
from .evaluation import (EvalReport, chunk_size_correlation, evaluate_in_corpus,
                         evaluate_in_document, paired_t_test, relative_change,
                         write_pairs, write_per_query_records, write_report,
                         read_report)
from .late_chunking import contextualized_embed_document
from .llm import HttpLlmGateway, StubLlm
from .prompts import prompt_hash
from .retrieval import RunResult, build_index, run_task, write_run, read_run
from .segmentation import (ChunkStats, ChunkerConfig, METHODS, chunk_document,
                           read_chunks, write_chunks)
from .tokenizer import TokenizerScheme

ORDERINGS = ("pre", "contextualized")
TASKS = ("in_corpus", "in_document")


@dataclass
class DatasetConfig:
    name: str = "dataset"
    family: str = "beir"  # beir | gutenqa
    corpus: str = ""
    queries: str = ""
    qrels: str = ""
    books: str = ""
    qa: str = ""
    delimiter: str = ","
    columns: dict = field(default_factory=dict)


@dataclass
class LlmConfig:
    mode: str = "stub"  # stub | http
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "LLM_API_KEY"
    cache_dir: str = ""


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    method: str = "fixed"
    ordering: str = "pre"
    task: str = "in_corpus"
    k: int = 10
    seed: int = 0
    run_tag: str = "run"
    out: str = "runs"
    embedder: EmbedderSpec = field(default_factory=EmbedderSpec)
    chunker: ChunkerConfig = field(default_factory=ChunkerConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    grid: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ChunkbenchError(f"unknown method {self.method!r}")
        if self.ordering not in ORDERINGS:
            raise ChunkbenchError(f"unknown ordering {self.ordering!r}")
        if self.task not in TASKS:
            raise ChunkbenchError(f"unknown task {self.task!r}")
        if self.k < 1:
            raise ChunkbenchError("k must be >= 1")
        self.embedder.validate()
        self.chunker.validate()


def load_config(path: str | None) -> ExperimentConfig:
    data: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    return config_from_dict(data)


def config_from_dict(data: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    ds = data.get("dataset", {})
    cfg.dataset = DatasetConfig(**{k: v for k, v in ds.items()
                                   if k in DatasetConfig.__dataclass_fields__})
    emb = dict(data.get("embedder", {}))
    emb.setdefault("endpoint", os.environ.get("CHUNKBENCH_SIDECAR_URL", ""))
    if "model" in emb:  # accept the shorter key
        emb["model_name"] = emb.pop("model")
    cfg.embedder = EmbedderSpec(**{k: v for k, v in emb.items()
                                   if k in EmbedderSpec.__dataclass_fields__})
    ch = dict(data.get("chunker", {}))
    scheme = ch.pop("scheme", None)
    cfg.chunker = ChunkerConfig(**{k: v for k, v in ch.items()
                                   if k in ChunkerConfig.__dataclass_fields__})
    if scheme == "remote":
        cfg.chunker.scheme = TokenizerScheme(kind="remote",
                                             endpoint=cfg.embedder.endpoint,
                                             model=cfg.embedder.model_name)
    llm = dict(data.get("llm", {}))
    llm.setdefault("endpoint", os.environ.get("CHUNKBENCH_LLM_ENDPOINT", ""))
    cfg.llm = LlmConfig(**{k: v for k, v in llm.items()
                           if k in LlmConfig.__dataclass_fields__})
    for key in ("method", "ordering", "task", "k", "seed", "run_tag", "out"):
        if key in data:
            setattr(cfg, key, data[key])
    cfg.grid = data.get("grid", {}) or {}
    cfg.embedder.seed = cfg.seed
    return cfg


def apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> None:
    if getattr(args, "dataset", None):
        cfg.dataset.name = args.dataset
    if getattr(args, "method", None):
        cfg.method = args.method
    if getattr(args, "ordering", None):
        cfg.ordering = args.ordering
    if getattr(args, "backend", None):
        cfg.embedder.backend = args.backend
    if getattr(args, "endpoint", None):
        cfg.embedder.endpoint = args.endpoint
    if getattr(args, "k", None):
        cfg.k = args.k
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.embedder.seed = args.seed
    if getattr(args, "out", None):
        cfg.out = args.out


def _key(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


_LOCKS: dict[str, threading.Lock] = {}
_LOCKS_GUARD = threading.Lock()


def _path_lock(path: str) -> threading.Lock:
    # matrix cells share chunk/query artifacts; serialize per target path
    with _LOCKS_GUARD:
        return _LOCKS.setdefault(path, threading.Lock())


def _meta_fresh(path: str, key: str) -> bool:
    meta = f"{path}.meta.json"
    if not (os.path.exists(path) and os.path.exists(meta)):
        return False
    with open(meta, encoding="utf-8") as fh:
        return json.load(fh).get("key") == key


def _write_meta(path: str, key: str, **extra) -> None:
    with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump({"key": key, **extra}, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _file_hash(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


class StageError(ChunkbenchError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class Pipeline:
    """Executes the staged experiment for one (dataset, method, ordering)."""

    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        self.manifest: dict = {"config": _config_dict(cfg),
                               "config_hash": _key(_config_dict(cfg)),
                               "versions": _versions(),
                               "window_rule": ("greedy-exact"
                                               if cfg.embedder.backend == "reference"
                                               else "adaptive-byte-slices"),
                               "prompt_hashes": {"proposition": prompt_hash("proposition"),
                                                 "lumber": prompt_hash("lumber")},
                               "stages": {}}
        for sub in ("collections", "chunks", "embeddings", "runs", "reports",
                    "manifests"):
            os.makedirs(os.path.join(cfg.out, sub), exist_ok=True)
        self._collection: Collection | None = None
        self._col_hash: str | None = None

    # --- stage: ingest -----------------------------------------------------

    def ensure_collection(self) -> Collection:
        if self._collection is not None:
            return self._collection
        cfg = self.cfg
        ds = cfg.dataset
        dest = os.path.join(cfg.out, "collections", ds.name)
        try:
            if ds.family == "beir":
                sources = [ds.corpus, ds.queries, ds.qrels]
            else:
                sources = [ds.books, ds.qa]
            key = _key("ingest", ds.family, ds.name,
                       [_file_hash(p) for p in sources if p], ds.columns,
                       ds.delimiter)
            marker = os.path.join(dest, "ingest.meta.json")
            with _path_lock(dest):
                if os.path.exists(marker):
                    with open(marker, encoding="utf-8") as fh:
                        if json.load(fh).get("key") == key:
                            col = load_collection(dest)
                            self._note("ingest", dest, key, reused=True)
                            self._collection, self._col_hash = col, key
                            return col
                if ds.family == "beir":
                    col = ingest_beir(ds.corpus, ds.queries, ds.qrels,
                                      name=ds.name)
                elif ds.family == "gutenqa":
                    cols = ds.columns or {}
                    col = ingest_gutenqa(ds.books, ds.qa, name=ds.name,
                                         delimiter=ds.delimiter, **cols)
                else:
                    raise ChunkbenchError(f"unknown dataset family {ds.family!r}")
                save_collection(col, dest)
                with open(marker, "w", encoding="utf-8") as fh:
                    json.dump({"key": key, "counts": col.counts}, fh,
                              sort_keys=True, indent=1)
                    fh.write("\n")
                self._note("ingest", dest, key, reused=False, counts=col.counts)
                self._collection, self._col_hash = col, key
                return col
        except ChunkbenchError:
            raise
        except Exception as exc:
            raise StageError("ingest", exc) from exc

    # --- stage: chunk --------------------------------------------------------

    def _embedder_identity(self) -> list:
        e = self.cfg.embedder
        return [e.backend, e.dims, e.context_mix_lambda, e.context_window_tokens,
                e.model_name, e.seed]

    def _llm_identity(self) -> list:
        l = self.cfg.llm
        return [l.mode, l.model]

    def build_llm(self):
        l = self.cfg.llm
        if l.mode == "stub":
            return StubLlm()
        if not l.endpoint:
            raise ChunkbenchError("llm.mode=http needs llm.endpoint "
                                  "(or CHUNKBENCH_LLM_ENDPOINT)")
        cache = l.cache_dir or os.path.join(self.cfg.out, "llm_cache")
        return HttpLlmGateway(l.endpoint, l.model, api_key_env=l.api_key_env,
                              cache_dir=cache)

    def ensure_chunks(self) -> tuple[str, list]:
        cfg = self.cfg
        col = self.ensure_collection()
        c = cfg.chunker
        parts = ["chunk", self._col_hash, cfg.method, c.fixed_size_tokens,
                 c.sentences_per_chunk, c.semantic_percentile,
                 c.lumber_token_budget, c.scheme.kind, c.scheme.model]
        if cfg.method == "semantic":
            parts.append(self._embedder_identity())
        if cfg.method in ("proposition", "lumber"):
            parts.append(self._llm_identity())
            parts.append(self.manifest["prompt_hashes"])
        key = _key(*parts)
        path = os.path.join(cfg.out, "chunks",
                            f"{cfg.dataset.name}.{cfg.method}.{key}.jsonl")
        with _path_lock(path):
            if _meta_fresh(path, key):
                self._note("chunk", path, key, reused=True)
                return path, read_chunks(path)
            try:
                embedder = build_embedder(cfg.embedder) \
                    if cfg.method == "semantic" else None
                llm = self.build_llm() \
                    if cfg.method in ("proposition", "lumber") else None
                stats = ChunkStats()
                chunks = []
                for doc in col.documents.values():
                    chunks.extend(chunk_document(doc, cfg.method, c,
                                                 embedder=embedder, llm=llm,
                                                 stats=stats))
                write_chunks(chunks, f"{path}.partial")
                os.replace(f"{path}.partial", path)
                _write_meta(path, key, stats=dataclasses.asdict(stats),
                            n_chunks=len(chunks))
                self._note("chunk", path, key, reused=False,
                           n_chunks=len(chunks), stats=dataclasses.asdict(stats))
                return path, chunks
            except StageError:
                raise
            except Exception as exc:
                raise StageError("chunk", exc) from exc

    # --- stage: embed ---------------------------------------------------------

    def ensure_embeddings(self) -> tuple[str, str, list]:
        cfg = self.cfg
        col = self.ensure_collection()
        chunks_path, chunks = self.ensure_chunks()
        chunk_key = _key("vec", _file_hash(chunks_path), cfg.ordering,
                         self._embedder_identity())
        chunk_vec = os.path.join(
            cfg.out, "embeddings",
            f"{cfg.dataset.name}.{cfg.method}.{cfg.ordering}.{chunk_key}.vec")
        query_key = _key("qvec", self._col_hash, self._embedder_identity())
        query_vec = os.path.join(cfg.out, "embeddings",
                                 f"{cfg.dataset.name}.queries.{query_key}.vec")
        try:
            embedder = build_embedder(cfg.embedder)
            model_label = cfg.embedder.model_name or "reference"
            with _path_lock(chunk_vec):
                if not _meta_fresh(chunk_vec, chunk_key):
                    if cfg.ordering == "pre":
                        vectors = embedder.embed_chunks([c.text for c in chunks])
                        matrix = np.stack([v.values for v in vectors]) if chunks \
                            else np.empty((0, cfg.embedder.dims))
                    else:
                        by_doc: dict[str, list] = {}
                        for c in chunks:
                            by_doc.setdefault(c.doc_id, []).append(c)
                        vec_of: dict[str, np.ndarray] = {}
                        for doc_id, doc_chunks in by_doc.items():
                            pooled = contextualized_embed_document(
                                col.documents[doc_id], doc_chunks, embedder)
                            for cid, v in pooled.items():
                                vec_of[cid] = v.values
                        matrix = np.stack([vec_of[c.chunk_id] for c in chunks]) \
                            if chunks else np.empty((0, cfg.embedder.dims))
                    write_vectors(f"{chunk_vec}.partial",
                                  [c.chunk_id for c in chunks], matrix,
                                  backend=cfg.embedder.backend,
                                  model=model_label,
                                  context_mix_lambda=cfg.embedder.context_mix_lambda,
                                  ordering=cfg.ordering)
                    os.replace(f"{chunk_vec}.partial", chunk_vec)
                    _write_meta(chunk_vec, chunk_key)
                    self._note("embed_chunks", chunk_vec, chunk_key, reused=False)
                else:
                    self._note("embed_chunks", chunk_vec, chunk_key, reused=True)
            with _path_lock(query_vec):
                if not _meta_fresh(query_vec, query_key):
                    qids = list(col.queries)
                    vectors = [embedder.embed_query(col.queries[q].text)
                               for q in qids]
                    matrix = np.stack([v.values for v in vectors]) if qids \
                        else np.empty((0, cfg.embedder.dims))
                    write_vectors(f"{query_vec}.partial", qids, matrix,
                                  backend=cfg.embedder.backend,
                                  model=model_label,
                                  context_mix_lambda=cfg.embedder.context_mix_lambda,
                                  ordering="query")
                    os.replace(f"{query_vec}.partial", query_vec)
                    _write_meta(query_vec, query_key)
                    self._note("embed_queries", query_vec, query_key,
                               reused=False)
                else:
                    self._note("embed_queries", query_vec, query_key,
                               reused=True)
            return chunk_vec, query_vec, chunks
        except StageError:
            raise
        except Exception as exc:
            raise StageError("embed", exc) from exc

    # --- stage: run -------------------------------------------------------------

    def ensure_run(self) -> tuple[str, list]:
        cfg = self.cfg
        col = self.ensure_collection()
        chunk_vec, query_vec, chunks = self.ensure_embeddings()
        key = _key("run", _file_hash(chunk_vec), _file_hash(query_vec), cfg.task,
                   cfg.k, cfg.run_tag)
        path = os.path.join(
            cfg.out, "runs",
            f"{cfg.dataset.name}.{cfg.method}.{cfg.ordering}.{key}.run")
        if _meta_fresh(path, key):
            self._note("run", path, key, reused=True)
            return path, chunks
        try:
            ids, matrix, _ = read_vectors(chunk_vec)
            doc_of = {c.chunk_id: c.doc_id for c in chunks}
            index = build_index(
                (cid, doc_of[cid], matrix[i].astype(np.float64))
                for i, cid in enumerate(ids))
            qids, qmatrix, _ = read_vectors(query_vec)
            qvecs = {qid: qmatrix[i].astype(np.float64)
                     for i, qid in enumerate(qids)}
            queries = [col.queries[q] for q in col.queries]
            result = run_task(queries, index, cfg.task, k=cfg.k,
                              query_vectors=qvecs, run_tag=cfg.run_tag)
            write_run(result, f"{path}.partial")
            os.replace(f"{path}.partial", path)
            _write_meta(path, key, n_skipped=len(result.skipped))
            self._note("run", path, key, reused=False,
                       n_skipped=len(result.skipped))
            return path, chunks
        except StageError:
            raise
        except Exception as exc:
            raise StageError("run", exc) from exc

    # --- stage: report -------------------------------------------------------------

    def ensure_report(self) -> tuple[str, EvalReport]:
        cfg = self.cfg
        col = self.ensure_collection()
        run_path, chunks = self.ensure_run()
        key = _key("report", _file_hash(run_path), self._col_hash, cfg.k)
        base = os.path.join(
            cfg.out, "reports",
            f"{cfg.dataset.name}.{cfg.method}.{cfg.ordering}.{key}")
        path = f"{base}.report.json"
        try:
            with open(f"{run_path}.meta.json", encoding="utf-8") as fh:
                n_preskipped = json.load(fh).get("n_skipped", 0)
            if _meta_fresh(path, key):
                self._note("report", path, key, reused=True)
                return path, read_report(path)
            results = read_run(run_path)
            if cfg.task == "in_corpus":
                report = evaluate_in_corpus(results, col.qrels, k=cfg.k,
                                            run_tag=cfg.run_tag,
                                            n_preskipped=n_preskipped)
            else:
                report = evaluate_in_document(results, col.gt_spans, chunks,
                                              k=cfg.k, run_tag=cfg.run_tag,
                                              n_preskipped=n_preskipped)
            write_report(report, f"{path}.partial")
            os.replace(f"{path}.partial", path)
            write_per_query_records(report, f"{base}.per_query.jsonl")
            _write_meta(path, key, aggregate=report.aggregate,
                        n_evaluated=report.n_evaluated, n_skipped=report.n_skipped)
            self._note("report", path, key, reused=False,
                       aggregate=report.aggregate)
            return path, report
        except StageError:
            raise
        except Exception as exc:
            raise StageError("report", exc) from exc

    # --- stage: correlate -------------------------------------------------------------

    def ensure_correlation(self) -> str:
        cfg = self.cfg
        col = self.ensure_collection()
        report_path, report = self.ensure_report()
        _, chunks = self.ensure_chunks()
        key = _key("correlate", _file_hash(report_path))
        base = os.path.join(
            cfg.out, "reports",
            f"{cfg.dataset.name}.{cfg.method}.{cfg.ordering}.{key}")
        path = f"{base}.correlation.json"
        if _meta_fresh(path, key):
            self._note("correlate", path, key, reused=True)
            return path
        try:
            corr = chunk_size_correlation(report.per_query, chunks, cfg.task,
                                          qrels=col.qrels, gt_spans=col.gt_spans,
                                          scheme=cfg.chunker.scheme)
            write_pairs(corr.pairs, f"{base}.pairs.tsv")
            payload = {"r": corr.r, "p": corr.p, "n": corr.n,
                       "n_excluded": corr.n_excluded, "undefined": corr.undefined,
                       "pooling": f"all evaluated queries of task {cfg.task}"}
            with open(f"{path}.partial", "w", encoding="utf-8") as fh:
                json.dump(payload, fh, sort_keys=True, indent=1)
                fh.write("\n")
            os.replace(f"{path}.partial", path)
            _write_meta(path, key)
            self._note("correlate", path, key, reused=False, r=corr.r)
            return path
        except StageError:
            raise
        except Exception as exc:
            raise StageError("correlate", exc) from exc

    # --- manifest ----------------------------------------------------------------------

    def _note(self, stage: str, path: str, key: str, **extra) -> None:
        self.manifest["stages"][stage] = {"path": path, "key": key, **extra}

    def write_manifest(self) -> str:
        path = os.path.join(self.cfg.out, "manifests",
                            f"{self.cfg.run_tag}.{self.manifest['config_hash']}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.manifest, fh, sort_keys=True, indent=1, default=str)
            fh.write("\n")
        return path


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["embedder"].pop("endpoint", None)  # location, not content
    d["llm"].pop("endpoint", None)
    d["llm"].pop("api_key_env", None)
    return d


def _versions() -> dict:
    import scipy

    return {"chunkbench": __version__,
            "python": ".".join(map(str, sys.version_info[:3])),
            "numpy": np.__version__, "scipy": scipy.__version__}


# --- matrix -------------------------------------------------------------------------------

def _cell_config(cfg: ExperimentConfig, dataset: DatasetConfig, method: str,
                 ordering: str) -> ExperimentConfig:
    cell = dataclasses.replace(
        cfg, dataset=dataset, method=method, ordering=ordering,
        embedder=dataclasses.replace(cfg.embedder),
        chunker=dataclasses.replace(cfg.chunker),
        llm=dataclasses.replace(cfg.llm))
    return cell


def cmd_matrix(cfg: ExperimentConfig) -> int:
    methods = cfg.grid.get("methods") or [cfg.method]
    orderings = cfg.grid.get("orderings") or list(ORDERINGS)
    datasets = [cfg.dataset]
    for extra in cfg.grid.get("datasets") or []:
        datasets.append(DatasetConfig(**{k: v for k, v in extra.items()
                                         if k in DatasetConfig.__dataclass_fields__}))
    cells = [(d, m, o) for d in datasets for m in methods for o in orderings]
    reports: dict[tuple[str, str, str], EvalReport] = {}
    failures: dict[tuple[str, str, str], str] = {}

    def run_cell(cell):
        d, m, o = cell
        pipe = Pipeline(_cell_config(cfg, d, m, o))
        _, report = pipe.ensure_report()
        pipe.write_manifest()
        return report

    workers = min(len(cells), os.cpu_count() or 2)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(run_cell, cell): cell for cell in cells}
        for future, cell in futures.items():
            d, m, o = cell
            try:
                reports[(d.name, m, o)] = future.result()
            except Exception as exc:
                failures[(d.name, m, o)] = str(exc)
                print(f"cell ({d.name}, {m}, {o}) failed: {exc}", file=sys.stderr)

    names = [d.name for d in datasets]
    for ordering in orderings:
        table = render_absolute_table(reports, failures, methods, names, ordering)
        out = os.path.join(cfg.out, "reports", f"table_absolute_{ordering}.tsv")
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(table)
        print(f"\n# aggregate ({ordering})\n{table}")
    if set(orderings) >= {"pre", "contextualized"}:
        table = render_relative_table(reports, failures, methods, names)
        out = os.path.join(cfg.out, "reports", "table_relative_change.tsv")
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(table)
        print(f"\n# relative change pre -> contextualized\n{table}")
    return 1 if failures else 0


def _sig_marks(report: EvalReport, best: EvalReport | None,
               worst: EvalReport | None) -> str:
    marks = ""
    for mark, other in (("a", best), ("b", worst)):
        if other is None or other is report:
            continue
        shared = sorted(set(report.per_query) & set(other.per_query))
        if len(shared) < 2:
            continue
        sig = paired_t_test([report.per_query[q] for q in shared],
                            [other.per_query[q] for q in shared])
        if sig.p_value < 0.05:
            marks += mark
    return marks


def render_absolute_table(reports, failures, methods, datasets, ordering) -> str:
    """Rows = segmentation method, columns = dataset; a/b mark significant
    difference from the column's best/worst method (paired t, p < 0.05)."""
    lines = ["method\t" + "\t".join(datasets)]
    column: dict[str, dict[str, EvalReport]] = {
        d: {m: reports[(d, m, ordering)] for m in methods
            if (d, m, ordering) in reports}
        for d in datasets}
    for method in methods:
        cells = []
        for d in datasets:
            if (d, method, ordering) in failures:
                cells.append("FAIL")
                continue
            report = column[d].get(method)
            if report is None:
                cells.append("-")
                continue
            ranked = sorted(column[d].values(), key=lambda r: r.aggregate)
            best, worst = ranked[-1], ranked[0]
            cells.append(f"{report.aggregate:.4f}{_sig_marks(report, best, worst)}")
        lines.append(method + "\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"


def render_relative_table(reports, failures, methods, datasets) -> str:
    """Rows = method, columns = dataset; % change pre -> contextualized,
    '*' for p < 0.05 (paired t on per-query values)."""
    lines = ["method\t" + "\t".join(datasets)]
    for method in methods:
        cells = []
        for d in datasets:
            if (d, method, "pre") in failures or \
                    (d, method, "contextualized") in failures:
                cells.append("FAIL")
                continue
            pre = reports.get((d, method, "pre"))
            con = reports.get((d, method, "contextualized"))
            if pre is None or con is None:
                cells.append("-")
                continue
            change = relative_change(pre, con)
            if change.undefined:
                cells.append("undef")
                continue
            star = "*" if change.significance and \
                change.significance.p_value < 0.05 else ""
            cells.append(f"{change.pct:+.2f}{star}")
        lines.append(method + "\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"


# --- entry point ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chunkbench",
        description="Benchmark document chunking strategies for dense retrieval.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
            ("ingest", "ingest the configured dataset into the collection store"),
            ("chunk", "segment the collection with the configured method"),
            ("embed", "embed chunks and queries under the configured ordering"),
            ("run", "full pipeline: ingest, chunk, embed, search, report"),
            ("report", "evaluate an existing run into a report"),
            ("correlate", "chunk-size vs per-query-metric correlation"),
            ("matrix", "run a method x ordering grid and emit tables")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", help="experiment config file (YAML or JSON)")
        p.add_argument("--dataset", help="override dataset name")
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--ordering", choices=ORDERINGS)
        p.add_argument("--backend", choices=("reference", "remote"))
        p.add_argument("--endpoint", help="embedding sidecar URL")
        p.add_argument("--k", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="artifact output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, args)
        if args.command == "matrix":
            return cmd_matrix(cfg)
        pipe = Pipeline(cfg)
        if args.command == "ingest":
            col = pipe.ensure_collection()
            print(json.dumps(col.counts, sort_keys=True))
        elif args.command == "chunk":
            path, chunks = pipe.ensure_chunks()
            print(f"{len(chunks)} chunks -> {path}")
        elif args.command == "embed":
            chunk_vec, query_vec, _ = pipe.ensure_embeddings()
            print(f"chunk vectors -> {chunk_vec}\nquery vectors -> {query_vec}")
        elif args.command in ("run", "report"):
            path, report = pipe.ensure_report()
            print(f"{report.metric_name} aggregate {report.aggregate:.4f} over "
                  f"{report.n_evaluated} queries ({report.n_skipped} skipped) "
                  f"-> {path}")
        elif args.command == "correlate":
            path = pipe.ensure_correlation()
            print(f"correlation -> {path}")
        pipe.write_manifest()
        return 0
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ChunkbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
