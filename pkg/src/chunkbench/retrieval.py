"""Brute-force dense retrieval over chunk vectors, plus MaxP doc aggregation.

Every chunk is scored for every query (exact search, no shortlist); ties
break by ascending unit id so runs are byte-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Query
from .errors import PreconditionError


@dataclass
class ChunkIndex:
    chunk_ids: list[str]
    doc_ids: list[str]
    matrix: np.ndarray  # (n_chunks, dims), rows L2-normalized
    dims: int
    # Derived lookups (built in __post_init__):
    id_rank: np.ndarray = field(init=False)  # lexicographic rank of chunk_id
    doc_ord: np.ndarray = field(init=False)  # chunk row -> doc ordinal
    docs: list[str] = field(init=False)  # ordinal -> doc_id
    doc_rank: np.ndarray = field(init=False)  # doc ordinal -> lexicographic rank
    doc_rows: dict[str, np.ndarray] = field(init=False)  # doc_id -> chunk rows

    def __post_init__(self):
        n = len(self.chunk_ids)
        if self.matrix.shape != (n, self.dims):
            raise ValueError("index matrix shape mismatch")
        order = sorted(range(n), key=lambda i: self.chunk_ids[i])
        self.id_rank = np.empty(n, dtype=np.int64)
        self.id_rank[order] = np.arange(n)
        self.docs = sorted(set(self.doc_ids))
        pos = {d: i for i, d in enumerate(self.docs)}
        self.doc_ord = np.array([pos[d] for d in self.doc_ids], dtype=np.int64)
        self.doc_rank = np.arange(len(self.docs), dtype=np.int64)
        self.doc_rows = {}
        for d in self.docs:
            self.doc_rows[d] = np.nonzero(self.doc_ord == pos[d])[0]


def build_index(entries) -> ChunkIndex:
    """entries: iterable of (chunk_id, doc_id, vector-like)."""
    chunk_ids: list[str] = []
    doc_ids: list[str] = []
    rows: list[np.ndarray] = []
    for chunk_id, doc_id, vec in entries:
        values = np.asarray(getattr(vec, "values", vec), dtype=np.float64)
        chunk_ids.append(chunk_id)
        doc_ids.append(doc_id)
        rows.append(values)
    if not rows:
        raise ValueError("cannot build an empty index")
    matrix = np.vstack(rows)
    dims = matrix.shape[1]
    return ChunkIndex(chunk_ids=chunk_ids, doc_ids=doc_ids, matrix=matrix,
                      dims=dims)


def _query_values(query_vec) -> np.ndarray:
    return np.asarray(getattr(query_vec, "values", query_vec), dtype=np.float64)


def search_chunks(query_vec, index: ChunkIndex, k: int,
                  scope_doc_id: str | None = None) -> list[tuple[str, float]]:
    """Top-k chunks by cosine (dot of normalized vectors); ties by chunk_id."""
    if k < 1:
        raise PreconditionError("k must be >= 1")
    v = _query_values(query_vec)
    if v.shape != (index.dims,):
        raise PreconditionError(f"query dims {v.shape} != index dims {index.dims}")
    if scope_doc_id is not None:
        rows = index.doc_rows.get(scope_doc_id)
        if rows is None or len(rows) == 0:
            return []
        scores = index.matrix[rows] @ v
        order = np.lexsort((index.id_rank[rows], -scores))[:k]
        return [(index.chunk_ids[rows[i]], float(scores[i])) for i in order]
    scores = index.matrix @ v
    order = np.lexsort((index.id_rank, -scores))[:k]
    return [(index.chunk_ids[i], float(scores[i])) for i in order]


def maxp_aggregate(scored_chunks, doc_of) -> list[tuple[str, float]]:
    """Doc score = max of its chunk scores; rank desc, ties by ascending doc_id."""
    best: dict[str, float] = {}
    for chunk_id, score in scored_chunks:
        doc_id = doc_of[chunk_id]
        if doc_id not in best or score > best[doc_id]:
            best[doc_id] = score
    return sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass
class RunResult:
    task: str  # in_document | in_corpus
    k: int
    run_tag: str
    results: dict[str, list[tuple[str, float]]]  # query_id -> [(unit_id, score)]
    skipped: list[str] = field(default_factory=list)


def run_task(queries: list[Query], index: ChunkIndex, task: str, k: int = 10,
             query_vectors: dict[str, np.ndarray] | None = None,
             run_tag: str = "run") -> RunResult:
    """in_document: scoped chunk ranking. in_corpus: full scoring + MaxP."""
    if task not in ("in_document", "in_corpus"):
        raise PreconditionError(f"unknown task {task!r}")
    if query_vectors is None:
        raise PreconditionError("query_vectors required")
    results: dict[str, list[tuple[str, float]]] = {}
    skipped: list[str] = []
    for q in queries:
        if q.query_id not in query_vectors:
            skipped.append(q.query_id)
            continue
        v = _query_values(query_vectors[q.query_id])
        if task == "in_document":
            if not q.scope_doc_id or q.scope_doc_id not in index.doc_rows:
                skipped.append(q.query_id)
                continue
            results[q.query_id] = search_chunks(v, index, k, q.scope_doc_id)
        else:
            scores = index.matrix @ v
            doc_scores = np.full(len(index.docs), -np.inf)
            np.maximum.at(doc_scores, index.doc_ord, scores)
            order = np.lexsort((index.doc_rank, -doc_scores))[:k]
            results[q.query_id] = [(index.docs[i], float(doc_scores[i]))
                                   for i in order]
    return RunResult(task=task, k=k, run_tag=run_tag, results=results,
                     skipped=skipped)


def write_run(run: RunResult, path: str) -> None:
    """Standard 6-column run format: query_id Q0 unit_id rank score tag."""
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(run.results):
            for rank, (unit_id, score) in enumerate(run.results[qid], start=1):
                fh.write(f"{qid}\tQ0\t{unit_id}\t{rank}\t{score:.6f}\t"
                         f"{run.run_tag}\n")


def read_run(path: str) -> dict[str, list[tuple[str, float]]]:
    results: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            qid, _, unit_id, _, score, _ = line.rstrip("\n").split("\t")
            results.setdefault(qid, []).append((unit_id, float(score)))
    return results
