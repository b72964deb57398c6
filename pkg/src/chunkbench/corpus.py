"""Dataset ingestion and the persisted collection store.

Two source layouts are supported: JSONL corpora with TSV relevance judgments
(corpus-level retrieval), and delimited paragraph/question tables where one
document is a book and relevance is a byte span inside it (in-document
retrieval). Both normalize text up front and persist to a line-delimited
store with a manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field

from .errors import IngestError
from .textutil import ByteText, collapse_whitespace, decode_utf8, normalize_text

log = logging.getLogger(__name__)

# query_id -> doc_id -> integer grade
Qrels = dict[str, dict[str, int]]

ENTITY_FILES = ("documents.jsonl", "queries.jsonl", "qrels.jsonl", "gt_spans.jsonl")


@dataclass
class Document:
    doc_id: str
    title: str
    text: str  # normalized
    meta: dict[str, str] = field(default_factory=dict)


@dataclass
class Query:
    query_id: str
    text: str
    scope_doc_id: str | None = None  # set for in-document tasks
    unevaluable: bool = False  # ground truth could not be located


@dataclass
class GroundTruthSpan:
    query_id: str
    doc_id: str
    start: int  # byte offsets into the document text
    end: int
    source_paragraph_index: int | None = None


@dataclass
class Collection:
    name: str
    documents: dict[str, Document]
    queries: dict[str, Query]
    qrels: Qrels
    gt_spans: dict[str, list[GroundTruthSpan]]
    counts: dict[str, int] = field(default_factory=dict)


# The in-memory handle returned by the ingest operations.
CollectionHandle = Collection


def _read_jsonl(path: str):
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            line = decode_utf8(raw, f"{path}:{lineno}")
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from exc
            if not isinstance(rec, dict):
                raise IngestError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, rec


def ingest_beir(corpus_path: str, queries_path: str, qrels_path: str,
                name: str = "beir") -> Collection:
    """Build a corpus-level collection from JSONL corpus/queries + TSV qrels."""
    documents: dict[str, Document] = {}
    counts = {"documents": 0, "queries": 0, "qrels": 0,
              "empty_documents_dropped": 0, "qrels_unknown_id_skipped": 0}

    for lineno, rec in _read_jsonl(corpus_path):
        if "_id" not in rec and "id" not in rec:
            raise IngestError(f"{corpus_path}:{lineno}: missing _id field")
        doc_id = str(rec.get("_id", rec.get("id")))
        text = normalize_text(str(rec.get("text", "")))
        if not text.strip():
            counts["empty_documents_dropped"] += 1
            continue
        if doc_id in documents:
            raise IngestError(f"{corpus_path}:{lineno}: duplicate doc id {doc_id!r}")
        documents[doc_id] = Document(doc_id=doc_id,
                                     title=normalize_text(str(rec.get("title", ""))),
                                     text=text)
    counts["documents"] = len(documents)

    queries: dict[str, Query] = {}
    for lineno, rec in _read_jsonl(queries_path):
        if "_id" not in rec and "id" not in rec:
            raise IngestError(f"{queries_path}:{lineno}: missing _id field")
        qid = str(rec.get("_id", rec.get("id")))
        if qid in queries:
            raise IngestError(f"{queries_path}:{lineno}: duplicate query id {qid!r}")
        queries[qid] = Query(query_id=qid, text=normalize_text(str(rec.get("text", ""))))
    counts["queries"] = len(queries)

    qrels = _read_qrels(qrels_path, documents, queries, counts)
    counts["qrels"] = sum(len(v) for v in qrels.values())
    return Collection(name=name, documents=documents, queries=queries,
                      qrels=qrels, gt_spans={}, counts=counts)


def _read_qrels(path: str, documents: dict, queries: dict, counts: dict) -> Qrels:
    """TSV with (query-id, corpus-id, score) or (query-id, iter, corpus-id, score)."""
    qrels: Qrels = {}
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = decode_utf8(raw, f"{path}:{lineno}").rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) == 3:
                qid, doc_id, score = cols
            elif len(cols) == 4:
                qid, _, doc_id, score = cols
            else:
                raise IngestError(f"{path}:{lineno}: expected 3 or 4 tab-separated "
                                  f"columns, got {len(cols)}")
            try:
                grade = int(score)
            except ValueError:
                if lineno == 1:
                    continue  # optional header row
                raise IngestError(f"{path}:{lineno}: non-integer grade {score!r}")
            if grade < 0:
                raise IngestError(f"{path}:{lineno}: negative grade {grade}")
            if qid not in queries or doc_id not in documents:
                log.warning("%s:%d: qrels row references unknown id (%s, %s); skipped",
                            path, lineno, qid, doc_id)
                counts["qrels_unknown_id_skipped"] += 1
                continue
            qrels.setdefault(qid, {})[doc_id] = grade
    return qrels


def ingest_gutenqa(books_path: str, qa_path: str, name: str = "books",
                   delimiter: str = ",",
                   book_col: str = "book_name",
                   index_col: str = "chapter_paragraph_index",
                   para_col: str = "paragraph_text",
                   question_col: str = "question",
                   qa_book_col: str = "book_name",
                   answer_col: str = "ground_truth_paragraph") -> Collection:
    """Build an in-document collection from paragraph + QA tables.

    One Document per book: its paragraphs joined with a single newline, so
    paragraph boundaries stay recoverable. Each question gets a ground-truth
    byte span located by substring match (exact first occurrence, then a
    whitespace-collapsed retry); unlocatable spans mark the query unevaluable.
    """
    paragraphs: dict[str, list[str]] = {}
    counts = {"documents": 0, "queries": 0, "gt_spans": 0,
              "queries_unevaluable": 0, "qa_unknown_book_skipped": 0,
              "gt_whitespace_fallback": 0}

    for lineno, row in _read_table(books_path, delimiter, (book_col, para_col)):
        book = row[book_col]
        paragraphs.setdefault(book, []).append(normalize_text(row[para_col]))

    documents: dict[str, Document] = {}
    for book, paras in paragraphs.items():
        text = "\n".join(paras)
        if not text.strip():
            continue
        documents[book] = Document(doc_id=book, title=book, text=text,
                                   meta={"paragraphs": str(len(paras))})
    counts["documents"] = len(documents)

    queries: dict[str, Query] = {}
    gt_spans: dict[str, list[GroundTruthSpan]] = {}
    qnum = 0
    for lineno, row in _read_table(qa_path, delimiter,
                                   (question_col, qa_book_col, answer_col)):
        book = row[qa_book_col]
        if book not in documents:
            log.warning("%s:%d: QA row references unknown book %r; skipped",
                        qa_path, lineno, book)
            counts["qa_unknown_book_skipped"] += 1
            continue
        qnum += 1
        qid = f"q{qnum:04d}"
        query = Query(query_id=qid, text=normalize_text(row[question_col]),
                      scope_doc_id=book)
        span = locate_ground_truth(documents[book], normalize_text(row[answer_col]),
                                   qid, counts)
        if span is None:
            query.unevaluable = True
            counts["queries_unevaluable"] += 1
        else:
            gt_spans[qid] = [span]
            counts["gt_spans"] += 1
        queries[qid] = query
    counts["queries"] = len(queries)
    return Collection(name=name, documents=documents, queries=queries,
                      qrels={}, gt_spans=gt_spans, counts=counts)


def _read_table(path: str, delimiter: str, required: tuple[str, ...]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty table")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise IngestError(f"{path}: missing column(s) {missing}; "
                              f"found {reader.fieldnames}")
        for row in reader:
            lineno = reader.line_num
            if any(row.get(c) is None for c in required):
                raise IngestError(f"{path}:{lineno}: short row")
            yield lineno, row


def locate_ground_truth(doc: Document, gt_text: str, query_id: str,
                        counts: dict | None = None) -> GroundTruthSpan | None:
    """Resolve a ground-truth paragraph to a byte span inside the document.

    Exact first-occurrence substring match, then a whitespace-collapsed retry;
    None when neither locates it.
    """
    gt = gt_text.strip()
    if not gt:
        return None
    bt = ByteText(doc.text)
    cp_start = doc.text.find(gt)
    if cp_start >= 0:
        cp_end = cp_start + len(gt)
    else:
        coll_doc, idx = collapse_whitespace(doc.text)
        coll_gt, _ = collapse_whitespace(gt)
        if not coll_gt:
            return None
        pos = coll_doc.find(coll_gt)
        if pos < 0:
            return None
        cp_start = idx[pos]
        cp_end = idx[pos + len(coll_gt) - 1] + 1
        if counts is not None:
            counts["gt_whitespace_fallback"] += 1
    start, end = bt.to_byte(cp_start), bt.to_byte(cp_end)
    return GroundTruthSpan(query_id=query_id, doc_id=doc.doc_id, start=start,
                           end=end,
                           source_paragraph_index=_paragraph_ordinal(doc.text, cp_start))


def _paragraph_ordinal(text: str, cp: int) -> int:
    return text.count("\n", 0, cp)


def _dump(rec: dict) -> str:
    return json.dumps(rec, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def save_collection(col: Collection, dest: str) -> str:
    """Persist to a directory of line-delimited entity files plus a manifest."""
    os.makedirs(dest, exist_ok=True)
    with open(os.path.join(dest, "documents.jsonl"), "w", encoding="utf-8") as fh:
        for doc in col.documents.values():
            fh.write(_dump(asdict(doc)) + "\n")
    with open(os.path.join(dest, "queries.jsonl"), "w", encoding="utf-8") as fh:
        for q in col.queries.values():
            fh.write(_dump(asdict(q)) + "\n")
    with open(os.path.join(dest, "qrels.jsonl"), "w", encoding="utf-8") as fh:
        for qid, docs in col.qrels.items():
            for doc_id, grade in docs.items():
                fh.write(_dump({"query_id": qid, "doc_id": doc_id, "grade": grade}) + "\n")
    with open(os.path.join(dest, "gt_spans.jsonl"), "w", encoding="utf-8") as fh:
        for spans in col.gt_spans.values():
            for s in spans:
                fh.write(_dump(asdict(s)) + "\n")
    digest = hashlib.sha256()
    for fname in ENTITY_FILES:
        with open(os.path.join(dest, fname), "rb") as fh:
            digest.update(fh.read())
    manifest = {"name": col.name, "counts": col.counts,
                "content_hash": digest.hexdigest()}
    with open(os.path.join(dest, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")
    return manifest["content_hash"]


def load_collection(src: str) -> Collection:
    with open(os.path.join(src, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    documents: dict[str, Document] = {}
    for _, rec in _read_jsonl(os.path.join(src, "documents.jsonl")):
        documents[rec["doc_id"]] = Document(**rec)
    queries: dict[str, Query] = {}
    for _, rec in _read_jsonl(os.path.join(src, "queries.jsonl")):
        queries[rec["query_id"]] = Query(**rec)
    qrels: Qrels = {}
    for _, rec in _read_jsonl(os.path.join(src, "qrels.jsonl")):
        qrels.setdefault(rec["query_id"], {})[rec["doc_id"]] = rec["grade"]
    gt_spans: dict[str, list[GroundTruthSpan]] = {}
    for _, rec in _read_jsonl(os.path.join(src, "gt_spans.jsonl")):
        gt_spans.setdefault(rec["query_id"], []).append(GroundTruthSpan(**rec))
    return Collection(name=manifest["name"], documents=documents, queries=queries,
                      qrels=qrels, gt_spans=gt_spans, counts=manifest["counts"])
