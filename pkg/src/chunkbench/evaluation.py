"""Metrics (DCG@10 / nDCG@10, overlap relevance), significance tests, and the
chunk-size correlation analysis, plus the report writers.

p-values come from the Student-t CDF expressed through the regularized
incomplete beta function.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .corpus import GroundTruthSpan, Qrels
from .errors import PreconditionError
from .segmentation import Chunk
from .tokenizer import TokenizerScheme, count_tokens

BUILTIN_SCHEME = TokenizerScheme()


# --- rank metrics ---------------------------------------------------------------

def dcg_at_k(rels, k: int = 10) -> float:
    """Sum_{i=1..min(k,len)} (2^rel_i - 1) / log2(i + 1)."""
    total = 0.0
    for i, rel in enumerate(rels[:k], start=1):
        if rel < 0:
            raise PreconditionError("relevance grades must be >= 0")
        total += (2.0 ** rel - 1.0) / math.log2(i + 1)
    return total


def ndcg_at_k(rels_ranked, all_rels_for_query, k: int = 10) -> float | None:
    """DCG over ideal DCG; None signals a zero-relevance query (skip + count)."""
    ideal = dcg_at_k(sorted(all_rels_for_query, reverse=True), k)
    if ideal == 0.0:
        return None
    return dcg_at_k(rels_ranked, k) / ideal


def overlap_relevance(chunk_span: tuple[int, int],
                      gt_spans: list[tuple[int, int]]) -> int:
    """1 iff the half-open chunk span intersects any ground-truth span."""
    cs, ce = chunk_span
    for gs, ge in gt_spans:
        if cs < ge and gs < ce:
            return 1
    return 0


# --- significance ----------------------------------------------------------------

@dataclass
class SignificanceResult:
    t_statistic: float
    p_value: float
    n: int
    mean_diff: float
    degenerate: bool = False


def _t_sf_two_sided(t: float, df: int) -> float:
    """Two-sided p for Student-t: I_{df/(df+t^2)}(df/2, 1/2)."""
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def paired_t_test(a, b) -> SignificanceResult:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise PreconditionError("paired samples must be aligned 1-d sequences")
    n = len(a)
    if n < 2:
        raise PreconditionError("paired t-test needs n >= 2")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return SignificanceResult(t_statistic=0.0, p_value=1.0, n=n,
                                      mean_diff=0.0)
        return SignificanceResult(t_statistic=math.copysign(math.inf, mean),
                                  p_value=0.0, n=n, mean_diff=mean,
                                  degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return SignificanceResult(t_statistic=t, p_value=_t_sf_two_sided(t, n - 1),
                              n=n, mean_diff=mean)


def pearson_r(x, y) -> tuple[float, float]:
    """Sample Pearson r with two-sided p via the t-transform (n-2 dof).

    Raises PreconditionError when either variable has zero variance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise PreconditionError("x and y must be aligned 1-d sequences")
    n = len(x)
    if n < 3:
        raise PreconditionError("pearson_r needs n >= 3")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(np.dot(xc, xc)))
    sy = float(np.sqrt(np.dot(yc, yc)))
    if sx == 0.0 or sy == 0.0:
        raise PreconditionError("zero variance: correlation undefined")
    r = float(np.dot(xc, yc) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, _t_sf_two_sided(t, n - 2)


# --- reports ---------------------------------------------------------------------

@dataclass
class EvalReport:
    metric_name: str
    run_tag: str
    per_query: dict[str, float]
    n_skipped: int

    @property
    def n_evaluated(self) -> int:
        return len(self.per_query)

    @property
    def aggregate(self) -> float:
        if not self.per_query:
            return 0.0
        return float(np.mean(list(self.per_query.values())))


def evaluate_in_corpus(run_results: dict[str, list[tuple[str, float]]],
                       qrels: Qrels, k: int = 10, run_tag: str = "run",
                       n_preskipped: int = 0) -> EvalReport:
    """nDCG@k against graded qrels; zero-relevance queries skipped and counted."""
    per_query: dict[str, float] = {}
    skipped = n_preskipped
    for qid, ranked in run_results.items():
        grades = qrels.get(qid, {})
        rels = [grades.get(doc_id, 0) for doc_id, _ in ranked]
        value = ndcg_at_k(rels, list(grades.values()), k)
        if value is None:
            skipped += 1
            continue
        per_query[qid] = value
    return EvalReport(metric_name=f"nDCG@{k}", run_tag=run_tag,
                      per_query=per_query, n_skipped=skipped)


def evaluate_in_document(run_results: dict[str, list[tuple[str, float]]],
                         gt_spans: dict[str, list[GroundTruthSpan]],
                         chunks: list[Chunk], k: int = 10, run_tag: str = "run",
                         n_preskipped: int = 0) -> EvalReport:
    """DCG@k with binary overlap relevance; unevaluable queries skipped."""
    span_of = {c.chunk_id: (c.doc_id, c.start, c.end) for c in chunks}
    per_query: dict[str, float] = {}
    skipped = n_preskipped
    for qid, ranked in run_results.items():
        spans = gt_spans.get(qid)
        if not spans:
            skipped += 1
            continue
        rels = []
        for unit_id, _ in ranked:
            doc_id, start, end = span_of[unit_id]
            rels.append(overlap_relevance(
                (start, end),
                [(s.start, s.end) for s in spans if s.doc_id == doc_id]))
        per_query[qid] = dcg_at_k(rels, k)
    return EvalReport(metric_name=f"DCG@{k}", run_tag=run_tag,
                      per_query=per_query, n_skipped=skipped)


# --- chunk-size correlation --------------------------------------------------------

@dataclass
class CorrelationReport:
    r: float | None
    p: float | None
    n: int
    n_excluded: int
    undefined: bool
    pairs: list[tuple[str, float, float]] = field(default_factory=list)


def chunk_size_correlation(per_query: dict[str, float], chunks: list[Chunk],
                           task: str, qrels: Qrels | None = None,
                           gt_spans: dict[str, list[GroundTruthSpan]] | None = None,
                           scheme: TokenizerScheme = BUILTIN_SCHEME) -> CorrelationReport:
    """x = mean token count of the query's relevant unit's chunks; y = metric.

    in_corpus: chunks of the relevant document(s). in_document: chunks
    overlapping the ground-truth span. Queries with no resolvable relevant
    unit are excluded and counted.
    """
    sizes = {c.chunk_id: count_tokens(c.text, scheme) for c in chunks}
    by_doc: dict[str, list[str]] = {}
    for c in chunks:
        by_doc.setdefault(c.doc_id, []).append(c.chunk_id)

    pairs: list[tuple[str, float, float]] = []
    excluded = 0
    for qid in sorted(per_query):
        xs: list[int] = []
        if task == "in_corpus":
            rel_docs = [d for d, g in (qrels or {}).get(qid, {}).items() if g > 0]
            for d in rel_docs:
                xs.extend(sizes[cid] for cid in by_doc.get(d, ()))
        else:
            spans = (gt_spans or {}).get(qid, [])
            for c in chunks:
                hit = overlap_relevance(
                    (c.start, c.end),
                    [(s.start, s.end) for s in spans if s.doc_id == c.doc_id])
                if hit:
                    xs.append(sizes[c.chunk_id])
        if not xs:
            excluded += 1
            continue
        pairs.append((qid, float(np.mean(xs)), per_query[qid]))

    if len(pairs) < 3:
        return CorrelationReport(r=None, p=None, n=len(pairs),
                                 n_excluded=excluded, undefined=True, pairs=pairs)
    try:
        r, p = pearson_r([x for _, x, _ in pairs], [y for _, _, y in pairs])
    except PreconditionError:
        return CorrelationReport(r=None, p=None, n=len(pairs),
                                 n_excluded=excluded, undefined=True, pairs=pairs)
    return CorrelationReport(r=r, p=p, n=len(pairs), n_excluded=excluded,
                             undefined=False, pairs=pairs)


# --- relative change ----------------------------------------------------------------

@dataclass
class RelativeChange:
    pct: float | None
    undefined: bool
    significance: SignificanceResult | None


def relative_change(report_a: EvalReport, report_b: EvalReport) -> RelativeChange:
    """100 * (b - a) / a on aggregates, with paired-t significance per query."""
    if report_a.aggregate == 0.0:
        return RelativeChange(pct=None, undefined=True, significance=None)
    pct = 100.0 * (report_b.aggregate - report_a.aggregate) / report_a.aggregate
    shared = sorted(set(report_a.per_query) & set(report_b.per_query))
    sig = None
    if len(shared) >= 2:
        sig = paired_t_test([report_b.per_query[q] for q in shared],
                            [report_a.per_query[q] for q in shared])
    return RelativeChange(pct=pct, undefined=False, significance=sig)


# --- writers -------------------------------------------------------------------------

def write_report(report: EvalReport, path: str) -> None:
    payload = {
        "metric_name": report.metric_name,
        "run_tag": report.run_tag,
        "aggregate": report.aggregate,
        "n_evaluated": report.n_evaluated,
        "n_skipped": report.n_skipped,
        "per_query": {q: report.per_query[q] for q in sorted(report.per_query)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


def read_report(path: str) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return EvalReport(metric_name=payload["metric_name"],
                      run_tag=payload["run_tag"],
                      per_query=payload["per_query"],
                      n_skipped=payload["n_skipped"])


def write_per_query_records(report: EvalReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(report.per_query):
            fh.write(json.dumps({"query_id": qid, "metric": report.metric_name,
                                 "value": report.per_query[qid],
                                 "run_tag": report.run_tag},
                                ensure_ascii=False, sort_keys=True,
                                separators=(",", ":")) + "\n")


def write_pairs(pairs: list[tuple[str, float, float]], path: str) -> None:
    """Plot-ready (x, y) rows for scatter analysis."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("query_id\tx\ty\n")
        for qid, x, y in pairs:
            fh.write(f"{qid}\t{x:.6f}\t{y:.6f}\n")
