#!/usr/bin/env python
"""Generate a small seeded synthetic dataset for pipeline demos.

BEIR-style output: corpus.jsonl, queries.jsonl, qrels.tsv. Paragraph-table
output: books.csv, qa.csv. Query tokens are sampled from the target document
so retrieval has signal; grades are 1..3.
"""

from __future__ import annotations

import argparse
import csv
import json
import os

import numpy as np

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
           "br", "dr", "gr", "kl", "pl", "st", "tr"]
_NUCLEI = ["a", "e", "i", "o", "u", "ai", "ea", "ou"]
_CODAS = ["", "n", "r", "s", "t", "l", "x", "nd", "rk", "st"]


def make_vocab(rng: np.random.Generator, size: int = 400) -> list[str]:
    seen: dict[str, None] = {}
    while len(seen) < size:
        syllables = rng.integers(1, 4)
        word = "".join(
            _ONSETS[rng.integers(len(_ONSETS))]
            + _NUCLEI[rng.integers(len(_NUCLEI))]
            + (_CODAS[rng.integers(len(_CODAS))] if s == syllables - 1 else "")
            for s in range(syllables))
        seen.setdefault(word, None)
    return list(seen)


def make_sentence(rng: np.random.Generator, vocab: list[str]) -> str:
    n = int(rng.integers(4, 13))
    words = [vocab[rng.integers(len(vocab))] for _ in range(n)]
    words[0] = words[0].capitalize()
    punct = "." if rng.random() < 0.9 else ("?" if rng.random() < 0.5 else "!")
    return " ".join(words) + punct


def make_paragraph(rng: np.random.Generator, vocab: list[str]) -> str:
    return " ".join(make_sentence(rng, vocab)
                    for _ in range(int(rng.integers(1, 7))))


def make_document(rng: np.random.Generator, vocab: list[str]) -> str:
    return "\n".join(make_paragraph(rng, vocab)
                     for _ in range(int(rng.integers(1, 6))))


def make_beir(dest: str, n_docs: int, n_queries: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    vocab = make_vocab(rng)
    os.makedirs(dest, exist_ok=True)
    docs = {f"d{i:04d}": make_document(rng, vocab) for i in range(n_docs)}
    with open(os.path.join(dest, "corpus.jsonl"), "w", encoding="utf-8") as fh:
        for doc_id, text in docs.items():
            fh.write(json.dumps({"_id": doc_id, "title": f"Document {doc_id}",
                                 "text": text}) + "\n")
    doc_ids = list(docs)
    with open(os.path.join(dest, "queries.jsonl"), "w", encoding="utf-8") as fq, \
            open(os.path.join(dest, "qrels.tsv"), "w", encoding="utf-8") as fr:
        fr.write("query-id\tcorpus-id\tscore\n")
        for i in range(n_queries):
            target = doc_ids[rng.integers(len(doc_ids))]
            words = [w for w in docs[target].replace("\n", " ").split(" ") if w]
            picks = [words[rng.integers(len(words))].strip(".?!").lower()
                     for _ in range(int(rng.integers(3, 9)))]
            qid = f"q{i:04d}"
            fq.write(json.dumps({"_id": qid, "text": " ".join(picks)}) + "\n")
            fr.write(f"{qid}\t{target}\t{int(rng.integers(1, 4))}\n")
            if rng.random() < 0.2:
                other = doc_ids[rng.integers(len(doc_ids))]
                if other != target:
                    fr.write(f"{qid}\t{other}\t1\n")


def make_gutenqa(dest: str, n_books: int, n_questions: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    vocab = make_vocab(rng)
    os.makedirs(dest, exist_ok=True)
    books = {f"Book {chr(65 + i)}": [make_paragraph(rng, vocab)
                                     for _ in range(int(rng.integers(4, 10)))]
             for i in range(n_books)}
    with open(os.path.join(dest, "books.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["book_name", "chapter_paragraph_index",
                         "paragraph_text"])
        for title, paras in books.items():
            for i, p in enumerate(paras):
                writer.writerow([title, i, p])
    titles = list(books)
    with open(os.path.join(dest, "qa.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["book_name", "question", "ground_truth_paragraph"])
        for _ in range(n_questions):
            title = titles[rng.integers(len(titles))]
            para = books[title][rng.integers(len(books[title]))]
            words = para.split(" ")
            lo = int(rng.integers(0, max(1, len(words) - 6)))
            answer = " ".join(words[lo:lo + int(rng.integers(3, 7))])
            question = "Which passage mentions " + \
                answer.strip(".?!").lower() + "?"
            writer.writerow([title, question, answer])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("dest")
    parser.add_argument("--family", choices=("beir", "gutenqa"), default="beir")
    parser.add_argument("--docs", type=int, default=40)
    parser.add_argument("--queries", type=int, default=25)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    if args.family == "beir":
        make_beir(args.dest, args.docs, args.queries, args.seed)
    else:
        make_gutenqa(args.dest, max(2, args.docs // 10), args.queries, args.seed)
    print(f"wrote {args.family} dataset to {args.dest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
