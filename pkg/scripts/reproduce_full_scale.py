#!/usr/bin/env python
"""Full-scale reproduction driver (needs real data and a live sidecar).

Requires:
  CHUNKBENCH_DATA_DIR   directory with <dataset>/corpus.jsonl, queries.jsonl,
                        qrels.tsv in the standard layout
  CHUNKBENCH_SIDECAR_URL  running embedding sidecar

Runs the method x ordering grid with the remote backend and, for
nfcorpus + a jina v2 model, checks the published fixed-size bands:
pre 0.226 +/- 0.02, contextualized 0.304 +/- 0.02 (nDCG@10).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import yaml

from chunkbench.cli import main as chunkbench_main

BANDS = {("nfcorpus", "fixed", "pre"): (0.226, 0.02),
         ("nfcorpus", "fixed", "contextualized"): (0.304, 0.02)}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset", default="nfcorpus")
    parser.add_argument("--model", default="jinaai/jina-embeddings-v2-small-en")
    parser.add_argument("--out", default="runs/full_scale")
    parser.add_argument("--window", type=int, default=8192)
    parser.add_argument("--k", type=int, default=10)
    args = parser.parse_args()

    data_dir = os.environ.get("CHUNKBENCH_DATA_DIR")
    sidecar = os.environ.get("CHUNKBENCH_SIDECAR_URL")
    if not data_dir or not sidecar:
        print("set CHUNKBENCH_DATA_DIR and CHUNKBENCH_SIDECAR_URL first",
              file=sys.stderr)
        return 2

    root = os.path.join(data_dir, args.dataset)
    config = {
        "dataset": {"name": args.dataset, "family": "beir",
                    "corpus": os.path.join(root, "corpus.jsonl"),
                    "queries": os.path.join(root, "queries.jsonl"),
                    "qrels": os.path.join(root, "qrels.tsv")},
        "embedder": {"backend": "remote", "model": args.model,
                     "context_window_tokens": args.window,
                     "endpoint": sidecar},
        "chunker": {"scheme": "remote"},
        "llm": {"mode": "stub"},
        "task": "in_corpus",
        "k": args.k,
        "out": args.out,
        "grid": {"methods": ["paragraph", "fixed", "sentence", "semantic"],
                 "orderings": ["pre", "contextualized"]},
    }
    os.makedirs(args.out, exist_ok=True)
    config_path = os.path.join(args.out, "config.yaml")
    with open(config_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config, fh)
    code = chunkbench_main(["matrix", "--config", config_path])
    if code != 0:
        return code

    failed = 0
    report_dir = os.path.join(args.out, "reports")
    for (dataset, method, ordering), (mid, tol) in BANDS.items():
        if dataset != args.dataset or "jina" not in args.model:
            continue
        hits = [f for f in os.listdir(report_dir)
                if f.startswith(f"{dataset}.{method}.{ordering}.")
                and f.endswith(".report.json")]
        if not hits:
            print(f"band {dataset}/{method}/{ordering}: no report found")
            failed += 1
            continue
        with open(os.path.join(report_dir, hits[0]), encoding="utf-8") as fh:
            agg = json.load(fh)["aggregate"]
        ok = abs(agg - mid) <= tol
        print(f"band {dataset}/{method}/{ordering}: {agg:.4f} vs "
              f"{mid} +/- {tol} -> {'ok' if ok else 'OUT OF BAND'}")
        failed += 0 if ok else 1
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
