#!/usr/bin/env python3
"""Regenerate tests/fixtures/e2e_expected.json.

Builds the fixture dataset and checkpoint with the calseq binary, then
reranks and scores every (schedule, lambda) cell with an independent numpy
implementation: full miscalibration recomputation at every greedy step,
no incremental state.

    python3 tools/oracle/e2e_oracle.py --calseq build/tools/calseq
"""

import argparse
import hashlib
import json
import math
import pathlib
import subprocess
import tempfile

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parents[2]
FIXTURES = ROOT / "tests" / "fixtures"
ALPHA = 0.9
BETA = 0.01


def run(*args):
    subprocess.run([str(a) for a in args], check=True, stdout=subprocess.DEVNULL)


def load_catalog(path):
    names, cats, cat_index = [], [], {}
    for line in path.read_text().splitlines():
        item, labels = line.split("\t")
        row = []
        for label in labels.split(","):
            row.append(cat_index.setdefault(label, len(cat_index)))
        names.append(item)
        cats.append(sorted(set(row)))
    dist = np.zeros((len(names), len(cat_index)))
    for i, row in enumerate(cats):
        dist[i, row] = 1.0 / len(row)
    return {n: i for i, n in enumerate(names)}, dist


def load_sequences(path, item_index):
    rows = {}
    order = []
    for n, line in enumerate(path.read_text().splitlines()):
        user, item, ts = line.split("\t")
        if user not in rows:
            rows[user] = []
            order.append(user)
        rows[user].append((int(ts), n, item_index[item]))
    return [[item for _, _, item in sorted(rows[u])] for u in order]


def history(prefix, dist):
    t = len(prefix)
    w = np.array([ALPHA ** (t - 1 - k) for k in range(t)])
    return (w[:, None] * dist[prefix]).sum(axis=0) / w.sum()


def skl(target, q):
    # Rows of q are candidate list distributions.
    smoothed = (1 - BETA) * q + BETA * target
    mask = target > 0
    return (target[mask] * np.log(target[mask] / smoothed[:, mask])).sum(axis=1)


def weight(lam, k, schedule):
    if lam <= 0:
        return 0.0
    if lam >= 1:
        return 1.0
    return lam ** (1.0 / k) if schedule == "prioritized" else lam


def rerank(scores, prefix, dist, lam, schedule, k_max):
    excluded = set(prefix)
    pool = np.array([i for i in range(len(scores)) if i not in excluded])
    target = history(prefix, dist)
    chosen = []
    for k in range(1, min(k_max, len(pool)) + 1):
        w = weight(lam, k, schedule)
        s = scores[pool]
        if w == 0.0:
            obj = s
        else:
            base = dist[chosen].sum(axis=0) if chosen else np.zeros(dist.shape[1])
            before = skl(target, (base / len(chosen))[None, :])[0] if chosen else 0.0
            after = skl(target, (base[None, :] + dist[pool]) / (len(chosen) + 1))
            obj = (1 - w) * s - w * (after - before)
        # max objective, then max score, then min id
        best = np.lexsort((pool, -s, -obj))[0]
        chosen.append(int(pool[best]))
        pool = np.delete(pool, best)
    return chosen, target


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--calseq", required=True)
    ap.add_argument("--fixture", default=FIXTURES / "e2e_fixture.json")
    ap.add_argument("--out", default=FIXTURES / "e2e_expected.json")
    args = ap.parse_args()
    fixture = json.loads(pathlib.Path(args.fixture).read_text())

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        run(args.calseq, "synth", "--config", args.fixture, "--out", tmp / "raw")
        run(args.calseq, "prepare", "--interactions", tmp / "raw" / "interactions.tsv",
            "--catalog", tmp / "raw" / "catalog.tsv", "--out", tmp / "data")
        run(args.calseq, "train", "--config", args.fixture, "--data", tmp / "data",
            "--checkpoint", tmp / "model.json")
        ckpt_text = (tmp / "model.json").read_bytes()
        item_index, dist = load_catalog(tmp / "data" / "catalog.tsv")
        seqs = load_sequences(tmp / "data" / "interactions.tsv", item_index)

    ckpt = json.loads(ckpt_text)
    emb = np.array(ckpt["item_embeddings"])
    bias = np.array(ckpt["item_bias"])
    rho, max_len = ckpt["rho"], ckpt["max_seq_len"]

    users = []
    for seq in seqs:
        if len(seq) >= 3:
            prefix = seq[:-1]
            window = prefix[-max_len:]
            t = len(window)
            w = np.array([rho ** (t - 1 - k) for k in range(t)])
            h = (w[:, None] * emb[window]).sum(axis=0) / w.sum()
            users.append((prefix, seq[-1], emb @ h + bias))

    k_max = fixture["k"]
    cells = []
    for schedule in fixture["schedules"]:
        for lam in fixture["lambdas"]:
            hits = ndcg = total_skl = 0.0
            for prefix, truth, scores in users:
                items, target = rerank(scores, prefix, dist, lam, schedule, k_max)
                if truth in items:
                    hits += 1
                    ndcg += 1.0 / math.log2(items.index(truth) + 2)
                total_skl += skl(target, (dist[items].sum(axis=0) / len(items))[None, :])[0]
            n = len(users)
            cells.append({"schedule": schedule, "lambda": lam, "hr": hits / n, "ndcg": ndcg / n,
                          "mean_skl": total_skl / n, "users": n})
            print(f"{schedule:12s} {lam:.1f} hr={hits / n:.4f} ndcg={ndcg / n:.4f} skl={total_skl / n:.4f}")

    out = {"checkpoint_sha256": hashlib.sha256(ckpt_text).hexdigest(), "cells": cells}
    pathlib.Path(args.out).write_text(json.dumps(out, indent=2) + "\n")


if __name__ == "__main__":
    main()
