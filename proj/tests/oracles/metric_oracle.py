#!/usr/bin/env python3
"""Independent reference values for the evaluation metrics.

Writes three fixtures next to the C++ ones:
  oracle_metric_cases.json    random score/gold instances with sklearn's answers
  oracle_canned.csv           a small disaster-format dataset
  oracle_canned_answers.ndjson  scripted model answers for it
  oracle_canned_expected.json   metrics an evaluation over the two must report

The C++ side never runs this; it reads the frozen files. Re-run only when the
fixture shape changes.
"""
import csv
import json
import random
import sys
from pathlib import Path

import numpy as np
from sklearn.metrics import accuracy_score, precision_recall_fscore_support, roc_auc_score

THRESHOLD = 0.5
TAXONOMY = ["emergency", "aid_related", "weather_related", "direct_report", "food", "earthquake", "storm",
            "offer", "child_alone", "shops", "fire", "medical", "shelter", "electricity"]
WORDS = ["people", "street", "near", "water", "today", "night", "family", "roof", "bridge", "village",
         "please", "send", "north", "school", "river", "market", "house", "road", "cold", "morning"]


def metrics(labels, gold_sets, score_maps):
    y_true = np.array([[1 if l in g else 0 for l in labels] for g in gold_sets])
    y_score = np.array([[s[l] for l in labels] for s in score_maps])
    y_pred = (y_score >= THRESHOLD).astype(int)
    # Pool the (message, label) pairs by hand: with a single label column
    # sklearn sees a binary problem and its "micro" would count both classes.
    p, r, f1, _ = precision_recall_fscore_support(y_true.ravel(), y_pred.ravel(), average="binary",
                                                  pos_label=1, zero_division=0)
    auc = None
    if 0 < y_true.sum() < y_true.size:
        auc = roc_auc_score(y_true.ravel(), y_score.ravel())
    acc = accuracy_score(y_true, y_pred)
    return {"precision": float(p), "recall": float(r), "f1": float(f1), "roc_auc": auc, "accuracy": float(acc)}


def random_cases(rng, count):
    cases = []
    while len(cases) < count:
        labels = [f"l{i}" for i in range(rng.randint(1, 5))]
        items = []
        for _ in range(rng.randint(1, 25)):
            gold = sorted(l for l in labels if rng.random() < 0.4)
            # two decimals so ties actually happen
            scores = {l: round(rng.random(), 2) for l in labels}
            items.append({"gold": gold, "scores": scores})
        expected = metrics(labels, [set(i["gold"]) for i in items], [i["scores"] for i in items])
        if expected["roc_auc"] is None:
            continue
        cases.append({"labels": labels, "items": items, "expected": expected})
    return cases


def canned(rng, n, out_dir):
    rows, answers, kept_gold, kept_scores = [], [], [], []
    failed = 0
    for i in range(1, n + 1):
        text = " ".join(rng.choice(WORDS) for _ in range(rng.randint(4, 9))) + f" block {chr(97 + i % 26)}"
        text = f"{text} {WORDS[i % len(WORDS)]} {WORDS[(i * 7) % len(WORDS)]}"
        gold = {l for l in TAXONOMY if rng.random() < 0.25}
        rows.append([str(i), text, "", "direct"] + ["1" if l in gold else "0" for l in TAXONOMY])
        roll = rng.random()
        if roll < 0.05:
            failed += 1  # no answer at all: every backend fails, item excluded
            continue
        scores = {l: 0.0 for l in TAXONOMY}
        if roll < 0.15:
            answer = {"relevant": False}
        else:
            labels = []
            for l in TAXONOMY:
                if rng.random() < (0.6 if l in gold else 0.2):
                    c = round(rng.random(), 2)
                    labels.append({"key": l, "confidence": c})
                    scores[l] = c
            answer = {"relevant": True, "labels": labels, "level": "high"}
        answers.append({"message": text, "answer": answer})
        kept_gold.append(gold)
        kept_scores.append(scores)

    with open(out_dir / "oracle_canned.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "message", "original", "genre"] + TAXONOMY)
        w.writerows(rows)
    with open(out_dir / "oracle_canned_answers.ndjson", "w") as f:
        for a in answers:
            f.write(json.dumps(a, sort_keys=True) + "\n")
    expected = metrics(TAXONOMY, kept_gold, kept_scores)
    expected.update({"n_samples": len(kept_gold), "n_failed": failed})
    with open(out_dir / "oracle_canned_expected.json", "w") as f:
        json.dump(expected, f, indent=1, sort_keys=True)
        f.write("\n")


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[2] / "fixtures"
    rng = random.Random(20240211)
    with open(out_dir / "oracle_metric_cases.json", "w") as f:
        json.dump(random_cases(rng, 1000), f, separators=(",", ":"))
        f.write("\n")
    canned(rng, 300, out_dir)


if __name__ == "__main__":
    main()
