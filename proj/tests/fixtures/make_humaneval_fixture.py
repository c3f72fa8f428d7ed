#!/usr/bin/env python3
"""Writes the constructed human-evaluation studies and judgment logs.

A/B placement is recomputed here from the hash definitions, independently of
the C++ code, so aggregating these files checks the de-blinding end to end.
Run from this directory: python3 make_humaneval_fixture.py
"""
import json
from pathlib import Path

M = (1 << 64) - 1
SEED = 2024
ANNOTATORS = ["ann-1", "ann-2"]
CATEGORIES = ["explicit_gender", "late_binding", "winograd_coref"]
PER_CATEGORY = 50
STAMP = "2026-01-15T10:00:00Z"


def fnv1a64(s: str) -> int:
    h = 0xCBF29CE484222325
    for b in s.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & M
    return h


def mix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & M
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M
    return x ^ (x >> 31)


def a_is_baseline(item: str, annotator: str, salt: int) -> bool:
    h = fnv1a64(item) ^ mix64(fnv1a64(annotator)) ^ mix64((SEED + salt) & M)
    return mix64(h) & 1 == 1


SOURCES = {
    "explicit_gender": "She works as a {p}.",
    "late_binding": "The {p} finished the report. Later, she presented it.",
    "winograd_coref": "The {p} called the clerk because she needed the file.",
}
PROFESSIONS = ["engineer", "nurse", "teacher", "pilot", "doctor", "lawyer", "chef", "farmer", "banker", "judge"]


def items():
    out = []
    for cat in CATEGORIES:
        for i in range(PER_CATEGORY):
            n = len(out) + 1
            p = PROFESSIONS[i % len(PROFESSIONS)]
            out.append({
                "item_id": f"item-{n:03d}",
                "instance_id": f"{cat}:fixture:{i:03d}",
                "category": cat,
                "source_en": SOURCES[cat].format(p=p),
                "baseline_text": f"उसने {p} के रूप में काम किया। ({n})",
                "system_text": f"वह महिला {p} के रूप में काम करती थी। ({n})",
            })
    return out


def balanced_salt(item_ids):
    for salt in range(10000):
        ok = all(0.4 <= sum(a_is_baseline(i, a, salt) for i in item_ids) / len(item_ids) <= 0.6 for a in ANNOTATORS)
        if ok:
            return salt
    raise SystemExit("no balanced salt")


def spread(total, n):
    """n fluency ratings in 1..5 summing to total."""
    v, r = divmod(total, n)
    assert 1 <= v and (v < 5 or r == 0)
    return [v + 1] * r + [v] * (n - r)


def flags(k, n):
    return [True] * k + [False] * (n - k)


def prefs(base, system, tie):
    return ["baseline"] * base + ["system"] * system + ["tie"] * tie


# Per category: (baseline preserved, system preserved, baseline fluency sum,
# system fluency sum, baseline preferred, system preferred, ties) over 100
# pooled judgments.
PLANS = {
    "par": {
        "explicit_gender": (15, 80, 415, 406, 35, 45, 20),
        "late_binding": (6, 77, 457, 267, 60, 25, 15),
        "winograd_coref": (10, 87, 435, 337, 32, 48, 20),
    },
    "sar": {
        "explicit_gender": (15, 25, 415, 414, 25, 25, 50),
        "late_binding": (6, 12, 457, 456, 20, 25, 55),
        "winograd_coref": (10, 19, 435, 434, 25, 25, 50),
    },
}


def build(system):
    its = items()
    salt = balanced_salt([i["item_id"] for i in its])
    study = {"system": system, "seed": SEED, "salt": salt, "annotators": ANNOTATORS, "items": its}
    judgments = []
    for cat in CATEGORIES:
        rows = [(it, a) for it in its if it["category"] == cat for a in ANNOTATORS]
        n = len(rows)
        bp, sp, bf, sf, pb, ps, pt = PLANS[system][cat]
        cols = zip(flags(bp, n), flags(sp, n), spread(bf, n), spread(sf, n), prefs(pb, ps, pt))
        for (it, ann), (b_pres, s_pres, b_flu, s_flu, pref) in zip(rows, cols):
            base_a = a_is_baseline(it["item_id"], ann, salt)
            if pref == "tie":
                p = "tie"
            else:
                p = "A" if (pref == "baseline") == base_a else "B"
            judgments.append({
                "item_id": it["item_id"],
                "annotator_id": ann,
                "preserved_a": b_pres if base_a else s_pres,
                "preserved_b": s_pres if base_a else b_pres,
                "fluency_a": b_flu if base_a else s_flu,
                "fluency_b": s_flu if base_a else b_flu,
                "preference": p,
                "timestamp": STAMP,
            })
    return study, judgments


if __name__ == "__main__":
    here = Path(__file__).resolve().parent / "humaneval"
    here.mkdir(exist_ok=True)
    for system in PLANS:
        study, judgments = build(system)
        (here / f"{system}_study.json").write_text(json.dumps(study, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
        with open(here / f"{system}_judgments.jsonl", "w", encoding="utf-8", newline="\n") as f:
            for j in judgments:
                f.write(json.dumps(j, ensure_ascii=False) + "\n")
