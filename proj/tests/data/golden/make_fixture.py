#!/usr/bin/env python3
"""Regenerates the golden end-to-end fixture from the ASCII art below.

Run from anywhere: python3 make_fixture.py
Expected outputs assume `doicd detect --dilate-iters 1` with default thresholds.
"""
import json
import shutil
from pathlib import Path

import numpy as np
from PIL import Image

HERE = Path(__file__).resolve().parent
W, H = 16, 12


def art(rows, value=255):
    assert len(rows) == H and all(len(r) == W for r in rows), rows
    m = np.zeros((H, W), np.uint8)
    for y, row in enumerate(rows):
        for x, c in enumerate(row):
            if c == "#":
                m[y, x] = value
            elif c == "+":
                m[y, x] = 127
    return m


def rect(x, y, w, h):
    m = np.zeros((H, W), np.uint8)
    m[y:y + h, x:x + w] = 255
    return m


def save_png(arr, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


EMPTY = np.zeros((H, W), np.uint8)

CHANGE_A = art([
    "................",
    "................",
    "..........+.....",
    "................",
    "....###.........",
    "....###.........",
    "................",
    "................",
    "................",
    "................",
    "................",
    "................",
])
PEN = rect(4, 4, 4, 3)

CHANGE_B = rect(8, 6, 3, 3)

CHANGE_C = art([
    "................",
    ".##.............",
    ".##.............",
    "................",
    "................",
    "................",
    "................",
    "................",
    "............##..",
    "............##..",
    "................",
    "................",
])
WALLET_LIVE = rect(1, 1, 3, 3)
WALLET_REF = rect(3, 3, 2, 2)

THRESHOLDS = {"lower": 0.0, "upper": 0.9}


def record(pair, doi, labels, components, dataset="golden"):
    return {
        "pair_id": pair,
        "dataset_id": dataset,
        "ovs": True,
        "masks": {"base": "base.png", "ovs_live": "ovs_live.png", "ovs_ref": "ovs_ref.png", "fused": "fused.png"},
        "doi": doi,
        "labels": labels,
        "components": components,
    }


def comp(index, label, pixels, bbox):
    return {"index": index, "label": label, "pixels": pixels, "bbox": bbox}


def main():
    inputs = HERE / "inputs"
    expected = HERE / "expected"
    for d in (inputs, expected):
        shutil.rmtree(d, ignore_errors=True)

    rng = np.random.default_rng(7)
    pairs = []
    for pair in ("pairA", "pairB", "pairC"):
        ref = rng.integers(0, 256, (H, W, 3), dtype=np.uint8)
        live = ref.copy()
        live[4:8, 4:8] = 255 - live[4:8, 4:8]
        save_png(ref, inputs / "img" / f"{pair}_ref.png")
        save_png(live, inputs / "img" / f"{pair}_live.png")
        pairs.append({"pair_id": pair, "ref_path": f"img/{pair}_ref.png", "live_path": f"img/{pair}_live.png",
                      "dataset_id": "golden"})
    (inputs / "pairs.jsonl").write_text("".join(json.dumps(p) + "\n" for p in pairs))

    fx = inputs / "fixtures"
    entries = []

    def change(pair, arr):
        save_png(arr, fx / pair / "change.png")
        entries.append({"pair_id": pair, "endpoint": "change", "file": f"{pair}/change.png"})

    def describe(pair, idx, text):
        p = fx / pair / "describe" / f"{idx}.txt"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        entries.append({"pair_id": pair, "endpoint": "describe", "region_index": idx,
                        "file": f"{pair}/describe/{idx}.txt"})

    def segment(pair, role, label, arr):
        rel = f"{pair}/segment/{role}/{label}/0.png"
        save_png(arr, fx / rel)
        entries.append({"pair_id": pair, "endpoint": "segment", "image": role, "label": label, "k": 0,
                        "file": rel})

    change("pairA", CHANGE_A)
    describe("pairA", 0, "This object is a pen.")
    segment("pairA", "live", "pen", PEN)

    change("pairB", CHANGE_B)
    describe("pairB", 0, "This object is the floor.")

    change("pairC", CHANGE_C)
    describe("pairC", 0, "This object is a wallet.")
    describe("pairC", 1, "This object is a wallet.")
    segment("pairC", "live", "wallet", WALLET_LIVE)
    segment("pairC", "ref", "wallet", WALLET_REF)

    (fx / "index.json").write_text(json.dumps({"version": 1, "entries": entries}, indent=2) + "\n")

    base_a = (CHANGE_A == 255).astype(np.uint8) * 255
    outputs = {
        "pairA": {
            "masks": {"base": base_a, "ovs_live": PEN, "ovs_ref": EMPTY, "fused": PEN},
            "record": record("pairA", {"f_b": 1, "iou_ol_mo": 0.5, "doi": 0.5, "decision": "AdoptOvs",
                                       "thresholds": THRESHOLDS},
                             ["pen"], [comp(0, "pen", 6, [4, 4, 3, 2])]),
        },
        "pairB": {
            "masks": {"base": CHANGE_B, "ovs_live": EMPTY, "ovs_ref": EMPTY, "fused": CHANGE_B},
            "record": record("pairB", {"f_b": 1, "iou_ol_mo": 0.0, "doi": 1.0, "decision": "AdoptBase",
                                       "thresholds": THRESHOLDS},
                             [], [comp(0, None, 9, [8, 6, 3, 3])]),
        },
        "pairC": {
            "masks": {"base": CHANGE_C, "ovs_live": WALLET_LIVE, "ovs_ref": WALLET_REF, "fused": CHANGE_C},
            "record": record("pairC", {"f_b": 0, "iou_ol_mo": 4 / 13, "doi": 0.0, "decision": "AdoptBase",
                                       "thresholds": THRESHOLDS},
                             ["wallet"], [comp(0, "wallet", 4, [1, 1, 2, 2]), comp(1, "wallet", 4, [12, 8, 2, 2])]),
        },
    }
    for pair, out in outputs.items():
        for name, arr in out["masks"].items():
            save_png(arr, expected / pair / f"{name}.png")
        (expected / pair / "record.json").write_text(json.dumps(out["record"], indent=2) + "\n")

    (expected / "run_index.jsonl").write_text(
        "".join(json.dumps({"pair_id": p, "record": f"{p}/record.json"}, separators=(",", ":")) + "\n"
                for p in outputs))
    (expected / "listing.tsv").write_text(
        "pair_id\tcomponent\tlabel\tpixels\tbbox\n"
        "pairA\t0\tpen\t6\t4,4,3,2\n"
        "pairC\t0\twallet\t4\t1,1,2,2\n"
        "pairC\t1\twallet\t4\t12,8,2,2\n")
    (expected / "stdout.txt").write_text("pairA\tAdoptOvs\tdoi=0.5\npairB\tAdoptBase\tdoi=1\npairC\tAdoptBase\tdoi=0\n")


if __name__ == "__main__":
    main()
