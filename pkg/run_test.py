"""Smoke run: generate a small synthetic archive and push it through every command."""

import json
import os
import sys
import tempfile

import cv2
import numpy as np
from dotenv import load_dotenv

load_dotenv()

from archive_lens.cli import main

PHOTOGRAPHERS = ["Kim Borg", "Hugo Sundström", "Esko Suomalainen"]
DETECTORS = ["ssd", "yolov3", "retinanet", "mask_rcnn"]


def build_archive(root: str, seed: int = 0) -> dict:
    """Write a manifest, four detector exports, images, features, labels and predictions."""
    rng = np.random.default_rng(seed)
    paths = {name: os.path.join(root, name) for name in
             ("manifest.csv", "features.csv", "labels.csv", "predictions.csv")}
    exports = {d: [] for d in DETECTORS}

    manifest_rows = ["photo_id,photographer,date,image_path,width,height"]
    feature_rows = ["photo_id,photographer_id," + ",".join(f"f{i}" for i in range(8))]
    label_rows = ["photo_id,label"]
    prediction_rows = ["photo_id,true_label," + ",".join(PHOTOGRAPHERS)]

    for index in range(36):
        photo_id = f"sa-{index + 1}"
        owner = index % len(PHOTOGRAPHERS)
        photographer = PHOTOGRAPHERS[owner]
        day = f"1941-06-{20 + index % 5:02d}"
        width, height = 320, 240
        image_path = os.path.join(root, "images", f"{photo_id}.png")
        os.makedirs(os.path.dirname(image_path), exist_ok=True)
        cv2.imwrite(image_path, rng.integers(40, 180, size=(height, width, 3), dtype=np.uint8))
        manifest_rows.append(f"{photo_id},{photographer},{day},{image_path},{width},{height}")

        # one person of varying size seen by every detector with jitter
        side = 40 + 40 * (index % 5)
        base = np.array([10, 10, 10 + side, 10 + side * 0.75])
        for detector in DETECTORS:
            box = np.clip(base + rng.normal(0, 2, size=4), 0, [width, height, width, height])
            exports[detector].append({
                "photo_id": photo_id, "class": "person",
                "confidence": round(float(rng.uniform(0.75, 0.99)), 3),
                "box": [round(float(v), 2) for v in box],
            })

        center = np.zeros(8)
        center[owner] = 10.0
        feature = center + rng.normal(0, 1, size=8)
        feature_rows.append(f"{photo_id},{photographer}," + ",".join(f"{v:.6f}" for v in feature))
        label_rows.append(f"{photo_id},{photographer}")
        probs = rng.dirichlet(np.ones(len(PHOTOGRAPHERS)))
        prediction_rows.append(f"{photo_id},{photographer}," + ",".join(repr(float(p)) for p in probs))

    for name, rows in (("manifest.csv", manifest_rows), ("features.csv", feature_rows),
                       ("labels.csv", label_rows), ("predictions.csv", prediction_rows)):
        with open(paths[name], "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(rows) + "\n")

    detection_paths = []
    for detector, rows in exports.items():
        path = os.path.join(root, f"{detector}.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"detector_id": detector, "detections": rows}, f)
        detection_paths.append(path)
    paths["detections"] = detection_paths
    return paths


def run_pipeline(root: str, paths: dict, seed: int = 0) -> int:
    out = lambda name: os.path.join(root, "out", name)
    steps = [
        ["fuse", "--manifest", paths["manifest.csv"], "--detections", *paths["detections"],
         "--out", out("fused.json")],
        ["framing", "--fused", out("fused.json"), "--out", out("framing.csv")],
        ["stats", "--fused", out("fused.json"), "--out", out("stats.csv")],
        ["split", "--manifest", paths["manifest.csv"], "--seed", str(seed), "--out", out("split.csv")],
        ["weights", "--labels", paths["labels.csv"], "--out", out("weights.csv")],
        ["emd", "--features", paths["features.csv"], "--seed", str(seed), "--out", out("distmatrix.csv")],
        ["tsne", "--features", paths["features.csv"], "--perplexity", "5", "--iterations", "300",
         "--seed", str(seed), "--out", out("embedding.csv")],
        ["anchors", "--fused", out("fused.json"), "--k", "3", "--seed", str(seed), "--out", out("anchors.csv")],
        ["confusion", "--predictions", paths["predictions.csv"], "--out", out("confusion.csv")],
        ["preprocess", "--manifest", paths["manifest.csv"], "--out-dir", out("equalized"), "--size", "224"],
    ]
    for step in steps:
        code = main(step)
        print(f"{step[0]}: exit {code}")
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as root:
        archive = build_archive(root)
        status = run_pipeline(root, archive)
        if status == 0:
            with open(os.path.join(root, "out", "distmatrix.csv"), encoding="utf-8") as f:
                print("\nPhotographer distances:\n" + f.read())
    sys.exit(status)
