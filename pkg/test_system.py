"""Tests for the archive system orchestrator, config loading and storage."""

import asyncio
import json

import pytest

from archive_lens.detectors import build_detector_registry
from archive_lens.errors import ConfigurationError, IngestError
from archive_lens.fusion import MergeStrategy
from archive_lens.ingest import ArchiveManifest, DetectionBatch, ManifestEntry
from archive_lens.storage import FileStore, MemoryStore
from archive_lens.system import ArchiveLensSystem, PipelineConfig


def write_config(tmp_path, payload):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_config_file_sections(tmp_path):
    path = write_config(tmp_path, {
        "fusion": {"grouping_iou_threshold": 0.3, "merge_strategy": "highest_confidence"},
        "split": {"fractions": [0.8, 0.1, 0.1], "seed": 9},
        "classes": ["person", "dog"],
    })
    config = PipelineConfig.from_file(path)
    assert config.fusion.grouping_iou_threshold == 0.3
    assert config.fusion.merge_strategy == MergeStrategy.HIGHEST_CONFIDENCE
    assert config.split.fractions == (0.8, 0.1, 0.1)
    assert config.classes == ["person", "dog"]
    assert config.fusion.per_detector_thresholds["yolov3"] == 0.6


@pytest.mark.parametrize("payload", [
    {"fusion": {"iou": 0.3}},
    {"plotting": {}},
    {"framing": {"closeup_min_fraction": 0.05}},
    {"split": {"mode": "by_month"}},
    {"classes": []},
    {"classes": ["person", "dog", "person"]},
    {"split": {"fractions": [0.5, 0.3, 0.3]}},
    {"embedding": {"perplexity": 5.0, "theta": 0.5}},
    {"similarity": {"signature_cap": 64, "metric": "cosine"}},
])
def test_invalid_config(tmp_path, payload):
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_file(write_config(tmp_path, payload))


def test_overrides_run_cross_field_checks():
    with pytest.raises(ConfigurationError):
        PipelineConfig().with_overrides(split={"fractions": [0.7, 0.2, 0.2]})


def test_default_thresholds_come_from_detector_adapters():
    registry = build_detector_registry()
    thresholds = PipelineConfig().fusion.per_detector_thresholds
    assert thresholds == {d.detector_id: d.default_threshold for d in registry.values()}
    assert thresholds == {"ssd": 0.5, "yolov3": 0.6, "retinanet": 0.3, "mask_rcnn": 0.7}


def test_missing_config_file():
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_file("/nonexistent/config.json")


def test_flag_overrides_win():
    config = PipelineConfig().with_overrides(split={"seed": 4, "fractions": None},
                                             embedding={"perplexity": 12.0}, classes=None)
    assert config.split.seed == 4
    assert config.split.fractions == (0.6, 0.2, 0.2)
    assert config.embedding.perplexity == 12.0
    assert len(config.classes) == 11


def manifest_of(count):
    return ArchiveManifest(entries=[
        ManifestEntry(photo_id=f"p{i}", photographer_id="A", image_path=f"{i}.jpg", width=100, height=100)
        for i in range(count)
    ])


def test_fuse_archive_is_ordered_and_worker_independent(four_detector_person):
    manifest = manifest_of(12)
    batch = DetectionBatch(detections={f"p{i}": four_detector_person for i in range(0, 12, 2)})
    results = []
    for workers in (1, 4):
        system = ArchiveLensSystem(max_workers=workers)
        photos = asyncio.run(system.fuse_archive(manifest, batch))
        results.append([p.model_dump() for p in photos])
    assert results[0] == results[1]
    assert [p["photo_id"] for p in results[0]] == [f"p{i}" for i in range(12)]
    assert [len(p["fused_detections"]) for p in results[0]] == [1, 0] * 6


def test_fused_file_round_trip(tmp_path, four_detector_person):
    system = ArchiveLensSystem(max_workers=1)
    asyncio.run(system.fuse_archive(manifest_of(2), DetectionBatch(detections={"p1": four_detector_person})))
    path = system.store.save(str(tmp_path / "fused.json"))

    reloaded = FileStore(path).load()
    assert reloaded == system.store.list_photos()
    first = (tmp_path / "fused.json").read_bytes()
    store = FileStore()
    store.load(path)
    store.save(str(tmp_path / "again.json"))
    assert (tmp_path / "again.json").read_bytes() == first


def test_memory_store_lists_in_natural_order(make_photo, make_fused):
    store = MemoryStore()
    store.put_photo(make_photo("10", "B"))
    store.put_photo(make_photo("2", "A"))
    store.put_photo(make_photo("2", "A", detections=[make_fused(0, 0, 5, 5)]))
    assert [p.photo_id for p in store.list_photos()] == ["2", "10"]
    assert len(store.list_photos()[0].fused_detections) == 1


def test_stats_table_has_average_row(make_photo, make_fused):
    system = ArchiveLensSystem(max_workers=1)
    header, rows = system.stats_table([make_photo("1", "A", [make_fused(0, 0, 5, 5)]), make_photo("2", "B")])
    assert header[:5] == ["photographer_id", "photos", "objects_per_image", "person_image_ratio",
                          "persons_per_person_image"]
    assert [r[0] for r in rows] == ["A", "B", "Avg"]


def test_preprocess_errors_follow_photo_order(tmp_path):
    manifest = ArchiveManifest(entries=[
        ManifestEntry(photo_id=f"p{i}", photographer_id="A",
                      image_path=str(tmp_path / f"missing-{i}.png"), width=10, height=10)
        for i in (11, 3, 7, 1, 20, 2)
    ])
    system = ArchiveLensSystem(max_workers=4)
    written = asyncio.run(system.preprocess_archive(manifest, str(tmp_path / "out")))
    assert written == []
    assert [e.photo_id for e in system.row_errors] == ["p1", "p2", "p3", "p7", "p11", "p20"]

    strict = ArchiveLensSystem(strict=True, max_workers=4)
    with pytest.raises(IngestError) as raised:
        asyncio.run(strict.preprocess_archive(manifest, str(tmp_path / "out")))
    assert [e.photo_id for e in raised.value.row_errors][:2] == ["p1", "p2"]
