"""Main archive analysis system implementation."""

import asyncio
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from typing_extensions import Self

from archive_lens.analytics import (
    SPLIT_ORDER, ConfusionMatrix, SplitAssignment, average_stats, class_weights_from_labels,
    confusion_from_predictions, confusion_stats, content_stats, split_by_capture_time,
    split_dataset, straddling_groups, top_confusions,
)
from archive_lens.config import (
    DEFAULT_CLASSES, DEFAULT_SEED, DEFAULT_SIGNATURE_CAP, DEFAULT_SPLIT_FRACTIONS,
    load_config_file, validate_config, worker_count,
)
from archive_lens.detectors import build_detector_registry
from archive_lens.errors import ConfigurationError, IngestError, InvalidInputError
from archive_lens.framing import FramingClass, FramingConfig, framing_distribution
from archive_lens.fusion import FusionConfig, fuse_image
from archive_lens.geometry import AnchorSet, anchor_kmeans
from archive_lens.imaging import load_image, preprocess_image, save_image
from archive_lens.ingest import (
    ArchiveManifest, DetectionBatch, ManifestEntry, RowError, parse_detections, parse_features,
    parse_labels, parse_manifest, parse_probabilities,
)
from archive_lens.models import BoxShape, Detection, FeatureVector, PhotoRecord
from archive_lens.similarity import DistanceMatrix, EmbeddingConfig, EmbeddingResult
from archive_lens.similarity import embed_features, photographer_distance_matrix
from archive_lens.storage import FileStore
from archive_lens.utils import logger, natural_key

Table = Tuple[List[str], List[List[Any]]]


class SplitConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fractions: Tuple[float, float, float] = DEFAULT_SPLIT_FRACTIONS
    seed: int = DEFAULT_SEED
    mode: str = "random"

    @field_validator("mode")
    @classmethod
    def _known_mode(cls, value: str) -> str:
        if value not in ("random", "chronological"):
            raise ValueError(f"split mode must be 'random' or 'chronological', got {value!r}")
        return value


class SimilarityConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    signature_cap: int = Field(default=DEFAULT_SIGNATURE_CAP, ge=1)
    seed: int = DEFAULT_SEED


class PipelineConfig(BaseModel):
    """All pipeline settings; each section mirrors a section of the JSON config file."""

    model_config = ConfigDict(extra="forbid")

    fusion: FusionConfig = Field(default_factory=FusionConfig)
    framing: FramingConfig = Field(default_factory=FramingConfig)
    split: SplitConfig = Field(default_factory=SplitConfig)
    similarity: SimilarityConfig = Field(default_factory=SimilarityConfig)
    embedding: EmbeddingConfig = Field(default_factory=EmbeddingConfig)
    classes: List[str] = Field(default_factory=lambda: list(DEFAULT_CLASSES), min_length=1)

    @classmethod
    def from_file(cls, path: Optional[str] = None) -> Self:
        """Build from the JSON config file; absent sections keep their defaults."""
        return cls._validated(load_config_file(path))

    def with_overrides(self, **sections: Any) -> Self:
        """Copy with command-line values merged into the named sections."""
        raw = self.model_dump()
        for section, values in sections.items():
            if section == "classes":
                if values:
                    raw["classes"] = values
                continue
            raw[section].update({k: v for k, v in values.items() if v is not None})
        return self._validated(raw)

    @classmethod
    def _validated(cls, raw: Dict[str, Any]) -> Self:
        try:
            config = cls.model_validate(raw)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid configuration: {e}")
        validate_config(config)
        return config


class ArchiveLensSystem:
    """
    Archive analysis system: fuses detector exports, derives framing and content
    statistics, builds grouped splits and compares photographers.
    """

    def __init__(self, config: Optional[PipelineConfig] = None, strict: bool = False,
                 max_workers: Optional[int] = None):
        """Initialize the archive analysis system."""
        self.config = config or PipelineConfig()
        self.strict = strict
        self.max_workers = min(max_workers, worker_count()) if max_workers else worker_count()
        self.row_errors: List[RowError] = []

        self._register_detectors()
        self.store = FileStore()

        logger.info(f"Archive analysis system initialized with {self.max_workers} workers")

    def _register_detectors(self):
        """Load detector adapters and check every one has a fusion threshold."""
        self.detectors = build_detector_registry()
        thresholds = self.config.fusion.per_detector_thresholds
        for detector_id, detector in self.detectors.items():
            if detector_id not in thresholds:
                logger.warning(f"No threshold configured for {detector.display_name}; "
                               f"its detections will be rejected at fusion")
        logger.info(f"Registered detectors: {', '.join(sorted(self.detectors))}")

    def _collect(self, errors: Sequence[RowError]) -> None:
        self.row_errors.extend(errors)

    # Ingestion

    def load_manifest(self, path: str) -> ArchiveManifest:
        manifest = parse_manifest(path, strict=self.strict)
        self._collect(manifest.errors)
        return manifest

    def load_detections(self, paths: Sequence[str], manifest: ArchiveManifest) -> DetectionBatch:
        batch = DetectionBatch()
        for path in paths:
            batch = batch.merge(parse_detections(path, manifest, self.strict, self.detectors))
        self._collect(batch.errors)
        return batch

    def load_features(self, path: str) -> List[FeatureVector]:
        features, errors = parse_features(path, strict=self.strict)
        self._collect(errors)
        if not features:
            raise InvalidInputError(f"No valid feature rows in {path}")
        return sorted(features, key=lambda f: natural_key(f.photo_id))

    def load_fused(self, path: str) -> List[PhotoRecord]:
        store = FileStore(path)
        return store.load()

    # Fusion

    def fuse_photo(self, entry: ManifestEntry, detections: Sequence[Detection]) -> PhotoRecord:
        fused = fuse_image(detections, self.config.fusion)
        return PhotoRecord(
            photo_id=entry.photo_id,
            photographer_id=entry.photographer_id,
            capture_date=entry.capture_date,
            image_width=entry.width,
            image_height=entry.height,
            fused_detections=fused,
        )

    async def fuse_archive(self, manifest: ArchiveManifest, batch: DetectionBatch) -> List[PhotoRecord]:
        """Fuse every photo in a worker pool; results are stored in photo_id order."""
        semaphore = asyncio.Semaphore(self.max_workers)

        async def fuse_one(entry: ManifestEntry) -> PhotoRecord:
            async with semaphore:
                return await asyncio.to_thread(
                    self.fuse_photo, entry, batch.detections.get(entry.photo_id, [])
                )

        photos = await asyncio.gather(*(fuse_one(e) for e in manifest.entries))
        for photo in photos:
            self.store.put_photo(photo)

        fused_count = sum(len(p.fused_detections) for p in photos)
        logger.info(f"Fused {batch.count()} detections into {fused_count} "
                    f"across {len(photos)} photos")
        return self.store.list_photos()

    def fuse(self, manifest_path: str, detection_paths: Sequence[str], out_path: str) -> List[PhotoRecord]:
        """Parse inputs, fuse every photo and write fused.json."""
        manifest = self.load_manifest(manifest_path)
        batch = self.load_detections(detection_paths, manifest)
        photos = asyncio.run(self.fuse_archive(manifest, batch))
        self.store.save(out_path)
        return photos

    # Reports

    def framing_table(self, photos: Sequence[PhotoRecord]) -> Table:
        header = ["photographer_id", "photos", "person_photos"]
        header += [c.value for c in FramingClass] + [f"{c.value}_count" for c in FramingClass]
        rows = []
        for dist in framing_distribution(photos, self.config.framing):
            fractions = [None if dist.fractions is None else dist.fractions[c] for c in FramingClass]
            rows.append([dist.photographer_id, dist.photo_count, dist.person_photo_count]
                        + fractions + [dist.counts[c] for c in FramingClass])
        return header, rows

    def stats_table(self, photos: Sequence[PhotoRecord]) -> Table:
        classes = self.config.classes
        stats = content_stats(photos, classes, self.config.framing.person_label)
        header = ["photographer_id", "photos", "objects_per_image", "person_image_ratio",
                  "persons_per_person_image"] + [f"{c}_per_100" for c in classes]
        rows = []
        for s in stats + ([average_stats(stats)] if stats else []):
            rows.append([s.photographer_id, s.photo_count, s.objects_per_image,
                         s.person_image_ratio, s.persons_per_person_image]
                        + [s.per_class_per_100_images[c] for c in classes])
        return header, rows

    def split(self, manifest: ArchiveManifest) -> SplitAssignment:
        cfg = self.config.split
        photos = manifest.to_photo_records()
        if cfg.mode == "chronological":
            assignment = split_by_capture_time(photos, cfg.fractions)
        else:
            assignment = split_dataset(photos, cfg.fractions, cfg.seed)

        straddling = straddling_groups(photos, assignment)
        if straddling:
            raise InvalidInputError(f"same-day groups split across sets: {straddling[:3]}")
        return assignment

    def split_table(self, manifest: ArchiveManifest,
                    assignment: Optional[SplitAssignment] = None) -> Table:
        assignment = assignment or self.split(manifest)
        rows = [
            [e.photo_id, e.photographer_id,
             e.capture_date.isoformat() if e.capture_date else "",
             assignment.assignments[e.photo_id].value]
            for e in sorted(manifest.entries, key=lambda e: natural_key(e.photo_id))
        ]
        return ["photo_id", "photographer_id", "date", "split"], rows

    def weights_table(self, labels_path: str) -> Table:
        labels, errors = parse_labels(labels_path, strict=self.strict)
        self._collect(errors)
        if not labels:
            raise InvalidInputError(f"No labels in {labels_path}")
        weights = class_weights_from_labels(labels)
        rows = [[i, weights.label_of(i), weights.counts[i], weights.weights[i]]
                for i in sorted(weights.weights)]
        return ["class_index", "label", "count", "weight"], rows

    def distance_matrix(self, features: Sequence[FeatureVector]) -> DistanceMatrix:
        cfg = self.config.similarity
        return photographer_distance_matrix(features, cfg.signature_cap, cfg.seed, self.max_workers)

    def distance_table(self, features: Sequence[FeatureVector]) -> Table:
        matrix = self.distance_matrix(features)
        for a, b, d in matrix.most_distant_pairs(3):
            logger.info(f"Least similar photographers: {a} / {b} (EMD {d:.6g})")
        rows = [[pid] + row for pid, row in zip(matrix.photographer_ids, matrix.values)]
        return ["photographer_id"] + matrix.photographer_ids, rows

    def embedding(self, features: Sequence[FeatureVector]) -> EmbeddingResult:
        return embed_features(features, self.config.embedding)

    def embedding_table(self, features: Sequence[FeatureVector]) -> Table:
        result = self.embedding(features)
        rows = [[pid, ph, x, y] for pid, ph, (x, y)
                in zip(result.photo_ids, result.photographer_ids, result.coordinates)]
        return ["photo_id", "photographer_id", "x", "y"], rows

    def anchors(self, photos: Sequence[PhotoRecord], k: int, seed: int) -> AnchorSet:
        shapes = [
            BoxShape.of(d.box) for p in photos for d in p.fused_detections
            if d.box.width > 0 and d.box.height > 0
        ]
        return anchor_kmeans(shapes, k, seed)

    def anchors_table(self, photos: Sequence[PhotoRecord], k: int, seed: int) -> Table:
        anchors = self.anchors(photos, k, seed)
        members = [anchors.assignments.count(i) for i in range(anchors.k)]
        rows = [[i, c.width, c.height, members[i]] for i, c in enumerate(anchors.centroids)]
        return ["anchor", "width", "height", "members"], rows

    def confusion_table(self, predictions_path: str) -> Table:
        classes, probs, truth, errors = parse_probabilities(predictions_path, strict=self.strict)
        self._collect(errors)
        if len(truth) == 0:
            raise InvalidInputError(f"No valid prediction rows in {predictions_path}")
        matrix: ConfusionMatrix = confusion_from_predictions(probs, truth, classes)
        summary = confusion_stats(matrix)
        for true, predicted, count, rate in top_confusions(matrix):
            logger.info(f"Frequent confusion: {true} predicted as {predicted} "
                        f"({count} photos, {rate:.1%})")

        rows = [[label, total, accuracy] + counts for label, total, accuracy, counts
                in zip(classes, summary.row_totals, summary.per_class_accuracy, matrix.counts)]
        rows.append(["overall", sum(summary.row_totals), summary.overall_accuracy] + [None] * len(classes))
        return ["true_label", "samples", "accuracy"] + classes, rows

    # Preprocessing

    def preprocess_photo(self, entry: ManifestEntry, out_dir: str, size: Optional[int]) -> str:
        out_path = os.path.join(out_dir, f"{entry.photo_id}.png")
        save_image(out_path, preprocess_image(load_image(entry.image_path), size))
        return out_path

    async def preprocess_archive(self, manifest: ArchiveManifest, out_dir: str,
                                 size: Optional[int] = None) -> List[str]:
        """Equalize every manifest image into ``out_dir``; unreadable images become row errors."""
        semaphore = asyncio.Semaphore(self.max_workers)
        entries = sorted(manifest.entries, key=lambda e: natural_key(e.photo_id))

        async def process(entry: ManifestEntry) -> Tuple[Optional[str], Optional[RowError]]:
            async with semaphore:
                try:
                    return await asyncio.to_thread(self.preprocess_photo, entry, out_dir, size), None
                except InvalidInputError as e:
                    return None, RowError(source=entry.image_path, line=0,
                                          photo_id=entry.photo_id, message=str(e))

        # gather returns results in entry order.
        results = await asyncio.gather(*(process(e) for e in entries))
        written = [path for path, _ in results if path is not None]
        failed = [error for _, error in results if error is not None]
        self._collect(failed)
        if self.strict and failed:
            raise IngestError(f"{len(failed)} images could not be preprocessed", failed)
        logger.info(f"Preprocessed {len(written)} of {len(entries)} images into {out_dir}")
        return written

    def preprocess(self, manifest_path: str, out_dir: str, size: Optional[int] = None) -> List[str]:
        manifest = self.load_manifest(manifest_path)
        return asyncio.run(self.preprocess_archive(manifest, out_dir, size))


def split_summary(assignment: SplitAssignment) -> str:
    fractions = assignment.fractions()
    return ", ".join(f"{s.value} {fractions[s]:.1%}" for s in SPLIT_ORDER)
