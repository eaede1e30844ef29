"""Command line interface for the archive-lens toolkit.

Exit codes: 0 success, 1 input or configuration errors, 2 internal errors.
"""

import argparse
import logging
import sys
import traceback
from typing import Callable, Dict, List, Optional, Sequence

from archive_lens.errors import ArchiveLensError, IngestError, InvalidInputError
from archive_lens.ingest import report_row_errors
from archive_lens.storage import write_csv
from archive_lens.system import ArchiveLensSystem, PipelineConfig, split_summary

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INTERNAL_ERROR = 2


def _fractions(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected train,validation,test fractions, got {text!r}")
    return values


def _classes(text: str) -> List[str]:
    classes = [c.strip() for c in text.split(",") if c.strip()]
    if not classes:
        raise argparse.ArgumentTypeError("class list must not be empty")
    return classes


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults to $ARCHIVE_LENS_CONFIG)")
    common.add_argument("--strict", action="store_true", help="fail on any invalid input row")
    common.add_argument("--workers", type=int, help="worker count (capped by $ARCHIVE_LENS_THREADS)")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, help="random seed")

    parser = argparse.ArgumentParser(
        prog="archive-lens",
        description="Content and style analysis of historical photo archives.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    fuse = commands.add_parser("fuse", parents=[common], help="fuse detector exports per photo")
    fuse.add_argument("--manifest", required=True)
    fuse.add_argument("--detections", required=True, nargs="+")
    fuse.add_argument("--iou", type=float, help="grouping IoU threshold")
    fuse.add_argument("--merge", choices=["mean_coordinates", "highest_confidence"])
    fuse.add_argument("--out", required=True)

    framing = commands.add_parser("framing", parents=[common], help="framing distribution per photographer")
    framing.add_argument("--fused", required=True)
    framing.add_argument("--out", required=True)

    stats = commands.add_parser("stats", parents=[common], help="object statistics per photographer")
    stats.add_argument("--fused", required=True)
    stats.add_argument("--classes", type=_classes)
    stats.add_argument("--out", required=True)

    split = commands.add_parser("split", parents=[common, seeded], help="grouped train/validation/test split")
    split.add_argument("--manifest", required=True)
    split.add_argument("--fractions", type=_fractions)
    split.add_argument("--mode", choices=["random", "chronological"])
    split.add_argument("--out", required=True)

    weights = commands.add_parser("weights", parents=[common], help="balanced class weights")
    weights.add_argument("--labels", required=True)
    weights.add_argument("--out", required=True)

    emd = commands.add_parser("emd", parents=[common, seeded], help="photographer distance matrix")
    emd.add_argument("--features", required=True)
    emd.add_argument("--cap", type=int, help="maximum signature size per photographer")
    emd.add_argument("--out", required=True)

    tsne = commands.add_parser("tsne", parents=[common, seeded], help="2-D embedding of photo features")
    tsne.add_argument("--features", required=True)
    tsne.add_argument("--perplexity", type=float)
    tsne.add_argument("--iterations", type=int)
    tsne.add_argument("--out", required=True)

    preprocess = commands.add_parser("preprocess", parents=[common], help="histogram-equalize archive images")
    preprocess.add_argument("--manifest", required=True)
    preprocess.add_argument("--out-dir", required=True)
    preprocess.add_argument("--size", type=int, help="resize to SIZE x SIZE after equalization")

    anchors = commands.add_parser("anchors", parents=[common, seeded], help="anchor box shapes by k-means")
    anchors.add_argument("--fused", required=True)
    anchors.add_argument("--k", type=int, default=9)
    anchors.add_argument("--out", required=True)

    confusion = commands.add_parser("confusion", parents=[common], help="per-class accuracy report")
    confusion.add_argument("--predictions", required=True)
    confusion.add_argument("--out", required=True)

    return parser


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config)
    seed = getattr(args, "seed", None)
    return config.with_overrides(
        fusion={"grouping_iou_threshold": getattr(args, "iou", None),
                "merge_strategy": getattr(args, "merge", None)},
        split={"fractions": getattr(args, "fractions", None), "seed": seed,
               "mode": getattr(args, "mode", None)},
        similarity={"signature_cap": getattr(args, "cap", None), "seed": seed},
        embedding={"perplexity": getattr(args, "perplexity", None),
                   "iterations": getattr(args, "iterations", None), "seed": seed},
        classes=getattr(args, "classes", None),
    )


def cmd_fuse(system: ArchiveLensSystem, args: argparse.Namespace) -> None:
    system.fuse(args.manifest, args.detections, args.out)


def cmd_framing(system: ArchiveLensSystem, args: argparse.Namespace) -> None:
    write_csv(args.out, *system.framing_table(system.load_fused(args.fused)))


def cmd_stats(system: ArchiveLensSystem, args: argparse.Namespace) -> None:
    write_csv(args.out, *system.stats_table(system.load_fused(args.fused)))


def cmd_split(system: ArchiveLensSystem, args: argparse.Namespace) -> None:
    manifest = system.load_manifest(args.manifest)
    assignment = system.split(manifest)
    write_csv(args.out, *system.split_table(manifest, assignment))
    logger.info(f"Split fractions: {split_summary(assignment)}")


def cmd_weights(system: ArchiveLensSystem, args: argparse.Namespace) -> None:
    write_csv(args.out, *system.weights_table(args.labels))


def cmd_emd(system: ArchiveLensSystem, args: argparse.Namespace) -> None:
    write_csv(args.out, *system.distance_table(system.load_features(args.features)))


def cmd_tsne(system: ArchiveLensSystem, args: argparse.Namespace) -> None:
    write_csv(args.out, *system.embedding_table(system.load_features(args.features)))


def cmd_preprocess(system: ArchiveLensSystem, args: argparse.Namespace) -> None:
    system.preprocess(args.manifest, args.out_dir, args.size)


def cmd_anchors(system: ArchiveLensSystem, args: argparse.Namespace) -> None:
    seed = args.seed if args.seed is not None else system.config.split.seed
    write_csv(args.out, *system.anchors_table(system.load_fused(args.fused), args.k, seed))


def cmd_confusion(system: ArchiveLensSystem, args: argparse.Namespace) -> None:
    write_csv(args.out, *system.confusion_table(args.predictions))


COMMANDS: Dict[str, Callable[[ArchiveLensSystem, argparse.Namespace], None]] = {
    "fuse": cmd_fuse,
    "framing": cmd_framing,
    "stats": cmd_stats,
    "split": cmd_split,
    "weights": cmd_weights,
    "emd": cmd_emd,
    "tsne": cmd_tsne,
    "preprocess": cmd_preprocess,
    "anchors": cmd_anchors,
    "confusion": cmd_confusion,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT_ERROR

    system = None
    try:
        system = ArchiveLensSystem(_load_config(args), strict=args.strict, max_workers=args.workers)
        COMMANDS[args.command](system, args)
    except IngestError as e:
        sys.stderr.write(f"error: {e}\n{report_row_errors(e.row_errors)}")
        return EXIT_INPUT_ERROR
    except (InvalidInputError, ArchiveLensError, FileNotFoundError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT_ERROR
    except Exception as e:
        logger.error(f"Internal error in '{args.command}': {str(e)}")
        logger.error(traceback.format_exc())
        return EXIT_INTERNAL_ERROR

    if system.row_errors:
        sys.stderr.write(f"{len(system.row_errors)} invalid input rows skipped:\n"
                         f"{report_row_errors(system.row_errors)}")
    return EXIT_OK
