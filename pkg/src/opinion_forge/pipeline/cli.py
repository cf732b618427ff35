import argparse
import sys
from pathlib import Path
from typing import Sequence

from loguru import logger

from opinion_forge.adjudication import AdjudicationMode
from opinion_forge.errors import ConfigError, MissingArtifact, OpinionForgeError, UsageError
from opinion_forge.pipeline import stages
from opinion_forge.pipeline.config import ADJUDICATOR, PipelineConfig, load_config


LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR")
USAGE_ERRORS = (ConfigError, MissingArtifact, UsageError)


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="pipeline TOML file")
    common.add_argument("--seed", type=_seed, default=None, help="overrides the seed of the config file")
    common.add_argument("--log-level", default="INFO", choices=LOG_LEVELS, type=str.upper)

    parser = argparse.ArgumentParser(
        prog="opinion-forge",
        description="LLM annotation of ASTE/ACOS corpora with adjudication and evaluation.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("prepare", parents=[common], help="parse the splits and partition the dev split")

    optimize = commands.add_parser("optimize", parents=[common], help="select the ICL count on the eval half")
    optimize.add_argument(
        "--annotator",
        help=f"annotator id, or '{ADJUDICATOR}' for the adjudication prompt (default: every annotator)",
    )

    annotate = commands.add_parser("annotate", parents=[common], help="annotate the test split")
    annotate.add_argument("--annotator", help="annotator id (default: every annotator)")

    adjudicate = commands.add_parser("adjudicate", parents=[common], help="combine the annotator runs")
    adjudicate.add_argument("--mode", choices=[str(m) for m in AdjudicationMode], default=None)

    commands.add_parser("evaluate", parents=[common], help="exact-match and element-wise scores")
    commands.add_parser("agreement", parents=[common], help="Krippendorff's alpha between annotators")
    commands.add_parser("report", parents=[common], help="render the report tables")
    return parser


def configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level, format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}")


def run_command(config: PipelineConfig, args: argparse.Namespace) -> None:
    match args.command:
        case "prepare":
            stages.prepare(config)
        case "optimize":
            for annotator_id in [args.annotator] if args.annotator else config.annotator_ids:
                stages.optimize(config, annotator_id)
        case "annotate":
            if args.annotator == ADJUDICATOR:
                raise UsageError(f"use the adjudicate command for the {ADJUDICATOR}")
            for annotator_id in [args.annotator] if args.annotator else config.annotator_ids:
                stages.annotate(config, annotator_id)
        case "adjudicate":
            stages.adjudicate(config, args.mode)
        case "evaluate":
            stages.evaluate(config)
        case "agreement":
            stages.agreement(config)
        case "report":
            stages.report(config)


def main(argv: Sequence[str] | None = None) -> int:
    """Exit codes: 0 ok, 1 runtime failure, 2 usage or configuration error."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    configure_logging(args.log_level)

    try:
        config = load_config(args.config, seed=args.seed)
        run_command(config, args)
    except USAGE_ERRORS as e:
        logger.error(str(e))
        return 2
    except OpinionForgeError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
