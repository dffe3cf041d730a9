"""Helpers shared by the subcommands: report output and stage setup."""
import argparse
import logging
from pathlib import Path
from typing import Callable, Optional

from pydantic import BaseModel

from app.config import get_settings
from app.exceptions import ConfigError
from app.schemas.pipeline import PipelineConfig
from app.utils.report import emit, render_mapping, to_json

logger = logging.getLogger(__name__)


def add_output_args(parser: argparse.ArgumentParser, formats: tuple[str, ...] = ("json", "text")):
    parser.add_argument("--format", choices=formats, default="json", help="Report format (default: json)")
    parser.add_argument("--out", type=Path, default=None, help="Write the report to a file instead of stdout")


def add_normalization_args(parser: argparse.ArgumentParser, default: bool):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--normalize", dest="normalize", action="store_true", help="Normalize input text first")
    group.add_argument("--no-normalize", dest="normalize", action="store_false", help="Use input text as is")
    parser.set_defaults(normalize=default)


def stage_config(args: argparse.Namespace, stage: str, **fields) -> PipelineConfig:
    """
    Validate one stage invocation.

    Raises:
        MissingInputError: If an input path does not exist
        UnknownLanguageError: If a required rule pack is missing
    """
    fields.setdefault("rng_seed", seed_of(args))
    fields.setdefault("data_dir", data_dir_of(args))
    inputs = {name: path for name, path in fields.pop("inputs", {}).items() if path is not None}
    return PipelineConfig(stage=stage, inputs=inputs, **fields)


def seed_of(args: argparse.Namespace) -> int:
    return args.seed if getattr(args, "seed", None) is not None else 0


def data_dir_of(args: argparse.Namespace) -> Path:
    return Path(getattr(args, "data_dir", None) or get_settings().DATA_DIR)


def write_report(
    args: argparse.Namespace,
    report: BaseModel,
    text: Optional[Callable[[BaseModel], str]] = None,
    csv: Optional[Callable[[BaseModel], str]] = None,
):
    """Render a report in the requested format to stdout or `--out`."""
    fmt = getattr(args, "format", "json")
    if fmt == "text":
        rendered = text(report) if text else render_mapping(report.model_dump(mode="json"))
    elif fmt == "csv":
        if csv is None:
            raise ConfigError("csv output is not available for this report")
        rendered = csv(report)
    else:
        rendered = to_json(report)
    emit(rendered, getattr(args, "out", None))
    if getattr(args, "out", None) is not None:
        logger.info(f"Wrote {fmt} report to {args.out}")
