"""
Command-line entry point.

    python -m app.main [global options] COMMAND [options]

Commands: prep, train, merge, init-embeddings, eval {fertility, parity,
vocab, newr, cswr, adoption}. Reports go to stdout, diagnostics to stderr.

Exit codes: 0 ok, 2 usage or configuration error, 3 data error,
4 internal invariant violation.
"""
import argparse
import logging
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from app import __version__
from app.commands import embeddings, evaluate, merge, prep, train
from app.config import get_settings
from app.exceptions import ConfigError, ToolkitError

logger = logging.getLogger(__name__)

COMMANDS = (prep, train, merge, embeddings, evaluate)
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bitok",
        description="Train, merge and evaluate bilingual tokenizers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, default=None, help="TOML file of key = value defaults")
    parser.add_argument("--data-dir", type=Path, default=None,
                        help="Rule packs, word sets and affix lists (default: BITOK_DATA_DIR)")
    parser.add_argument("--threads", type=int, default=None, help="Worker count, 0 for all CPUs")
    parser.add_argument("--seed", type=int, default=None, help="Seed for every random choice (default 0)")
    parser.add_argument("--quiet", action="store_true", help="No progress bars, warnings and errors only")
    parser.add_argument("--log-level", default=None, help="Logging level (default: BITOK_LOG_LEVEL)")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    command_parsers = {}
    for module in COMMANDS:
        command_parsers.update(module.register(subparsers))
    parser.command_parsers = command_parsers
    return parser


def configure_logging(level: Optional[str] = None, quiet: bool = False):
    level = (level or ("WARNING" if quiet else get_settings().LOG_LEVEL)).upper()
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def load_config_file(path: Path) -> dict[str, Any]:
    """
    Read a flat TOML config file; keys are flag names with `-` or `_`.

    Raises:
        ConfigError: If the file is missing, malformed or nested
    """
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with path.open("rb") as handle:
            values = tomllib.load(handle)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    nested = [key for key, value in values.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"{path}: config must be flat key = value pairs, found tables {nested}")
    return {key.replace("-", "_"): value for key, value in values.items()}


def apply_config(parser: argparse.ArgumentParser, config: dict[str, Any]):
    """
    Install config values as parser defaults so that flags still win.

    A key applies to every parser that has an option of that name.
    """
    parsers = [parser, *parser.command_parsers.values()]
    unknown = set(config)
    for target in parsers:
        for action in target._actions:
            if action.dest not in config or not action.option_strings:
                continue
            value = config[action.dest]
            if isinstance(value, str) and callable(action.type):
                value = action.type(value)
            if action.choices is not None and value not in action.choices:
                raise ConfigError(f"Config key '{action.dest}': {value!r} is not one of {list(action.choices)}")
            action.default = value
            action.required = False
            unknown.discard(action.dest)
    if unknown:
        raise ConfigError(f"Unknown config key(s): {', '.join(sorted(unknown))}")


def apply_environment(args: argparse.Namespace):
    """Route --data-dir and --threads through the settings layer."""
    changed = False
    if args.data_dir is not None:
        os.environ["BITOK_DATA_DIR"] = str(args.data_dir)
        changed = True
    if args.threads is not None:
        os.environ["BITOK_THREADS"] = str(args.threads)
        changed = True
    if changed:
        get_settings.cache_clear()


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path, default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is not None:
        apply_config(parser, load_config_file(known.config))
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as e:
        configure_logging()
        logger.error(str(e))
        return e.exit_code
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    configure_logging(args.log_level, args.quiet)
    try:
        apply_environment(args)
        if args.threads is None:
            args.threads = get_settings().THREADS
        logger.debug(f"Running '{args.command}' with {vars(args)}")
        return args.handler(args)
    except ToolkitError as e:
        logger.error(str(e))
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return ConfigError.exit_code
    except (FileNotFoundError, UnicodeDecodeError) as e:
        logger.error(str(e))
        return 3
    except Exception:
        logger.exception("Internal error")
        return 4


if __name__ == "__main__":
    sys.exit(main())
