"""`eval`: tokenizer and generated-text metrics."""
import argparse
import logging
from pathlib import Path
from typing import Iterator, Optional

from app.commands.common import (
    add_normalization_args,
    add_output_args,
    data_dir_of,
    stage_config,
    write_report,
)
from app.commands.prep import stemmer_from_args
from app.exceptions import DataError, ValidationIssue
from app.schemas.metrics import AdoptionReport, CswrReport, NewrConfig, ParityReport
from app.schemas.text import NormalizationConfig
from app.services.codeswitch_service import cswr
from app.services.merge_service import read_category_map
from app.services.metrics_service import (
    ADOPTION_COLUMNS,
    adoption_csv,
    adoption_report,
    fertility,
    fertility_parity,
    newr,
    vocab_stats,
)
from app.services.rulepack_service import load_alphabet, load_wordset, rulepack_for
from app.services.text_service import iter_corpus, normalize, stem_text
from app.utils.datafiles import iter_entries
from app.utils.report import render_mapping, render_table
from app.utils.tfv1 import load_model

logger = logging.getLogger(__name__)


def register(subparsers) -> dict[str, argparse.ArgumentParser]:
    parser = subparsers.add_parser("eval", help="Compute evaluation metrics")
    metrics = parser.add_subparsers(dest="metric", metavar="METRIC", required=True)
    parsers = {}

    p = metrics.add_parser("fertility", help="Tokens per word on a corpus")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--corpus", type=Path, required=True)
    _add_corpus_prep_args(p)
    p.set_defaults(handler=run_fertility)
    parsers["eval fertility"] = p

    p = metrics.add_parser("parity", help="Target/English fertility ratio on parallel corpora")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--english", type=Path, required=True)
    p.add_argument("--target", type=Path, required=True)
    _add_corpus_prep_args(p)
    p.set_defaults(handler=run_parity)
    parsers["eval parity"] = p

    p = metrics.add_parser("vocab", help="Vocabulary composition")
    p.add_argument("--model", type=Path, required=True)
    alphabet = p.add_mutually_exclusive_group(required=True)
    alphabet.add_argument("--language", help="Take the alphabet from this language's rule pack")
    alphabet.add_argument("--alphabet", type=Path, help="Alphabet TSV")
    p.set_defaults(handler=run_vocab)
    parsers["eval vocab"] = p

    p = metrics.add_parser("newr", help="Non-Existing Words Ratio of generated text")
    p.add_argument("--text", type=Path, required=True)
    p.add_argument("--wordset", type=Path, required=True)
    p.add_argument("--language", default=None, help="Rule pack supplying the alphabet for --exclude-foreign")
    p.add_argument("--keep-numbers", action="store_true", help="Count numbers")
    p.add_argument("--keep-punctuation", action="store_true", help="Count punctuation-only words")
    p.add_argument("--exclude-foreign", action="store_true")
    p.add_argument("--exclude-proper-names", action="store_true")
    add_normalization_args(p, default=True)
    p.set_defaults(handler=run_newr)
    parsers["eval newr"] = p

    p = metrics.add_parser("cswr", help="Code Switching Word Ratio of generated text")
    p.add_argument("--text", type=Path, required=True)
    p.add_argument("--language", required=True)
    p.add_argument("--verdicts", action="store_true", help="Keep per-word verdicts in the JSON report")
    add_normalization_args(p, default=True)
    p.set_defaults(handler=run_cswr)
    parsers["eval cswr"] = p

    p = metrics.add_parser("adoption", help="Category mix of a generated token stream")
    p.add_argument("--stream", type=Path, required=True,
                   help="Token ids, one '<slice><TAB><ids...>' or '<ids...>' line each")
    p.add_argument("--category-map", type=Path, required=True)
    p.set_defaults(handler=run_adoption)
    parsers["eval adoption"] = p

    for name, metric_parser in parsers.items():
        add_output_args(metric_parser, ("json", "text", "csv") if name == "eval adoption" else ("json", "text"))
    return parsers


def _add_corpus_prep_args(parser: argparse.ArgumentParser):
    add_normalization_args(parser, default=False)
    parser.add_argument("--stem", action="store_true", help="Measure on Arabic light-stemmed text")
    parser.add_argument("--prefixes", type=Path, default=None)
    parser.add_argument("--suffixes", type=Path, default=None)
    parser.add_argument("--min-stem-len", type=int, default=2)


def _prepared_corpus(path: Path, args: argparse.Namespace) -> Iterator[str]:
    norm = NormalizationConfig() if args.normalize else None
    stemmer = stemmer_from_args(args) if args.stem else None
    for line in iter_corpus(path):
        if norm is not None:
            line = normalize(line, norm)
        if stemmer is not None:
            line = stem_text(line, stemmer)
        yield line


def _read_text(path: Path, normalize_input: bool) -> str:
    text = "\n".join(iter_corpus(path))
    return normalize(text, NormalizationConfig()) if normalize_input else text


def run_fertility(args: argparse.Namespace) -> int:
    stage_config(args, "eval-fertility", inputs={"model": args.model, "corpus": args.corpus})
    model = load_model(args.model)
    report = fertility(model, _prepared_corpus(args.corpus, args), threads=args.threads)
    write_report(args, report)
    return 0


def render_parity(report: ParityReport) -> str:
    rows = [
        (name, side.token_count, side.word_count, side.fertility)
        for name, side in (("english", report.english), ("target", report.target))
    ]
    table = render_table(["corpus", "tokens", "words", "fertility"], rows)
    return table + f"\nparity  {report.parity:.6f}\n"


def run_parity(args: argparse.Namespace) -> int:
    stage_config(
        args,
        "eval-parity",
        inputs={"model": args.model, "english": args.english, "target": args.target},
    )
    model = load_model(args.model)
    report = fertility_parity(
        model,
        _prepared_corpus(args.english, args),
        _prepared_corpus(args.target, args),
        threads=args.threads,
    )
    write_report(args, report, text=render_parity)
    return 0


def run_vocab(args: argparse.Namespace) -> int:
    stage_config(
        args,
        "eval-vocab",
        inputs={"model": args.model, "alphabet": args.alphabet},
        language=args.language,
        requires_rulepack=args.language is not None,
    )
    model = load_model(args.model)
    if args.alphabet is not None:
        alphabet = load_alphabet(args.alphabet)
    else:
        alphabet = rulepack_for(args.language, data_dir_of(args)).alphabet
    write_report(args, vocab_stats(model, alphabet))
    return 0


def run_newr(args: argparse.Namespace) -> int:
    cfg = NewrConfig(
        exclude_numbers=not args.keep_numbers,
        exclude_punctuation=not args.keep_punctuation,
        exclude_foreign=args.exclude_foreign,
        exclude_proper_names=args.exclude_proper_names,
    )
    stage_config(
        args,
        "eval-newr",
        inputs={"text": args.text, "wordset": args.wordset},
        newr=cfg,
        language=args.language,
        requires_rulepack=args.language is not None,
    )
    alphabet: Optional[frozenset[str]] = None
    if args.language is not None:
        alphabet = rulepack_for(args.language, data_dir_of(args)).alphabet
    report = newr(_read_text(args.text, args.normalize), load_wordset(args.wordset), cfg, alphabet)
    write_report(args, report)
    return 0


def render_cswr(report: CswrReport) -> str:
    text = render_mapping(report.model_dump(mode="json"))
    flagged = [
        (v.word, v.start, v.end, v.verdict)
        for v in report.verdicts
        if v.verdict in ("violation", "sentence_violation")
    ]
    if flagged:
        text += "\n" + render_table(["word", "start", "end", "verdict"], flagged)
    return text


def run_cswr(args: argparse.Namespace) -> int:
    stage_config(
        args,
        "eval-cswr",
        inputs={"text": args.text},
        language=args.language,
        requires_rulepack=True,
    )
    pack = rulepack_for(args.language, data_dir_of(args))
    report = cswr(_read_text(args.text, args.normalize), pack)
    if args.format == "json" and not args.verdicts:
        report = report.model_copy(update={"verdicts": []})
    write_report(args, report, text=render_cswr)
    return 0


def read_stream(path: Path) -> list[tuple[str, list[int]]]:
    """
    Read a token stream file.

    Lines are `<slice><TAB><id> <id> ...` or bare id lists (slice `all`);
    lines of one slice are concatenated in file order, slices keep the order
    of their first line.
    """
    slices: dict[str, list[int]] = {}
    issues = []
    for number, entry in iter_entries(path):
        name, sep, ids = entry.partition("\t")
        if not sep:
            name, ids = "all", entry
        try:
            values = [int(value) for value in ids.split()]
        except ValueError as e:
            issues.append(ValidationIssue(line=number, message=str(e)))
            continue
        slices.setdefault(name.strip() or "all", []).extend(values)
    if issues:
        raise DataError(f"{path}: invalid token stream", issues)
    return list(slices.items())


def render_adoption(report: AdoptionReport) -> str:
    rows = [
        (item.slice, item.tokens, *(item.fractions[c.value] for c in ADOPTION_COLUMNS.values()))
        for item in [*report.slices, report.total]
    ]
    return render_table(["slice", "tokens", *ADOPTION_COLUMNS], rows)


def run_adoption(args: argparse.Namespace) -> int:
    stage_config(args, "eval-adoption", inputs={"stream": args.stream, "category_map": args.category_map})
    report = adoption_report(read_stream(args.stream), read_category_map(args.category_map))
    write_report(args, report, text=render_adoption, csv=adoption_csv)
    return 0
