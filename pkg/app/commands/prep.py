"""`prep`: normalize a corpus and optionally apply light stemming."""
import argparse
import logging
from pathlib import Path

from tqdm import tqdm

from app.commands.common import data_dir_of, stage_config
from app.schemas.text import NormalizationConfig, StemmerConfig
from app.services.text_service import (
    arabic_stemmer_config,
    iter_corpus,
    load_affixes,
    normalize,
    stem_text,
)

logger = logging.getLogger(__name__)


def register(subparsers) -> dict[str, argparse.ArgumentParser]:
    parser = subparsers.add_parser("prep", help="Normalize (and stem) a corpus")
    parser.add_argument("--corpus", type=Path, required=True, help="Corpus file or directory of *.txt files")
    parser.add_argument("--out", type=Path, required=True, help="Output text file, one document per line")
    parser.add_argument("--no-strip-html", dest="strip_html", action="store_false")
    parser.add_argument("--no-fold-accents", dest="fold_accents", action="store_false")
    parser.add_argument("--no-nfc", dest="unicode_nfc", action="store_false")
    parser.add_argument("--stem", action="store_true", help="Apply Arabic light stemming after normalization")
    parser.add_argument("--prefixes", type=Path, default=None, help="Prefix list (default: shipped Arabic list)")
    parser.add_argument("--suffixes", type=Path, default=None, help="Suffix list (default: shipped Arabic list)")
    parser.add_argument("--min-stem-len", type=int, default=2)
    parser.set_defaults(handler=run)
    return {"prep": parser}


def stemmer_from_args(args: argparse.Namespace) -> StemmerConfig:
    cfg = arabic_stemmer_config(data_dir_of(args), min_stem_len=args.min_stem_len)
    updates = {}
    if args.prefixes is not None:
        updates["prefix_list"] = load_affixes(args.prefixes)
    if args.suffixes is not None:
        updates["suffix_list"] = load_affixes(args.suffixes)
    return cfg.model_copy(update=updates) if updates else cfg


def run(args: argparse.Namespace) -> int:
    norm = NormalizationConfig(
        strip_html=args.strip_html,
        fold_accents=args.fold_accents,
        unicode_nfc=args.unicode_nfc,
    )
    stage_config(
        args,
        "prep",
        inputs={"corpus": args.corpus, "prefixes": args.prefixes, "suffixes": args.suffixes},
        normalization=norm,
    )
    stemmer = stemmer_from_args(args) if args.stem else None

    args.out.parent.mkdir(parents=True, exist_ok=True)
    documents = 0
    with args.out.open("w", encoding="utf-8", newline="") as handle:
        for line in tqdm(iter_corpus(args.corpus), desc="prep", unit="doc", disable=args.quiet):
            text = normalize(line, norm)
            if stemmer is not None:
                text = stem_text(text, stemmer)
            handle.write(text.replace("\n", " ") + "\n")
            documents += 1

    logger.info(f"Prepared {documents} document(s) into {args.out}")
    return 0
