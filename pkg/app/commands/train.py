"""`train`: fit a unigram tokenizer on a corpus."""
import argparse
import logging
from pathlib import Path

from tqdm import tqdm

from app.commands.common import add_normalization_args, seed_of, stage_config
from app.schemas.text import NormalizationConfig, SplitConfig
from app.schemas.tokenizer import ModelMetadata
from app.schemas.trainer import TrainerConfig
from app.services.text_service import iter_corpus, normalize, split_words
from app.services.trainer_service import UnigramTrainer, count_words
from app.utils.tfv1 import model_fingerprint, save_model

logger = logging.getLogger(__name__)


def register(subparsers) -> dict[str, argparse.ArgumentParser]:
    defaults = TrainerConfig()
    parser = subparsers.add_parser("train", help="Train a unigram tokenizer")
    parser.add_argument("--corpus", type=Path, required=True, help="Corpus file or directory of *.txt files")
    parser.add_argument("--out", type=Path, required=True, help="Output TFV1 file")
    parser.add_argument("--vocab-size", type=int, default=defaults.target_vocab_size,
                        help="Number of normal pieces to keep")
    parser.add_argument("--seed-vocab-size", type=int, default=defaults.seed_vocab_size)
    parser.add_argument("--max-piece-len", type=int, default=defaults.max_piece_len)
    parser.add_argument("--em-iterations", type=int, default=defaults.em_iterations)
    parser.add_argument("--prune-fraction", type=float, default=defaults.prune_fraction_per_round)
    parser.add_argument("--char-coverage", type=float, default=defaults.required_char_coverage)
    parser.add_argument("--whole-word-min-count", type=int, default=defaults.whole_word_min_count,
                        help="Words at least this frequent seed as whole pieces")
    parser.add_argument("--backend", choices=("local", "celery"), default=None,
                        help="E-step backend (default: BITOK_ESTEP_BACKEND)")
    parser.add_argument("--shards", type=int, default=None, help="E-step shard count (default: BITOK_SHARD_COUNT)")
    parser.add_argument("--name", default="", help="Model name stored in the metadata sidecar")
    parser.add_argument("--language", action="append", default=None, help="Language tag (repeatable)")
    add_normalization_args(parser, default=False)
    parser.set_defaults(handler=run)
    return {"train": parser}


def run(args: argparse.Namespace) -> int:
    cfg = TrainerConfig(
        target_vocab_size=args.vocab_size,
        seed_vocab_size=max(args.seed_vocab_size, args.vocab_size),
        max_piece_len=args.max_piece_len,
        em_iterations=args.em_iterations,
        prune_fraction_per_round=args.prune_fraction,
        required_char_coverage=args.char_coverage,
        whole_word_min_count=args.whole_word_min_count,
        rng_seed=seed_of(args),
    )
    norm = NormalizationConfig() if args.normalize else None
    stage = stage_config(
        args,
        "train",
        inputs={"corpus": args.corpus},
        trainer=cfg,
        normalization=norm,
        language=",".join(args.language) if args.language else None,
    )

    split_cfg = SplitConfig()
    words = []
    for line in tqdm(iter_corpus(args.corpus), desc="reading corpus", unit="doc", disable=args.quiet):
        words.extend(split_words(normalize(line, norm) if norm else line, split_cfg))
    counts = count_words(words)
    logger.info(f"Corpus: {len(words)} words, {len(counts)} distinct")

    metadata = ModelMetadata(
        name=args.name or args.out.stem,
        languages=list(args.language or []),
        normalization="nfc+fold+html" if norm else "none",
        provenance=stage.provenance(),
    )
    trainer = UnigramTrainer(
        cfg,
        threads=args.threads,
        backend=args.backend,
        shard_count=args.shards,
        progress=not args.quiet,
    )
    model = trainer.train(counts, metadata)
    save_model(model, args.out)
    logger.info(f"Model fingerprint {model_fingerprint(model)}")
    return 0
