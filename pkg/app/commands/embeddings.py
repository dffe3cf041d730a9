"""`init-embeddings`: initialize embedding rows of the merged tokenizer's new pieces."""
import argparse
import logging
from pathlib import Path

from app.commands.common import seed_of, stage_config
from app.schemas.embedding import EmbeddingMetadata, InitKind, InitStrategy
from app.services.embedding_service import init_new_embeddings, load_embeddings, save_embeddings
from app.services.merge_service import plan_from_audit, read_audit
from app.utils.tfv1 import load_model

logger = logging.getLogger(__name__)

STRATEGIES = {
    "nachos": InitKind.NACHOS,
    "mean": InitKind.MEAN_ALL,
    "random": InitKind.RANDOM,
}


def register(subparsers) -> dict[str, argparse.ArgumentParser]:
    parser = subparsers.add_parser("init-embeddings", help="Initialize embeddings of added pieces")
    parser.add_argument("--embeddings", type=Path, required=True,
                        help="EMB1 matrix aligned with the original tokenizer")
    parser.add_argument("--original", type=Path, required=True, help="Original tokenizer (TFV1)")
    parser.add_argument("--merged", type=Path, required=True, help="Merged tokenizer (TFV1)")
    parser.add_argument("--audit", type=Path, default=None, help="Merge audit JSONL (default: <merged>.audit.jsonl)")
    parser.add_argument("--strategy", choices=sorted(STRATEGIES), default="nachos")
    parser.add_argument("--random-scale", type=float, default=None,
                        help="Std of random rows (default: std of the existing rows)")
    parser.add_argument("--out", type=Path, required=True, help="Output EMB1 file")
    parser.set_defaults(handler=run)
    return {"init-embeddings": parser}


def run(args: argparse.Namespace) -> int:
    audit = args.audit or args.merged.with_name(args.merged.name + ".audit.jsonl")
    strategy = InitStrategy(
        kind=STRATEGIES[args.strategy],
        rng_seed=seed_of(args),
        random_scale=args.random_scale,
    )
    stage = stage_config(
        args,
        "init-embeddings",
        inputs={"embeddings": args.embeddings, "original": args.original, "merged": args.merged, "audit": audit},
        init=strategy,
    )

    matrix = load_embeddings(args.embeddings)
    original = load_model(args.original)
    merged = load_model(args.merged)
    plan = plan_from_audit(read_audit(audit), original, merged)

    metadata = EmbeddingMetadata(
        name=merged.metadata.name,
        provenance=stage.provenance(),
        notes={"source": matrix.metadata.name, "added": len(plan.added)},
    )
    result = init_new_embeddings(matrix, original, plan, strategy, metadata)
    save_embeddings(result, args.out)
    logger.info(f"Wrote {result.rows}x{result.dims} matrix to {args.out}")
    return 0
