"""`merge`: merge a target-language tokenizer into the original one."""
import argparse
import logging
from pathlib import Path

from app.commands.common import stage_config
from app.exceptions import InvariantViolation, ValidationIssue
from app.models.tokenizer import TokenizerModel
from app.schemas.merge import EvictionOrder, MergeConfig, MergeSummary, OverlapScope
from app.services.merge_service import (
    emit_category_map,
    merge,
    summarize,
    verify_english_invariance,
    write_audit,
    write_category_map,
)
from app.services.text_service import iter_corpus
from app.utils.report import emit, render_table, to_json
from app.utils.tfv1 import load_model, save_model

logger = logging.getLogger(__name__)

SUMMARY_ROWS = ("kept_english", "kept_service", "retained", "overlapped", "evicted", "added", "unused")


def register(subparsers) -> dict[str, argparse.ArgumentParser]:
    parser = subparsers.add_parser("merge", help="Merge a target tokenizer into the original tokenizer")
    parser.add_argument("--original", type=Path, required=True, help="Original tokenizer (TFV1)")
    parser.add_argument("--target", type=Path, required=True, help="Target-language tokenizer (TFV1)")
    parser.add_argument("--out", type=Path, required=True, help="Merged tokenizer (TFV1)")
    parser.add_argument("--audit", type=Path, default=None, help="Audit JSONL (default: <out>.audit.jsonl)")
    parser.add_argument("--category-map", type=Path, default=None,
                        help="Category map TSV (default: <out>.categories.tsv)")
    parser.add_argument("--overlap-scope", choices=[s.value for s in OverlapScope],
                        default=OverlapScope.NON_ASCII_ONLY.value)
    parser.add_argument("--eviction-order", choices=[o.value for o in EvictionOrder],
                        default=EvictionOrder.ASCENDING_SCORE.value)
    parser.add_argument("--max-new-tokens", type=int, default=None)
    parser.add_argument("--vocab-size", type=int, default=None,
                        help="Expected merged size; must equal the original size")
    parser.add_argument("--verify-english", type=Path, default=None,
                        help="ASCII corpus whose tokenization must not change")
    parser.add_argument("--json", action="store_true", help="Print the summary as JSON")
    parser.set_defaults(handler=run)
    return {"merge": parser}


def render_summary(summary: MergeSummary) -> str:
    rows = [(name, getattr(summary, name)) for name in SUMMARY_ROWS]
    rows.append(("vocab_size", summary.vocab_size))
    rows.extend((f"category:{name}", count) for name, count in summary.categories.items())
    return render_table(["disposition", "count"], rows)


def run(args: argparse.Namespace) -> int:
    cfg = MergeConfig(
        overlap_scope=OverlapScope(args.overlap_scope),
        eviction_order=EvictionOrder(args.eviction_order),
        max_new_tokens=args.max_new_tokens,
        target_vocab_size=args.vocab_size,
    )
    stage = stage_config(
        args,
        "merge",
        inputs={"original": args.original, "target": args.target, "verify_english": args.verify_english},
        merge=cfg,
    )

    original = load_model(args.original)
    target = load_model(args.target)
    plan = merge(original, target, cfg)

    if args.verify_english is not None:
        mismatches = verify_english_invariance(original, plan.resulting_model, iter_corpus(args.verify_english))
        if mismatches:
            issues = [ValidationIssue(line=m["line"], message=f"{m['text'][:40]!r} changed") for m in mismatches[:10]]
            raise InvariantViolation(f"{len(mismatches)} English sentence(s) tokenize differently", issues)
        logger.info("English tokenization unchanged on the verification corpus")

    merged = plan.resulting_model
    save_model(
        TokenizerModel(merged.entries, merged.metadata.model_copy(update={"provenance": stage.provenance()})),
        args.out,
    )
    write_audit(plan, args.audit or args.out.with_name(args.out.name + ".audit.jsonl"))
    write_category_map(emit_category_map(plan), args.category_map or args.out.with_name(args.out.name + ".categories.tsv"))

    summary = summarize(plan)
    emit(to_json(summary) if args.json else render_summary(summary))
    return 0
