"""
Bilingual vocabulary merge.

Builds a tokenizer with the original vocabulary size out of an original
tokenizer and a tokenizer trained on the target language:

    1. English (ASCII-only) pieces, byte and control entries keep their ids
       and scores.
    2. Pieces present in both tokenizers keep the original id and take the
       target tokenizer's score.
    3. Remaining non-English pieces give up their ids, in eviction order,
       to the best target pieces the original lacks.
"""
import logging
import statistics
from pathlib import Path
from typing import Iterable, Optional

from app.exceptions import ConfigError, DataError, ValidationIssue
from app.models.categories import Category, CategoryMap
from app.models.merge_plan import MergePlan, PlacedPiece
from app.models.tokenizer import TokenEntry, TokenizerModel, TokenKind
from app.schemas.merge import (
    AuditRecord,
    Disposition,
    EvictionOrder,
    MergeConfig,
    MergeSummary,
    OverlapScope,
)
from app.services.tokenizer_service import is_english_piece, tokenize
from app.utils.datafiles import PathLike, iter_tsv

logger = logging.getLogger(__name__)


class MergeError(DataError):
    """Raised when the two tokenizers cannot be merged."""
    pass


class MergeConfigError(ConfigError):
    """Raised when the merge configuration contradicts the inputs."""
    pass


class NonAsciiInputError(DataError):
    """Raised when the English invariance check is given non-ASCII text."""
    pass


def _mean_score(model: TokenizerModel) -> Optional[float]:
    scores = [entry.score for entry in model.normal_entries()]
    return statistics.fmean(scores) if scores else None


def _eviction_key(order: EvictionOrder):
    if order is EvictionOrder.LONGEST_FIRST:
        return lambda entry: (-len(entry.piece), entry.score, entry.piece, entry.id)
    return lambda entry: (entry.score, entry.piece, entry.id)


def merge(original: TokenizerModel, target: TokenizerModel, cfg: MergeConfig = MergeConfig()) -> MergePlan:
    """
    Merge a target-language tokenizer into the original one.

    Returns:
        MergePlan whose resulting model has the original vocabulary size

    Raises:
        MergeConfigError: If cfg.target_vocab_size differs from the original size
        MergeError: If two pieces of the result collide
    """
    if cfg.target_vocab_size is not None and cfg.target_vocab_size != original.vocab_size:
        raise MergeConfigError(
            f"Requested vocab size {cfg.target_vocab_size} differs from the original {original.vocab_size}; "
            f"the merge always preserves the original size"
        )

    marker = original.marker
    scope_all = cfg.overlap_scope is OverlapScope.ALL

    # Target pieces in the original's marker convention, first occurrence wins
    target_pieces: dict[str, TokenEntry] = {}
    for entry in target.normal_entries():
        piece = entry.piece.replace(target.marker, marker)
        if piece in target_pieces:
            first = target_pieces[piece]
            raise MergeError(
                f"Target pieces collide as {piece!r}: target id {first.id} and target id {entry.id}"
            )
        target_pieces[piece] = entry

    kept_english, kept_service, overlapped = set(), set(), {}
    unused_slots, candidates = [], []
    for entry in original.entries:
        if entry.kind in (TokenKind.BYTE, TokenKind.CONTROL):
            kept_service.add(entry.id)
            continue
        if entry.kind is TokenKind.UNUSED:
            unused_slots.append(entry)
            continue
        english = is_english_piece(entry.piece, marker)
        shared = target_pieces.get(entry.piece)
        if shared is not None and (scope_all or not english):
            overlapped[entry.id] = (entry.score, shared.score)
        elif english:
            kept_english.add(entry.id)
        else:
            candidates.append(entry)

    present = set(original.piece_index)
    addable = sorted(
        (
            (piece, entry.score)
            for piece, entry in target_pieces.items()
            if piece not in present and (scope_all or not is_english_piece(piece, marker))
        ),
        key=lambda item: (-item[1], item[0]),
    )

    evictable = sorted(unused_slots, key=lambda e: e.id) + sorted(candidates, key=_eviction_key(cfg.eviction_order))
    limit = min(len(evictable), len(addable))
    if cfg.max_new_tokens is not None:
        limit = min(limit, cfg.max_new_tokens)

    evicted = tuple(PlacedPiece(e.id, e.piece, e.score) for e in evictable[:limit])
    added = tuple(PlacedPiece(slot.id, piece, score) for slot, (piece, score) in zip(evicted, addable))
    retained = frozenset(e.id for e in evictable[limit:])

    entries = list(original.entries)
    for token_id, (_, new_score) in overlapped.items():
        entries[token_id] = TokenEntry(token_id, entries[token_id].piece, new_score, TokenKind.NORMAL)
    for placed in added:
        entries[placed.id] = TokenEntry(placed.id, placed.piece, placed.score, TokenKind.NORMAL)

    notes = {
        "original_mean_score": _mean_score(original),
        "target_mean_score": _mean_score(target),
        "overlap_scope": cfg.overlap_scope.value,
        "eviction_order": cfg.eviction_order.value,
        "evicted": len(evicted),
        "added": len(added),
    }
    languages = list(dict.fromkeys([*original.metadata.languages, *target.metadata.languages]))
    metadata = original.metadata.model_copy(update={
        "name": f"{original.metadata.name or 'original'}+{target.metadata.name or 'target'}",
        "languages": languages,
        "notes": {**original.metadata.notes, "merge": notes},
    })
    try:
        resulting = TokenizerModel(entries, metadata)
    except DataError as e:
        raise MergeError("Merged vocabulary is invalid", e.issues) from e

    logger.info(
        f"Merged: {len(kept_english)} English, {len(kept_service)} service, {len(overlapped)} overlapped, "
        f"{len(evicted)} evicted/added, {len(retained)} retained"
    )
    return MergePlan(
        kept_english=frozenset(kept_english),
        kept_service=frozenset(kept_service),
        retained=retained,
        overlapped=overlapped,
        evicted=evicted,
        added=added,
        resulting_model=resulting,
        notes=notes,
    )


def verify_english_invariance(
    original: TokenizerModel,
    merged: TokenizerModel,
    corpus: Iterable[str],
) -> list[dict]:
    """
    Compare token ids of both tokenizers sentence by sentence.

    Returns:
        One {"line", "text", "original", "merged"} record per differing
        sentence; empty when English tokenization is unchanged

    Raises:
        NonAsciiInputError: On the first non-ASCII sentence
    """
    mismatches = []
    for line_number, sentence in enumerate(corpus, start=1):
        if not sentence.isascii():
            raise NonAsciiInputError(
                "English invariance check needs ASCII input",
                [ValidationIssue(line=line_number, message=f"non-ASCII text {sentence[:40]!r}")],
            )
        before = tokenize(original, sentence).ids
        after = tokenize(merged, sentence).ids
        if before != after:
            mismatches.append({"line": line_number, "text": sentence, "original": before, "merged": after})
    if mismatches:
        logger.warning(f"{len(mismatches)} sentence(s) tokenize differently after the merge")
    return mismatches


def emit_category_map(plan: MergePlan) -> CategoryMap:
    """Adoption category of every id of the merged model."""
    model = plan.resulting_model
    added = plan.added_ids
    categories = []
    for entry in model.entries:
        if entry.id in plan.overlapped:
            categories.append(Category.EXISTING_TARGET)
        elif entry.id in added:
            categories.append(Category.NEW_TARGET)
        elif entry.id in plan.kept_english:
            categories.append(Category.ENGLISH)
        elif entry.kind is TokenKind.BYTE:
            categories.append(Category.BYTE)
        else:
            categories.append(Category.OTHER)
    return CategoryMap(tuple(categories))


def audit_records(plan: MergePlan) -> list[AuditRecord]:
    """One audit record per id of the original model, ordered by id."""
    original_by_id = {p.id: p for p in plan.evicted}
    added_by_id = {p.id: p for p in plan.added}
    records = []
    for entry in plan.resulting_model.entries:
        token_id = entry.id
        if token_id in added_by_id:
            old, new = original_by_id[token_id], added_by_id[token_id]
            records.append(AuditRecord(
                id=token_id, disposition=Disposition.REPLACED,
                old_piece=old.piece, new_piece=new.piece, old_score=old.score, new_score=new.score,
            ))
        elif token_id in plan.overlapped:
            old_score, new_score = plan.overlapped[token_id]
            records.append(AuditRecord(
                id=token_id, disposition=Disposition.OVERLAPPED,
                old_piece=entry.piece, old_score=old_score, new_score=new_score,
            ))
        else:
            if token_id in plan.kept_english:
                disposition = Disposition.KEPT_ENGLISH
            elif token_id in plan.kept_service:
                disposition = Disposition.KEPT_SERVICE
            else:
                disposition = Disposition.RETAINED
            records.append(AuditRecord(
                id=token_id, disposition=disposition, old_piece=entry.piece, old_score=entry.score,
            ))
    return records


def write_audit(plan: MergePlan, path: PathLike) -> Path:
    """Write the merge audit as JSON lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        for record in audit_records(plan):
            handle.write(record.model_dump_json(exclude_none=True) + "\n")
    return path


def read_audit(path: PathLike) -> list[AuditRecord]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Merge audit not found: {path}")
    records = []
    issues = []
    with path.open("r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                records.append(AuditRecord.model_validate_json(line))
            except ValueError as e:
                issues.append(ValidationIssue(line=number, message=str(e).splitlines()[0]))
    if issues:
        raise DataError(f"{path}: invalid merge audit", issues)
    return records


def plan_from_audit(records: list[AuditRecord], original: TokenizerModel, merged: TokenizerModel) -> MergePlan:
    """
    Rebuild a MergePlan from its audit records and both models.

    Replacements are listed in id order; the original eviction order is
    not recorded in the audit.

    Raises:
        MergeError: If the audit does not describe these two models
    """
    if merged.vocab_size != original.vocab_size or len(records) != original.vocab_size:
        raise MergeError(
            f"Audit has {len(records)} records for models of sizes {original.vocab_size} and {merged.vocab_size}"
        )
    groups: dict[Disposition, set[int]] = {d: set() for d in Disposition}
    overlapped, evicted, added = {}, [], []
    for expected_id, record in enumerate(records):
        if record.id != expected_id:
            raise MergeError(f"Audit record {expected_id} has id {record.id}")
        groups[record.disposition].add(record.id)
        if record.disposition is Disposition.OVERLAPPED:
            overlapped[record.id] = (record.old_score, record.new_score)
        elif record.disposition is Disposition.REPLACED:
            if merged[record.id].piece != record.new_piece:
                raise MergeError(f"Id {record.id}: audit adds {record.new_piece!r}, merged model holds {merged[record.id].piece!r}")
            evicted.append(PlacedPiece(record.id, record.old_piece, record.old_score))
            added.append(PlacedPiece(record.id, record.new_piece, record.new_score))
    return MergePlan(
        kept_english=frozenset(groups[Disposition.KEPT_ENGLISH]),
        kept_service=frozenset(groups[Disposition.KEPT_SERVICE]),
        retained=frozenset(groups[Disposition.RETAINED]),
        overlapped=overlapped,
        evicted=tuple(evicted),
        added=tuple(added),
        resulting_model=merged,
    )


def summarize(plan: MergePlan) -> MergeSummary:
    model = plan.resulting_model
    return MergeSummary(
        vocab_size=model.vocab_size,
        kept_english=len(plan.kept_english),
        kept_service=len(plan.kept_service),
        retained=len(plan.retained),
        overlapped=len(plan.overlapped),
        evicted=len(plan.evicted),
        added=len(plan.added),
        unused=sum(1 for entry in model.entries if entry.kind is TokenKind.UNUSED),
        categories=emit_category_map(plan).histogram(),
    )


def write_category_map(category_map: CategoryMap, path: PathLike) -> Path:
    """Write `<id>\\t<category>` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        for token_id, category in enumerate(category_map):
            handle.write(f"{token_id}\t{category.value}\n")
    return path


def read_category_map(path: PathLike) -> CategoryMap:
    """
    Read a category map TSV.

    Raises:
        DataError: On unknown categories or ids that are not dense from 0
    """
    issues = []
    categories = []
    for number, columns in iter_tsv(path, min_columns=2):
        try:
            token_id, category = int(columns[0]), Category(columns[1])
        except ValueError as e:
            issues.append(ValidationIssue(line=number, message=str(e)))
            continue
        if token_id != len(categories):
            issues.append(ValidationIssue(line=number, message=f"expected id {len(categories)}, found {token_id}"))
            continue
        categories.append(category)
    if issues:
        raise DataError(f"{path}: invalid category map", issues)
    return CategoryMap(tuple(categories))
