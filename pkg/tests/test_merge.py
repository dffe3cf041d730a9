"""Tests for the bilingual vocabulary merge."""
import random

import pytest

from app.models.categories import Category
from app.models.tokenizer import TokenizerModel
from app.schemas.merge import Disposition, EvictionOrder, MergeConfig, OverlapScope
from app.services.merge_service import (
    MergeConfigError,
    MergeError,
    NonAsciiInputError,
    audit_records,
    emit_category_map,
    merge,
    plan_from_audit,
    read_audit,
    read_category_map,
    summarize,
    verify_english_invariance,
    write_audit,
    write_category_map,
)
from app.services.metrics_service import fertility
from app.utils.tfv1 import dumps

ORIGINAL_PIECES = {
    "▁a": -1.0, "▁b": -2.0, "▁the": -3.0, "▁cat": -4.0,
    "▁к": -5.0, "▁кі": -6.0, "т": -7.0, "▁пес": -8.0,
}
TARGET_PIECES = {"▁кіт": -1.0, "▁кі": -2.0, "▁пе": -3.0, "с": -4.0}


@pytest.fixture
def original(model_factory):
    return model_factory(ORIGINAL_PIECES, name="orig", languages=("en",))


@pytest.fixture
def target(model_factory):
    return model_factory(TARGET_PIECES, name="uk", languages=("uk",))


def test_worked_example(original, target):
    """Test dispositions of the hand-counted example."""
    plan = merge(original, target)
    assert plan.kept_english == frozenset(range(258, 262))
    assert plan.kept_service == frozenset(range(258))
    assert plan.overlapped == {263: (-6.0, -2.0)}
    assert [p.piece for p in plan.evicted] == ["▁пес", "т", "▁к"]
    assert [(p.id, p.piece, p.score) for p in plan.added] == [(265, "▁кіт", -1.0), (264, "▁пе", -3.0), (262, "с", -4.0)]
    assert plan.retained == frozenset()

    merged = plan.resulting_model
    assert merged.vocab_size == original.vocab_size
    assert merged[263].score == -2.0
    assert merged.id_of("▁кіт") == 265
    assert merged.metadata.name == "orig+uk"
    assert merged.metadata.languages == ["en", "uk"]


def test_summary_counts(original, target):
    """Test the summary matches the hand counts."""
    summary = summarize(merge(original, target))
    assert (summary.kept_english, summary.kept_service, summary.overlapped) == (4, 258, 1)
    assert (summary.evicted, summary.added, summary.retained, summary.unused) == (3, 3, 0, 0)
    assert summary.categories == {
        "existing_target": 1, "new_target": 3, "english": 4, "byte": 256, "other": 2,
    }


def test_ids_are_partitioned(original, target):
    """Test every id has exactly one disposition."""
    plan = merge(original, target)
    groups = [
        plan.kept_english, plan.kept_service, plan.retained,
        frozenset(plan.overlapped), frozenset(p.id for p in plan.evicted),
    ]
    assert sum(len(g) for g in groups) == original.vocab_size
    assert frozenset().union(*groups) == frozenset(range(original.vocab_size))


def test_identity_merge(original, model_factory):
    """Test merging an empty target tokenizer changes nothing."""
    plan = merge(original, model_factory({}))
    assert plan.evicted == ()
    assert dumps(plan.resulting_model) == dumps(original)


def test_score_notes(original, target):
    """Test the merge records mean normal-piece scores of both inputs."""
    notes = merge(original, target).notes
    assert notes["original_mean_score"] == -4.5
    assert notes["target_mean_score"] == -2.5


def test_english_tokenization_unchanged(original, target):
    """Test ASCII sentences tokenize to the same ids after the merge."""
    merged = merge(original, target).resulting_model
    rng = random.Random(0)
    words = ["a", "b", "the", "cat", "dog", "tea", "x1", "A.", "?"]
    corpus = [" ".join(rng.choice(words) for _ in range(rng.randint(1, 12))) for _ in range(10000)]
    assert verify_english_invariance(original, merged, corpus) == []


def test_fertility_falls_as_target_tokens_are_added(model_factory):
    """Test each larger cut of the target table lowers target fertility and leaves English alone."""
    base = model_factory({"▁the": -1.0, "▁cat": -2.0, "▁dog": -3.0, "▁a": -4.0}, unused=4, name="orig")
    table = [("▁кіт", -1.0), ("▁спить", -2.0), ("▁пес", -3.0), ("▁мишка", -4.0)]
    ukrainian = ["кіт спить", "пес і кіт", "мишка спить", "кіт і мишка"]
    english = ["the cat", "a dog", "the dog and a cat"]

    fertilities = []
    for k in (0, 1, 2, 4):
        target = model_factory(table[:k], name=f"uk{k}")
        merged = merge(base, target).resulting_model
        assert merged.vocab_size == base.vocab_size
        assert verify_english_invariance(base, merged, english) == []
        assert fertility(merged, english).fertility == fertility(base, english).fertility
        fertilities.append(fertility(merged, ukrainian).fertility)

    assert all(before > after for before, after in zip(fertilities, fertilities[1:]))


def test_english_check_rejects_non_ascii(original, target):
    """Test the invariance check refuses non-ASCII text."""
    merged = merge(original, target).resulting_model
    with pytest.raises(NonAsciiInputError) as excinfo:
        verify_english_invariance(original, merged, ["the cat", "кіт"])
    assert excinfo.value.issues[0].line == 2


def test_ascii_target_pieces_ignored(original, model_factory):
    """Test ASCII target pieces are neither overlapped nor added by default."""
    target = model_factory({"▁the": -0.5, "▁dog": -0.7, "▁кіт": -1.0})
    plan = merge(original, target)
    assert plan.overlapped == {}
    assert [p.piece for p in plan.added] == ["▁кіт"]
    assert plan.resulting_model[260].score == -3.0


def test_overlap_scope_all(original, model_factory):
    """Test the literal mode overlaps and adds ASCII pieces too."""
    target = model_factory({"▁the": -0.5, "▁dog": -0.7, "▁кіт": -1.0})
    plan = merge(original, target, MergeConfig(overlap_scope=OverlapScope.ALL))
    assert plan.overlapped == {260: (-3.0, -0.5)}
    assert [p.piece for p in plan.added] == ["▁dog", "▁кіт"]
    assert emit_category_map(plan)[260] is Category.EXISTING_TARGET


def test_max_new_tokens(original, target):
    """Test the cap limits evictions and leaves the rest retained."""
    plan = merge(original, target, MergeConfig(max_new_tokens=1))
    assert [p.piece for p in plan.added] == ["▁кіт"]
    assert [p.piece for p in plan.evicted] == ["▁пес"]
    assert plan.retained == frozenset({262, 264})


def test_longest_first_eviction(original, target):
    """Test longest pieces are evicted first when requested."""
    plan = merge(original, target, MergeConfig(eviction_order=EvictionOrder.LONGEST_FIRST))
    assert [p.piece for p in plan.evicted] == ["▁пес", "▁к", "т"]


def test_unused_slots_evicted_first(model_factory, target):
    """Test unused slots are refilled before normal pieces are evicted."""
    original = model_factory(ORIGINAL_PIECES, unused=2)
    plan = merge(original, target)
    assert [p.id for p in plan.evicted[:2]] == [266, 267]
    assert [p.piece for p in plan.evicted] == ["<unused0>", "<unused1>", "▁пес"]


def test_target_vocab_size_mismatch(original, target):
    """Test asking for a different size is a configuration error."""
    with pytest.raises(MergeConfigError):
        merge(original, target, MergeConfig(target_vocab_size=original.vocab_size + 1))


def test_marker_translation(original, model_factory):
    """Test target pieces are rewritten to the original's boundary marker."""
    base = model_factory({"_кі": -2.0, "_кіт": -1.0})
    target = TokenizerModel(base.entries, base.metadata.model_copy(update={"boundary_marker": "_"}))
    plan = merge(original, target)
    assert plan.overlapped == {263: (-6.0, -2.0)}
    assert [p.piece for p in plan.added] == ["▁кіт"]


def test_colliding_target_pieces(original, model_factory):
    """Test two target pieces that translate to the same text are rejected."""
    base = model_factory({"_кі": -2.0, "▁кі": -1.0})
    target = TokenizerModel(base.entries, base.metadata.model_copy(update={"boundary_marker": "_"}))
    with pytest.raises(MergeError):
        merge(original, target)


def test_audit_round_trip(original, target, artifact_dir):
    """Test the audit has one record per id and rebuilds the plan."""
    plan = merge(original, target)
    path = write_audit(plan, artifact_dir / "merge.audit.jsonl")
    records = read_audit(path)
    assert len(records) == original.vocab_size
    assert records[265].disposition is Disposition.REPLACED
    assert (records[265].old_piece, records[265].new_piece) == ("▁пес", "▁кіт")
    assert records[263].disposition is Disposition.OVERLAPPED
    assert records == audit_records(plan)

    rebuilt = plan_from_audit(records, original, plan.resulting_model)
    assert rebuilt.added_ids == plan.added_ids
    assert rebuilt.overlapped == plan.overlapped
    assert rebuilt.kept_english == plan.kept_english


def test_audit_lines_are_compact(original, target, artifact_dir):
    """Test absent fields are left out of audit lines."""
    path = write_audit(merge(original, target), artifact_dir / "merge.audit.jsonl")
    first = path.read_text(encoding="utf-8").splitlines()[0]
    assert first == '{"id":0,"disposition":"kept_service","old_piece":"<unk>","old_score":0.0}'


def test_plan_from_audit_rejects_other_model(original, target, model_factory):
    """Test an audit does not rebuild a plan for a model of another size."""
    plan = merge(original, target)
    with pytest.raises(MergeError):
        plan_from_audit(audit_records(plan), original, model_factory(ORIGINAL_PIECES, unused=1))


def test_category_map_round_trip(original, target, artifact_dir):
    """Test the category map TSV is read back unchanged."""
    category_map = emit_category_map(merge(original, target))
    path = write_category_map(category_map, artifact_dir / "categories.tsv")
    assert path.read_text(encoding="utf-8").splitlines()[265] == "265\tnew_target"
    assert read_category_map(path) == category_map
