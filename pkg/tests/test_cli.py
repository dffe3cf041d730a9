"""End-to-end tests of the command-line entry point."""
import json

import numpy as np
import pytest

from app import __version__
from app.main import main
from app.models.tokenizer import TokenKind
from app.services.embedding_service import load_embeddings
from app.services.tokenizer_service import tokenize
from app.utils import emb1
from app.utils.tfv1 import load_model

ENGLISH = [
    "the cat sat on the mat",
    "a dog and a cat ran home",
    "the sun is hot",
    "we like tea and cake",
]
MIXED = ENGLISH + ["кіт і пес", "the кіт and the пес"]
UKRAINIAN = [
    "кіт спить на дивані",
    "пес бігає у дворі",
    "кіт і пес друзі",
    "мишка їсть сир",
]
UK_SENTENCE = (
    "Я читав статтю на https://www.wikipedia.org про XIV століття, а потім купив iPhone "
    "і написав review про smartphone у своєму блозі."
)
TRAIN_FLAGS = ["--seed-vocab-size", "300", "--max-piece-len", "8"]


def write_lines(path, lines, repeats: int = 1):
    path.write_text("\n".join(lines * repeats) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def corpora(tmp_path):
    return {
        "english": write_lines(tmp_path / "english.txt", ENGLISH, 5),
        "mixed": write_lines(tmp_path / "mixed.txt", MIXED, 5),
        "ukrainian": write_lines(tmp_path / "ukrainian.txt", UKRAINIAN, 5),
    }


@pytest.fixture
def trained(corpora, artifact_dir, capsys):
    """Original (mostly English) and Ukrainian models trained through the CLI."""
    original = artifact_dir / "original.tfv1"
    target = artifact_dir / "uk.tfv1"
    assert main(["--quiet", "train", "--corpus", str(corpora["mixed"]), "--out", str(original),
                 "--vocab-size", "40", "--language", "en", *TRAIN_FLAGS]) == 0
    assert main(["--quiet", "train", "--corpus", str(corpora["ukrainian"]), "--out", str(target),
                 "--vocab-size", "30", "--language", "uk", *TRAIN_FLAGS]) == 0
    capsys.readouterr()
    return original, target


@pytest.fixture
def merged(trained, artifact_dir, capsys):
    original, target = trained
    out = artifact_dir / "merged.tfv1"
    assert main(["--quiet", "merge", "--original", str(original), "--target", str(target),
                 "--out", str(out), "--json"]) == 0
    capsys.readouterr()
    return out


def test_version(capsys):
    """Test --version prints the tool version."""
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_missing_command():
    """Test running without a command is a usage error."""
    assert main([]) == 2


def test_missing_corpus(tmp_path):
    """Test a missing input file exits with the data error code."""
    assert main(["train", "--corpus", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "m.tfv1")]) == 3


def test_malformed_model(tmp_path, corpora):
    """Test a broken model file exits with the data error code."""
    model = tmp_path / "broken.tfv1"
    model.write_text("not a model\n", encoding="utf-8")
    assert main(["eval", "fertility", "--model", str(model), "--corpus", str(corpora["english"])]) == 3


def test_csv_only_for_adoption(trained, corpora):
    """Test csv output is rejected for reports without a csv form."""
    original, _ = trained
    assert main(["eval", "fertility", "--model", str(original), "--corpus", str(corpora["english"]),
                 "--format", "csv"]) == 2


def test_prep_normalizes(tmp_path):
    """Test prep strips tags and stress marks."""
    corpus = tmp_path / "raw.txt"
    corpus.write_text("<b>Приві́т</b> світ\n", encoding="utf-8")
    out = tmp_path / "clean.txt"
    assert main(["--quiet", "prep", "--corpus", str(corpus), "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == "Привіт світ\n"


def test_train_writes_model_and_sidecar(trained):
    """Test train writes a valid model with provenance."""
    original, _ = trained
    model = load_model(original)
    assert len(list(model.normal_entries())) <= 40
    assert model.metadata.languages == ["en"]
    assert model.metadata.provenance.stage == "train"
    assert "corpus" in model.metadata.provenance.input_hashes


def test_train_is_deterministic(corpora, artifact_dir):
    """Test two runs with different worker counts write identical models."""
    first, second = artifact_dir / "a.tfv1", artifact_dir / "b.tfv1"
    base = ["train", "--corpus", str(corpora["ukrainian"]), "--vocab-size", "30", *TRAIN_FLAGS]
    assert main(["--quiet", "--threads", "1", *base, "--out", str(first)]) == 0
    assert main(["--quiet", "--threads", "2", *base, "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_merge_outputs(trained, merged, capsys):
    """Test merge keeps the size and writes the audit and category map."""
    original, _ = trained
    merged_model = load_model(merged)
    assert merged_model.vocab_size == load_model(original).vocab_size
    audit = merged.with_name(merged.name + ".audit.jsonl")
    categories = merged.with_name(merged.name + ".categories.tsv")
    assert len(audit.read_text(encoding="utf-8").splitlines()) == merged_model.vocab_size
    assert len(categories.read_text(encoding="utf-8").splitlines()) == merged_model.vocab_size


def test_merge_text_summary(trained, artifact_dir, capsys):
    """Test the default summary is a table on stdout."""
    original, target = trained
    out = artifact_dir / "merged.tfv1"
    assert main(["--quiet", "merge", "--original", str(original), "--target", str(target), "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "kept_english" in table
    assert "category:new_target" in table


def test_merge_overlap_scope_all(trained, artifact_dir, capsys):
    """Test the literal overlap mode through the CLI keeps the size and reports every disposition."""
    original, target = trained
    out = artifact_dir / "merged_all.tfv1"
    assert main(["--quiet", "merge", "--original", str(original), "--target", str(target), "--out", str(out),
                 "--overlap-scope", "all", "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    size = load_model(original).vocab_size
    assert summary["vocab_size"] == load_model(out).vocab_size == size
    assert load_model(out).metadata.notes["merge"]["overlap_scope"] == "all"
    audit = out.with_name(out.name + ".audit.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(audit) == size


def test_merge_verify_english(trained, corpora, artifact_dir, tmp_path):
    """Test the English check passes on ASCII text and rejects other text."""
    original, target = trained
    out = artifact_dir / "merged.tfv1"
    args = ["--quiet", "merge", "--original", str(original), "--target", str(target), "--out", str(out), "--json"]
    assert main([*args, "--verify-english", str(corpora["english"])]) == 0
    assert main([*args, "--verify-english", str(corpora["ukrainian"])]) == 3


def test_init_embeddings(trained, merged, artifact_dir):
    """Test the initialized matrix keeps existing rows and fills added ones."""
    original, _ = trained
    rows = load_model(original).vocab_size
    values = np.random.default_rng(0).normal(size=(rows, 8)).astype(np.float32)
    source = artifact_dir / "original.emb1"
    source.write_bytes(emb1.dumps(values))
    out = artifact_dir / "merged.emb1"

    assert main(["--quiet", "init-embeddings", "--embeddings", str(source), "--original", str(original),
                 "--merged", str(merged), "--out", str(out)]) == 0
    result = load_embeddings(out)
    assert result.values.shape == (rows, 8)
    assert result.metadata.provenance.stage == "init-embeddings"
    for token_id in range(259):
        assert result.values[token_id].tobytes() == values[token_id].tobytes()


def test_random_init_is_deterministic(trained, merged, artifact_dir):
    """Test random initialization with one seed writes identical bytes."""
    original, _ = trained
    rows = load_model(original).vocab_size
    source = artifact_dir / "original.emb1"
    source.write_bytes(emb1.dumps(np.random.default_rng(1).normal(size=(rows, 4)).astype(np.float32)))
    outputs = [artifact_dir / "r1.emb1", artifact_dir / "r2.emb1"]
    for out in outputs:
        assert main(["--quiet", "--seed", "7", "init-embeddings", "--embeddings", str(source),
                     "--original", str(original), "--merged", str(merged),
                     "--strategy", "random", "--out", str(out)]) == 0
    assert outputs[0].read_bytes() == outputs[1].read_bytes()


def test_eval_fertility_json(trained, corpora, capsys):
    """Test only the report reaches stdout."""
    original, _ = trained
    assert main(["eval", "fertility", "--model", str(original), "--corpus", str(corpora["english"])]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["word_count"] == 5 * sum(len(line.split()) for line in ENGLISH)
    assert report["fertility"] == report["token_count"] / report["word_count"]


def test_eval_parity_text(trained, corpora, capsys):
    """Test the parity text report."""
    original, _ = trained
    assert main(["eval", "parity", "--model", str(original), "--english", str(corpora["english"]),
                 "--target", str(corpora["ukrainian"]), "--format", "text"]) == 0
    assert "parity" in capsys.readouterr().out


def test_eval_vocab(trained, capsys):
    """Test vocabulary counts partition the model."""
    _, target = trained
    assert main(["eval", "vocab", "--model", str(target), "--language", "uk"]) == 0
    stats = json.loads(capsys.readouterr().out)
    parts = ("target", "english", "byte", "control", "other")
    assert sum(stats[k] for k in parts) == stats["vocab_size"]
    assert stats["target"] > 0


def test_eval_vocab_unknown_language(trained):
    """Test a language without a rule pack is a configuration error."""
    _, target = trained
    assert main(["eval", "vocab", "--model", str(target), "--language", "xx"]) == 2


def test_eval_cswr(tmp_path, capsys):
    """Test CSWR of the reference sentence through the CLI."""
    text = write_lines(tmp_path / "generated.txt", [UK_SENTENCE])
    assert main(["eval", "cswr", "--text", str(text), "--language", "uk"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ratio"] == 0.1
    assert report["verdicts"] == []

    assert main(["eval", "cswr", "--text", str(text), "--language", "uk", "--verdicts"]) == 0
    assert len(json.loads(capsys.readouterr().out)["verdicts"]) == 20


def test_eval_newr(tmp_path, capsys):
    """Test NEWR through the CLI."""
    text = write_lines(tmp_path / "generated.txt", ["Кіт спить, а пес бігає і мурчить. Мишка глякає сонцегрій 42."])
    words = write_lines(tmp_path / "words.txt", ["кіт", "спить", "а", "пес", "бігає", "і", "мишка"])
    assert main(["eval", "newr", "--text", str(text), "--wordset", str(words)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ratio"] == 0.3
    assert report["offending"] == ["мурчить", "глякає", "сонцегрій"]


def test_eval_adoption_csv(merged, tmp_path, capsys):
    """Test adoption of a token stream produced by the merged model."""
    model = load_model(merged)
    ids = tokenize(model, " ".join(UKRAINIAN)).ids
    stream = write_lines(tmp_path / "stream.tsv", ["uk\t" + " ".join(map(str, ids))])
    categories = merged.with_name(merged.name + ".categories.tsv")

    assert main(["eval", "adoption", "--stream", str(stream), "--category-map", str(categories),
                 "--format", "csv"]) == 0
    header, row = capsys.readouterr().out.splitlines()
    assert header == "slice,existing,new,english,byte,other"
    name, *fractions = row.split(",")
    assert name == "uk"
    assert sum(float(f) for f in fractions) == pytest.approx(1.0)
    assert all(model[i].kind is not TokenKind.CONTROL for i in ids)


def test_eval_adoption_bad_stream(merged, tmp_path):
    """Test a malformed token stream is a data error."""
    stream = write_lines(tmp_path / "stream.tsv", ["uk\t1 two 3"])
    categories = merged.with_name(merged.name + ".categories.tsv")
    assert main(["eval", "adoption", "--stream", str(stream), "--category-map", str(categories)]) == 3


def run_pipeline(workdir, corpora) -> list:
    """Train, merge, initialize embeddings and evaluate into one directory; returns the artifacts."""
    workdir.mkdir()
    original, target, merged = workdir / "original.tfv1", workdir / "uk.tfv1", workdir / "merged.tfv1"
    flags = ["--quiet", "--seed", "11"]
    assert main([*flags, "train", "--corpus", str(corpora["mixed"]), "--out", str(original),
                 "--vocab-size", "40", "--language", "en", *TRAIN_FLAGS]) == 0
    assert main([*flags, "train", "--corpus", str(corpora["ukrainian"]), "--out", str(target),
                 "--vocab-size", "30", "--language", "uk", *TRAIN_FLAGS]) == 0
    assert main([*flags, "merge", "--original", str(original), "--target", str(target),
                 "--out", str(merged), "--json"]) == 0

    rows = load_model(original).vocab_size
    source = workdir / "original.emb1"
    source.write_bytes(emb1.dumps(np.random.default_rng(0).normal(size=(rows, 8)).astype(np.float32)))
    embeddings = []
    for strategy in ("nachos", "random"):
        out = workdir / f"merged.{strategy}.emb1"
        assert main([*flags, "init-embeddings", "--embeddings", str(source), "--original", str(original),
                     "--merged", str(merged), "--strategy", strategy, "--out", str(out)]) == 0
        embeddings.append(out)

    fertility_report = workdir / "fertility.json"
    assert main(["eval", "fertility", "--model", str(merged), "--corpus", str(corpora["ukrainian"]),
                 "--out", str(fertility_report)]) == 0
    ids = tokenize(load_model(merged), " ".join(UKRAINIAN)).ids
    stream = write_lines(workdir / "stream.tsv", ["uk\t" + " ".join(map(str, ids))])
    categories = merged.with_name(merged.name + ".categories.tsv")
    adoption_report = workdir / "adoption.csv"
    assert main(["eval", "adoption", "--stream", str(stream), "--category-map", str(categories),
                 "--format", "csv", "--out", str(adoption_report)]) == 0

    audit = merged.with_name(merged.name + ".audit.jsonl")
    return [original, target, merged, audit, categories, *embeddings, fertility_report, adoption_report]


def test_pipeline_is_byte_identical_across_runs(corpora, tmp_path, capsys):
    """Test two full runs with one seed write identical models, audits, matrices and reports."""
    first = run_pipeline(tmp_path / "run1", corpora)
    second = run_pipeline(tmp_path / "run2", corpora)
    capsys.readouterr()
    for a, b in zip(first, second):
        assert a.name == b.name
        assert a.read_bytes() == b.read_bytes(), a.name


def test_config_file_defaults(corpora, artifact_dir, tmp_path):
    """Test config values act as defaults for command flags."""
    config = tmp_path / "bitok.toml"
    config.write_text('vocab-size = 25\nseed_vocab_size = 300\nquiet = true\n', encoding="utf-8")
    out = artifact_dir / "cfg.tfv1"
    assert main(["--config", str(config), "train", "--corpus", str(corpora["ukrainian"]), "--out", str(out)]) == 0
    assert len(list(load_model(out).normal_entries())) <= 25


def test_config_file_unknown_key(tmp_path):
    """Test an unknown config key is a configuration error."""
    config = tmp_path / "bitok.toml"
    config.write_text("no-such-option = 1\n", encoding="utf-8")
    assert main(["--config", str(config), "eval", "vocab", "--model", "m", "--language", "uk"]) == 2


def test_config_file_missing(tmp_path):
    """Test a missing config file is a configuration error."""
    assert main(["--config", str(tmp_path / "missing.toml"), "prep", "--corpus", "c", "--out", "o"]) == 2
