"""
Rule pack and word set loading.

A rule pack is a directory:

    alphabet.tsv       U+XXXX[<TAB>U+YYYY][<TAB>comment] per line
    regex_rules.tsv    <rule name><TAB><pattern> per line
    gazetteers/*.txt   one entry per line, phrases allowed
    manifest.tsv       <relative path><TAB><expected entry count>
    settings.tsv       optional <key><TAB><value>

Packs shipped with the toolkit live under `<data dir>/rulepacks/<language>`.
"""
import logging
from pathlib import Path
from typing import Optional

import regex

from app.config import get_settings
from app.exceptions import ConfigError, DataError, ValidationIssue
from app.models.rulepack import Gazetteer, GazetteerRecognizer, RulePack, WordSet
from app.services.text_service import FOLD_ENTRY, fold_key, iter_word_chars
from app.utils.datafiles import PathLike, iter_entries, iter_tsv, read_entries

logger = logging.getLogger(__name__)

RULEPACK_DIR = "rulepacks"
PROPER_NAMES = "proper_names"
TRUE_VALUES = {"1", "true", "yes", "on"}


class RulePackError(DataError):
    """Raised when a rule pack is missing files or has malformed entries."""
    pass


class UnknownLanguageError(ConfigError):
    """Raised when no rule pack exists for a language tag."""
    pass


def _code_point(value: str) -> Optional[int]:
    match = FOLD_ENTRY.match(value.strip())
    return int(match.group(1), 16) if match else None


def load_alphabet(path: PathLike) -> frozenset[str]:
    """Letters listed in an alphabet file, as single code points or inclusive ranges."""
    letters = set()
    issues = []
    for number, columns in iter_tsv(path):
        start = _code_point(columns[0])
        if start is None:
            issues.append(ValidationIssue(line=number, message=f"expected 'U+XXXX', got {columns[0]!r}"))
            continue
        end = _code_point(columns[1]) if len(columns) > 1 else None
        end = start if end is None else end
        if end < start:
            issues.append(ValidationIssue(line=number, message="range end precedes range start"))
            continue
        letters.update(chr(cp) for cp in range(start, end + 1))
    if issues:
        raise RulePackError(f"{path}: invalid alphabet", issues)
    return frozenset(letters)


def load_regex_rules(path: PathLike) -> list[tuple[str, regex.Pattern]]:
    rules = []
    issues = []
    for number, entry in iter_entries(path):
        name, sep, pattern = entry.partition("\t")
        if not sep or not name.strip() or not pattern:
            issues.append(ValidationIssue(line=number, message="expected '<name><TAB><pattern>'"))
            continue
        try:
            rules.append((name.strip(), regex.compile(pattern)))
        except regex.error as e:
            issues.append(ValidationIssue(line=number, message=f"rule '{name.strip()}': malformed regex: {e}"))
    if issues:
        raise RulePackError(f"{path}: invalid regex rules", issues)
    return rules


def load_gazetteer(path: PathLike) -> Gazetteer:
    """Load a gazetteer, normalizing every entry the way input text is."""
    path = Path(path)
    entries = read_entries(path)
    phrases = set()
    for entry in entries:
        keys = tuple(fold_key(word) for word, _, _ in iter_word_chars(entry))
        if keys:
            phrases.add(keys)
    return Gazetteer(name=path.stem, phrases=frozenset(phrases), size=len(entries))


def load_manifest(path: PathLike) -> dict[str, int]:
    manifest = {}
    for number, columns in iter_tsv(path, min_columns=2):
        try:
            manifest[columns[0].strip()] = int(columns[1])
        except ValueError:
            raise RulePackError(f"{path}: line {number}: count {columns[1]!r} is not an integer")
    return manifest


def load_pack_settings(path: Path) -> dict[str, str]:
    if not path.is_file():
        return {}
    return {columns[0].strip(): columns[1].strip() for _, columns in iter_tsv(path, min_columns=2)}


def load_rulepack(directory: PathLike) -> RulePack:
    """
    Load a rule pack directory and check it against its manifest.

    Raises:
        RulePackError: On missing files, malformed regexes or count mismatches
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise RulePackError(f"Rule pack directory not found: {directory}")
    for required in ("alphabet.tsv", "regex_rules.tsv", "manifest.tsv"):
        if not (directory / required).is_file():
            raise RulePackError(f"{directory}: missing {required}")

    manifest = load_manifest(directory / "manifest.tsv")
    settings = load_pack_settings(directory / "settings.tsv")

    gazetteers = {}
    issues = []
    gazetteer_dir = directory / "gazetteers"
    files = sorted(gazetteer_dir.glob("*.txt")) if gazetteer_dir.is_dir() else []
    for file in files:
        relative = file.relative_to(directory).as_posix()
        gazetteer = load_gazetteer(file)
        expected = manifest.get(relative)
        if expected is None:
            issues.append(ValidationIssue(message=f"{relative} is not declared in manifest.tsv"))
        elif expected != gazetteer.size:
            issues.append(ValidationIssue(
                message=f"{relative}: manifest declares {expected} entries, file has {gazetteer.size}"
            ))
        gazetteers[gazetteer.name] = gazetteer

    regex_rules = load_regex_rules(directory / "regex_rules.tsv")
    for relative, expected in manifest.items():
        if relative == "regex_rules.tsv":
            if expected != len(regex_rules):
                issues.append(ValidationIssue(
                    message=f"regex_rules.tsv: manifest declares {expected} rules, file has {len(regex_rules)}"
                ))
        elif not (directory / relative).is_file() and expected != 0:
            issues.append(ValidationIssue(message=f"{relative}: declared with {expected} entries but missing"))
    if issues:
        raise RulePackError(f"{directory}: rule pack does not match its manifest", issues)

    pack = RulePack(
        language=settings.get("language", directory.name),
        alphabet=load_alphabet(directory / "alphabet.tsv"),
        regex_rules=regex_rules,
        gazetteers=gazetteers,
        split_script_runs=settings.get("split_script_runs", "").lower() in TRUE_VALUES,
        source=directory,
    )
    if PROPER_NAMES in gazetteers:
        pack.add_recognizer(GazetteerRecognizer(gazetteers[PROPER_NAMES]))
    logger.info(f"Loaded rule pack '{pack.language}' from {directory}: {pack.counts()}")
    return pack


def rulepack_for(language: str, data_dir: Optional[PathLike] = None) -> RulePack:
    """
    Load the pack for a language tag from the data directory.

    Raises:
        UnknownLanguageError: If the data directory has no pack for the tag
    """
    root = Path(data_dir or get_settings().DATA_DIR) / RULEPACK_DIR
    directory = root / language
    if not directory.is_dir():
        known = sorted(p.name for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
        raise UnknownLanguageError(
            f"No rule pack for language '{language}' in {root} (available: {', '.join(known) or 'none'})"
        )
    return load_rulepack(directory)


def load_wordset(path: PathLike) -> WordSet:
    """Load a word set, one word per line."""
    path = Path(path)
    words = [entry.strip() for entry in read_entries(path)]
    wordset = WordSet(words, source=str(path))
    logger.info(f"Loaded word set {path} ({wordset.size} unique keys)")
    return wordset
