"""
Unigram language-model trainer.

Training follows the usual EM-with-pruning recipe:
    1. seed a candidate table from character coverage and frequent substrings
    2. run EM rounds (forward-backward expected counts, ML re-estimation)
    3. drop the pieces whose removal costs the least Viterbi likelihood
    4. repeat 2-3 until the target size is reached, then refit once more

Words are trained in the form the tokenizer sees them: with the boundary
marker prepended.
"""
import logging
import math
import random
from collections import Counter
from typing import Iterable, Mapping, Optional, Union

from tqdm import tqdm

from app.config import get_settings
from app.exceptions import ConfigError, DataError, ValidationIssue
from app.models.candidates import CandidateTable
from app.models.text import Word
from app.models.tokenizer import TokenEntry, TokenizerModel, TokenKind, byte_piece
from app.schemas.tokenizer import BOUNDARY_MARKER, ModelMetadata
from app.schemas.trainer import TrainerConfig
from app.utils.parallel import map_ordered

logger = logging.getLogger(__name__)

# Log-probability of a character no candidate covers (byte fallback)
FALLBACK_LOG_PROB = -30.0

# Expected counts below this are treated as zero in the M-step
MIN_EXPECTED_COUNT = 1e-12

CONTROL_PIECES = ("<unk>", "<s>", "</s>")

WordCounts = Mapping[str, int]
Corpus = Union[WordCounts, Iterable[Union[Word, str]]]


class TrainingError(DataError):
    """Raised when the corpus or table cannot produce the requested model."""
    pass


# ---------------------------------------------------------------------------
# Word counts
# ---------------------------------------------------------------------------

def count_words(words: Iterable[Union[Word, str]], marker: Optional[str] = BOUNDARY_MARKER) -> dict[str, int]:
    """
    Count training words, each with the boundary marker prepended.

    Returns:
        Word -> count, ordered by word
    """
    prefix = marker or ""
    counts = Counter(prefix + (w.text if isinstance(w, Word) else w) for w in words)
    return dict(sorted(counts.items()))


def _as_counts(corpus: Corpus) -> dict[str, int]:
    if isinstance(corpus, Mapping):
        return dict(sorted(corpus.items()))
    return count_words(corpus)


# ---------------------------------------------------------------------------
# Lattice math
# ---------------------------------------------------------------------------

def _logsumexp(values: list[float]) -> float:
    top = max(values)
    if top == -math.inf:
        return -math.inf
    return top + math.log(sum(math.exp(v - top) for v in values))


def _edges(word: str, scores: Mapping[str, float], max_len: int, exclude: Optional[str] = None):
    """Lattice edges (start, end, piece or None, score); None marks fallback."""
    edges = []
    n = len(word)
    for i in range(n):
        for length in range(1, min(max_len, n - i) + 1):
            piece = word[i:i + length]
            if piece != exclude and piece in scores:
                edges.append((i, i + length, piece, scores[piece]))
        if word[i] not in scores or word[i] == exclude:
            edges.append((i, i + 1, None, FALLBACK_LOG_PROB))
    return edges


def word_posteriors(word: str, scores: Mapping[str, float], max_len: int) -> tuple[dict[str, float], float]:
    """
    Forward-backward over the segmentation lattice of one word.

    Returns:
        (piece -> expected count for one occurrence, log marginal likelihood)
    """
    n = len(word)
    edges = _edges(word, scores, max_len)
    ending: list[list[tuple]] = [[] for _ in range(n + 1)]
    starting: list[list[tuple]] = [[] for _ in range(n + 1)]
    for edge in edges:
        ending[edge[1]].append(edge)
        starting[edge[0]].append(edge)

    alpha = [-math.inf] * (n + 1)
    alpha[0] = 0.0
    for j in range(1, n + 1):
        alpha[j] = _logsumexp([alpha[i] + s for i, _, _, s in ending[j]])
    beta = [-math.inf] * (n + 1)
    beta[n] = 0.0
    for i in range(n - 1, -1, -1):
        beta[i] = _logsumexp([s + beta[j] for _, j, _, s in starting[i]])

    z = alpha[n]
    posteriors: dict[str, float] = {}
    for i, j, piece, s in edges:
        if piece is None:
            continue
        p = math.exp(alpha[i] + s + beta[j] - z)
        if p > 0.0:
            posteriors[piece] = posteriors.get(piece, 0.0) + p
    return posteriors, z


def shard_expected_counts(
    words: list[tuple[str, int]],
    scores: Mapping[str, float],
    max_len: int,
) -> tuple[dict[str, float], float]:
    """E-step over one shard of (word, count) pairs."""
    counts: dict[str, float] = {}
    loglik = 0.0
    for word, freq in words:
        posteriors, z = word_posteriors(word, scores, max_len)
        loglik += freq * z
        for piece, p in posteriors.items():
            counts[piece] = counts.get(piece, 0.0) + freq * p
    return counts, loglik


def _estep_payload(payload: dict) -> tuple[dict[str, float], float]:
    return shard_expected_counts(
        [tuple(item) for item in payload["words"]], payload["scores"], payload["max_piece_len"]
    )


def viterbi(
    word: str,
    scores: Mapping[str, float],
    max_len: int,
    exclude: Optional[str] = None,
) -> tuple[float, list[str]]:
    """
    Best segmentation of one word under the table.

    Returns:
        (path log-probability, pieces; fallback characters appear as themselves)
    """
    n = len(word)
    best = [-math.inf] * (n + 1)
    back: list[Optional[tuple[int, Optional[str]]]] = [None] * (n + 1)
    best[0] = 0.0
    for i, j, piece, s in _edges(word, scores, max_len, exclude):
        # edges come sorted by start, so best[i] is final here
        candidate = best[i] + s
        if candidate > best[j]:
            best[j] = candidate
            back[j] = (i, piece)

    pieces = []
    j = n
    while j > 0:
        i, piece = back[j]
        pieces.append(piece if piece is not None else word[i:j])
        j = i
    pieces.reverse()
    return best[n], pieces


def _word_losses(
    word: str,
    freq: int,
    scores: Mapping[str, float],
    required: frozenset[str],
    max_len: int,
) -> tuple[dict[str, float], set[str]]:
    """
    Viterbi loss each removable piece on the word's best path causes there.

    Returns:
        (piece -> freq x score drop, every piece on the best or an alternative path)
    """
    score, pieces = viterbi(word, scores, max_len)
    touched = set(pieces)
    losses = {}
    for piece in sorted(set(pieces)):
        if len(piece) < 2 or piece in required or piece not in scores:
            continue
        alternative, alt_pieces = viterbi(word, scores, max_len, exclude=piece)
        losses[piece] = freq * (score - alternative)
        touched.update(alt_pieces)
    return losses, touched


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------

class UnigramTrainer:
    """
    Trains a unigram tokenizer model from word counts.

    E-step work is split into a fixed number of shards whose partial counts
    are always combined in shard order, so the result does not depend on the
    backend or on the number of workers.
    """

    def __init__(
        self,
        cfg: TrainerConfig = TrainerConfig(),
        threads: Optional[int] = None,
        backend: Optional[str] = None,
        shard_count: Optional[int] = None,
        progress: bool = False,
    ):
        settings = get_settings()
        self.cfg = cfg
        self.threads = settings.THREADS if threads is None else threads
        self.backend = backend or settings.ESTEP_BACKEND
        self.shard_count = shard_count or settings.SHARD_COUNT
        self.progress = progress
        if self.backend not in ("local", "celery"):
            raise ConfigError(f"Unknown E-step backend '{self.backend}'; expected 'local' or 'celery'")

    # ------------------------------------------------------------------
    # Seeding
    # ------------------------------------------------------------------

    def covered_characters(self, word_counts: WordCounts) -> frozenset[str]:
        """
        Most frequent characters whose cumulative frequency first reaches
        `required_char_coverage` of all characters.
        """
        chars: Counter = Counter()
        for word, freq in word_counts.items():
            for ch in word:
                chars[ch] += freq
        total = sum(chars.values())
        covered = set()
        running = 0
        for ch, freq in sorted(chars.items(), key=lambda item: (-item[1], item[0])):
            if running >= self.cfg.required_char_coverage * total:
                break
            covered.add(ch)
            running += freq
        dropped = len(chars) - len(covered)
        if dropped:
            logger.info(f"{dropped} rare character(s) left to byte fallback")
        return frozenset(covered)

    def seed_candidates(self, corpus: Corpus) -> CandidateTable:
        """
        Build the initial candidate table.

        Holds every covered character plus the first `seed_vocab_size` of
        `rank_substrings`; scores are log relative frequencies.

        Raises:
            TrainingError: If the corpus holds no words
        """
        word_counts = _as_counts(corpus)
        if not word_counts:
            raise TrainingError("Cannot seed candidates from an empty corpus")

        covered = self.covered_characters(word_counts)
        chars: Counter = Counter()
        for word, freq in word_counts.items():
            for ch in word:
                if ch in covered:
                    chars[ch] += freq

        multi = self.rank_substrings(word_counts, covered)[: self.cfg.seed_vocab_size]
        chosen = {ch: float(chars[ch]) for ch in sorted(covered)}
        chosen.update((p, float(f)) for p, f in multi)

        total = math.fsum(chosen.values())
        scores = {p: math.log(f / total) for p, f in chosen.items()}
        logger.info(f"Seeded {len(chosen)} candidates ({len(covered)} characters, {len(multi)} substrings)")
        return CandidateTable(scores=scores, freqs=chosen, required=covered)

    def rank_substrings(self, word_counts: WordCounts, covered: frozenset[str]) -> list[tuple[str, int]]:
        """
        Multi-character seed candidates, best first.

        Words seen at least `whole_word_min_count` times count as whole
        pieces only; substrings (2..max_piece_len covered characters) are
        counted over the remaining words. A substring is dropped when a
        one-character extension of it is just as frequent. Ranked by
        frequency x length, ties by piece.
        """
        freqs: Counter = Counter()
        whole = set()
        for word, freq in tqdm(word_counts.items(), desc="seeding", disable=not self.progress):
            n = len(word)
            if (
                freq >= self.cfg.whole_word_min_count
                and 1 < n <= self.cfg.max_piece_len
                and all(ch in covered for ch in word)
            ):
                freqs[word] += freq
                whole.add(word)
                continue
            for i in range(n):
                if word[i] not in covered:
                    continue
                for length in range(2, min(self.cfg.max_piece_len, n - i) + 1):
                    if word[i + length - 1] not in covered:
                        break
                    freqs[word[i:i + length]] += freq

        shadowed = set()
        for piece, freq in freqs.items():
            if len(piece) < 3:
                continue
            for inner in (piece[:-1], piece[1:]):
                if inner not in whole and freqs.get(inner) == freq:
                    shadowed.add(inner)
        if shadowed:
            logger.debug(f"Dropped {len(shadowed)} substring(s) no more frequent than an extension")

        return sorted(
            ((p, f) for p, f in freqs.items() if p not in shadowed),
            key=lambda item: (-item[1] * len(item[0]), item[0]),
        )

    # ------------------------------------------------------------------
    # EM
    # ------------------------------------------------------------------

    def shards(self, word_counts: WordCounts) -> list[list[tuple[str, int]]]:
        """Deterministic shard assignment driven by rng_seed."""
        items = sorted(word_counts.items())
        random.Random(self.cfg.rng_seed).shuffle(items)
        count = max(1, min(self.shard_count, len(items)))
        return [items[k::count] for k in range(count)]

    def expected_counts(self, word_counts: WordCounts, table: CandidateTable) -> tuple[dict[str, float], float]:
        """
        E-step: expected piece counts and corpus log-likelihood.

        Characters outside the table contribute a fixed fallback probability
        and receive no counts.
        """
        max_len = table.max_piece_len
        payloads = [
            {"words": shard, "scores": table.scores, "max_piece_len": max_len}
            for shard in self.shards(word_counts)
        ]
        if self.backend == "celery":
            results = self._celery_estep(payloads)
        else:
            results = map_ordered(_estep_payload, payloads, self.threads)

        counts: dict[str, float] = {}
        loglik = 0.0
        for shard_counts, shard_loglik in results:
            loglik += shard_loglik
            for piece, c in shard_counts.items():
                counts[piece] = counts.get(piece, 0.0) + c
        return counts, loglik

    def _celery_estep(self, payloads: list[dict]) -> list[tuple[dict[str, float], float]]:
        from app.tasks.training_tasks import estep_shard

        timeout = get_settings().CELERY_TASK_TIMEOUT
        pending = [estep_shard.delay(payload) for payload in payloads]
        results = []
        for shard, job in enumerate(pending):
            result = job.get(timeout=timeout)
            logger.debug(f"E-step shard {shard} done")
            results.append((result["counts"], result["loglik"]))
        return results

    def maximize(self, counts: Mapping[str, float], table: CandidateTable) -> CandidateTable:
        """
        M-step: maximum-likelihood scores from expected counts.

        Pieces that received no count are dropped unless required; required
        characters keep a vanishing count so their score stays finite.
        """
        kept: dict[str, float] = {}
        for piece in table.scores:
            c = counts.get(piece, 0.0)
            if c < MIN_EXPECTED_COUNT:
                if piece not in table.required:
                    continue
                c = MIN_EXPECTED_COUNT
            kept[piece] = c
        total = math.fsum(kept.values())
        scores = {p: math.log(c / total) for p, c in kept.items()}
        return table.with_scores(scores, kept)

    def em_round(self, corpus: Corpus, table: CandidateTable) -> CandidateTable:
        """One E-step plus M-step; corpus log-likelihood never decreases."""
        word_counts = _as_counts(corpus)
        counts, loglik = self.expected_counts(word_counts, table)
        updated = self.maximize(counts, table)
        logger.debug(f"EM round: log-likelihood {loglik:.6f}, {len(updated)} pieces")
        return updated

    def log_likelihood(self, corpus: Corpus, table: CandidateTable) -> float:
        return self.expected_counts(_as_counts(corpus), table)[1]

    # ------------------------------------------------------------------
    # Pruning
    # ------------------------------------------------------------------

    def piece_losses(self, word_counts: WordCounts, table: CandidateTable) -> dict[str, float]:
        """
        Viterbi likelihood lost by removing each removable piece alone.

        Only words whose best path uses the piece are re-segmented; pieces
        on no best path lose nothing.
        """
        max_len = table.max_piece_len
        contributions: dict[str, list[float]] = {piece: [] for piece in table.removable()}
        for word, freq in word_counts.items():
            losses, _ = _word_losses(word, freq, table.scores, table.required, max_len)
            for piece, loss in losses.items():
                contributions[piece].append(loss)
        return {piece: math.fsum(parts) for piece, parts in contributions.items()}

    def prune_round(self, word_counts: WordCounts, table: CandidateTable) -> CandidateTable:
        """
        Remove the cheapest fraction of removable pieces, stopping at the target.

        Pieces go one at a time and the losses are measured again after each
        removal: two pieces that stand in for each other both look free alone
        but not together. Only words whose best or alternative paths used
        the removed piece are re-segmented.
        """
        removable = table.removable()
        excess = len(table) - self.cfg.target_vocab_size
        if excess <= 0 or not removable:
            return table
        quota = max(1, math.floor(self.cfg.prune_fraction_per_round * len(removable)))
        quota = min(quota, excess, len(removable))

        max_len = table.max_piece_len
        scores = dict(table.scores)
        per_word: dict[str, dict[str, float]] = {}
        # piece -> words whose losses mention it / whose paths touch it
        contributors: dict[str, set[str]] = {piece: set() for piece in removable}
        touching: dict[str, set[str]] = {}

        def measure(word: str):
            losses, touched = _word_losses(word, word_counts[word], scores, table.required, max_len)
            per_word[word] = losses
            for piece in losses:
                contributors[piece].add(word)
            for piece in touched:
                touching.setdefault(piece, set()).add(word)

        for word in word_counts:
            measure(word)

        def total(piece: str) -> float:
            return math.fsum(per_word[w].get(piece, 0.0) for w in sorted(contributors[piece]))

        losses = {piece: total(piece) for piece in removable}
        doomed = []
        for _ in range(quota):
            cheapest = min(losses, key=lambda p: (losses[p], p))
            doomed.append(cheapest)
            del losses[cheapest]
            del scores[cheapest]
            stale = set()
            for word in sorted(touching.pop(cheapest, ())):
                stale.update(per_word[word])
                measure(word)
                stale.update(per_word[word])
            for piece in stale & losses.keys():
                losses[piece] = total(piece)

        logger.debug(f"Pruned {len(doomed)} piece(s); {len(table) - len(doomed)} remain")
        return table.without(doomed)

    def _check_reachable(self, table: CandidateTable):
        if len(table.required) > self.cfg.target_vocab_size:
            blockers = sorted(table.required)
            shown = " ".join(blockers[:50]) + (" ..." if len(blockers) > 50 else "")
            raise TrainingError(
                f"target_vocab_size {self.cfg.target_vocab_size} is below the {len(blockers)} "
                f"characters required for coverage",
                [ValidationIssue(message=f"required characters: {shown}")],
            )

    def prune(self, corpus: Corpus, table: CandidateTable) -> CandidateTable:
        """
        Prune until `target_vocab_size` pieces remain, scores held fixed.

        Raises:
            TrainingError: If the required characters alone exceed the target
        """
        word_counts = _as_counts(corpus)
        self._check_reachable(table)
        while len(table) > self.cfg.target_vocab_size:
            pruned = self.prune_round(word_counts, table)
            if len(pruned) == len(table):
                break
            table = pruned
        return table

    # ------------------------------------------------------------------
    # Full run
    # ------------------------------------------------------------------

    def train(self, corpus: Corpus, metadata: Optional[ModelMetadata] = None) -> TokenizerModel:
        """
        Seed, alternate EM and pruning until the target size, refit, and
        emit a model with control and byte entries installed.
        """
        word_counts = _as_counts(corpus)
        table = self.seed_candidates(word_counts)
        self._check_reachable(table)

        with tqdm(desc="training", unit="round", disable=not self.progress) as bar:
            while True:
                for _ in range(self.cfg.em_iterations):
                    table = self.em_round(word_counts, table)
                if len(table) <= self.cfg.target_vocab_size:
                    break
                pruned = self.prune_round(word_counts, table)
                bar.update(1)
                bar.set_postfix(pieces=len(pruned))
                if len(pruned) == len(table):
                    break
                table = pruned

        logger.info(f"Training finished with {len(table)} pieces")
        return build_model(table, metadata)


def build_model(table: CandidateTable, metadata: Optional[ModelMetadata] = None) -> TokenizerModel:
    """
    Lay a candidate table out as a model: control pieces, then the 256 byte
    pieces, then normal pieces by descending score (ties by piece).
    """
    entries = [TokenEntry(i, piece, 0.0, TokenKind.CONTROL) for i, piece in enumerate(CONTROL_PIECES)]
    base = len(entries)
    entries.extend(TokenEntry(base + v, byte_piece(v), 0.0, TokenKind.BYTE) for v in range(256))
    base = len(entries)
    entries.extend(
        TokenEntry(base + k, piece, score) for k, (piece, score) in enumerate(table.ranked())
    )
    return TokenizerModel(entries, metadata)


def train(corpus: Corpus, cfg: TrainerConfig = TrainerConfig(), **options) -> TokenizerModel:
    """Train a model with a one-off UnigramTrainer."""
    metadata = options.pop("metadata", None)
    return UnigramTrainer(cfg, **options).train(corpus, metadata)
