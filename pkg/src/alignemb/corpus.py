"""Synthetic multilingual parallel corpora with known gold word alignments.

Each synthetic language is a deterministic word-level cipher of a shared
latent vocabulary, so every generated sentence pair carries an exact gold
alignment. Language 0 is the pivot ("English"): it appears on the source
side of every language pair. Optional local reordering and fertility-2
phrases (one source word mapping to a two-word target phrase) make the
alignments non-trivial.

Word surface forms embed the language id as a prefix (e.g. ``"1:w17"``),
so vocabularies are disjoint across languages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParseError

PIVOT_LANG = 0

_M64 = (1 << 64) - 1


@dataclass
class Sentence:
    lang_id: int
    words: list[str]

    def __len__(self) -> int:
        return len(self.words)


@dataclass
class ParallelPair:
    pair_id: int
    src: Sentence
    tgt: Sentence
    # (src_word_idx, tgt_word_idx, score in [0,1]); None when unknown
    gold_links: list[tuple[int, int, float]] | None = None


@dataclass
class CorpusConfig:
    """Corpus recipe: one entry per non-pivot language, paired with the pivot.

    ``languages`` holds (lang_id, vocab_size, pair_count) triples; vocab_size
    is the latent vocabulary size for that language pair and pair_count the
    number of parallel sentences to generate against the pivot.
    """

    languages: list[tuple[int, int, int]] = field(default_factory=list)
    cipher_seed: int = 0
    reorder_prob: float = 0.0
    fertility_prob: float = 0.0
    sentence_length_range: tuple[int, int] = (3, 9)

    def validate(self) -> None:
        if not self.languages:
            raise ConfigError("languages: must list at least one non-pivot language")
        seen = set()
        for lang_id, vocab_size, pair_count in self.languages:
            if lang_id == PIVOT_LANG:
                raise ConfigError(f"languages: lang_id {PIVOT_LANG} is reserved for the pivot")
            if lang_id in seen:
                raise ConfigError(f"languages: duplicate lang_id {lang_id}")
            seen.add(lang_id)
            if vocab_size < 10:
                raise ConfigError(f"languages: vocab_size must be >= 10, got {vocab_size}")
            if pair_count < 1:
                raise ConfigError(f"languages: pair_count must be >= 1, got {pair_count}")
        for name in ("reorder_prob", "fertility_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name}: must be in [0, 1], got {p}")
        lo, hi = self.sentence_length_range
        if not 1 <= lo <= hi:
            raise ConfigError(f"sentence_length_range: need 1 <= min <= max, got ({lo}, {hi})")


def _cipher(lang_id: int, vocab_size: int, cipher_seed: int) -> np.ndarray:
    """Deterministic permutation mapping latent word ids to surface ids."""
    rng = np.random.default_rng([cipher_seed, 7919, lang_id])
    return rng.permutation(vocab_size)


def _surface(lang_id: int, surface_id: int) -> str:
    return f"{lang_id}:w{surface_id}"


def generate_corpus(
    config: CorpusConfig, seed: int
) -> dict[tuple[int, int], list[ParallelPair]]:
    """Generate parallel pairs for every (pivot, language) pair in the config.

    Deterministic given (config, seed). Every pair carries complete gold
    links with score 1.0. Pair ids are unique across the whole corpus.
    """
    config.validate()
    corpus: dict[tuple[int, int], list[ParallelPair]] = {}
    next_id = 0
    lo, hi = config.sentence_length_range
    for lang_id, vocab_size, pair_count in sorted(config.languages):
        src_cipher = _cipher(PIVOT_LANG, vocab_size, config.cipher_seed)
        tgt_cipher = _cipher(lang_id, vocab_size, config.cipher_seed)
        pairs = []
        for i in range(pair_count):
            rng = np.random.default_rng([seed, lang_id, i])
            n = int(rng.integers(lo, hi + 1))
            latent = rng.integers(0, vocab_size, size=n)
            src_words = [_surface(PIVOT_LANG, src_cipher[k]) for k in latent]
            # one chunk of target words per source position; fertility-2
            # chunks carry a suffixed second form of the same latent word
            chunks: list[tuple[int, list[str]]] = []
            for pos, k in enumerate(latent):
                base = _surface(lang_id, tgt_cipher[k])
                if rng.random() < config.fertility_prob:
                    chunks.append((pos, [base, base + "+"]))
                else:
                    chunks.append((pos, [base]))
            t = 0
            while t < len(chunks) - 1:
                if rng.random() < config.reorder_prob:
                    chunks[t], chunks[t + 1] = chunks[t + 1], chunks[t]
                    t += 2
                else:
                    t += 1
            tgt_words: list[str] = []
            links: list[tuple[int, int, float]] = []
            for src_pos, words in chunks:
                for w in words:
                    links.append((src_pos, len(tgt_words), 1.0))
                    tgt_words.append(w)
            links.sort(key=lambda l: (l[0], l[1]))
            pairs.append(
                ParallelPair(
                    pair_id=next_id,
                    src=Sentence(PIVOT_LANG, src_words),
                    tgt=Sentence(lang_id, tgt_words),
                    gold_links=links,
                )
            )
            next_id += 1
        corpus[(PIVOT_LANG, lang_id)] = pairs
    return corpus


def _mix64(x: int) -> int:
    """splitmix64 finalizer; stable across platforms and runs."""
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def split_corpus(
    pairs: list[ParallelPair], dev_fraction: float
) -> tuple[list[ParallelPair], list[ParallelPair]]:
    """Deterministic train/dev split; dev membership depends only on pair_id."""
    if not 0.0 < dev_fraction < 1.0:
        raise ConfigError(f"dev_fraction: must be in (0, 1), got {dev_fraction}")
    n_dev = int(round(len(pairs) * dev_fraction))
    ranked = sorted(pairs, key=lambda p: (_mix64(p.pair_id), p.pair_id))
    dev_ids = {p.pair_id for p in ranked[:n_dev]}
    train = [p for p in pairs if p.pair_id not in dev_ids]
    dev = [p for p in pairs if p.pair_id in dev_ids]
    return train, dev


def by_lang_pair(pairs: list[ParallelPair]) -> dict[tuple[int, int], list[ParallelPair]]:
    grouped: dict[tuple[int, int], list[ParallelPair]] = {}
    for p in pairs:
        grouped.setdefault((p.src.lang_id, p.tgt.lang_id), []).append(p)
    return dict(sorted(grouped.items()))


def save_parallel(pairs: list[ParallelPair], path) -> None:
    """Write pairs as tab-separated records, one per line (UTF-8).

    Fields: pair_id, src_lang, tgt_lang, src words (space-joined), tgt words
    (space-joined), gold links as comma-separated ``i-j:score`` triples
    (empty when links are unknown).
    """
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            links = ""
            if p.gold_links is not None:
                links = ",".join(f"{i}-{j}:{s!r}" for i, j, s in p.gold_links)
            f.write(
                "\t".join(
                    [
                        str(p.pair_id),
                        str(p.src.lang_id),
                        str(p.tgt.lang_id),
                        " ".join(p.src.words),
                        " ".join(p.tgt.words),
                        links,
                    ]
                )
                + "\n"
            )


def load_parallel(path) -> list[ParallelPair]:
    """Inverse of :func:`save_parallel`; an empty links field loads as None."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise ParseError(f"line {lineno}: expected 6 tab-separated fields, got {len(fields)}")
            try:
                pair_id, src_lang, tgt_lang = (int(fields[k]) for k in range(3))
                src_words = fields[3].split(" ")
                tgt_words = fields[4].split(" ")
                if fields[3] == "" or fields[4] == "":
                    raise ValueError("empty sentence")
                links = None
                if fields[5]:
                    links = []
                    for item in fields[5].split(","):
                        ij, score = item.split(":")
                        i, j = ij.split("-")
                        links.append((int(i), int(j), float(score)))
            except ValueError as e:
                raise ParseError(f"line {lineno}: {e}") from e
            if links is not None:
                for i, j, s in links:
                    if not (0 <= i < len(src_words) and 0 <= j < len(tgt_words)):
                        raise ParseError(f"line {lineno}: link {i}-{j} out of sentence bounds")
            pairs.append(
                ParallelPair(
                    pair_id=pair_id,
                    src=Sentence(src_lang, src_words),
                    tgt=Sentence(tgt_lang, tgt_words),
                    gold_links=links,
                )
            )
    return pairs
