"""Bidirectional word-alignment dictionaries and a built-in IBM Model 1 aligner.

A parallel pair yields two directional dictionaries mapping a word index on
one side to its single best-aligned word index on the other side, each link
carrying a confidence score in [0, 1]. Links come from one of three
providers: the pair's gold links, an EM-trained IBM Model 1 translation
table, or a precomputed alignment file. Sub-threshold links are dropped
before the dictionaries feed any training objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .corpus import ParallelPair
from .errors import ParseError

RawLinks = list[tuple[int, int, float]]


@dataclass
class AlignmentDict:
    """Directional map src word index -> (tgt word index, score)."""

    src_lang: int
    tgt_lang: int
    links: dict[int, tuple[int, float]] = field(default_factory=dict)

    def lookup(self, src_idx: int) -> tuple[int, float] | None:
        return self.links.get(src_idx)

    def __len__(self) -> int:
        return len(self.links)


@dataclass
class TranslationTable:
    """Lexical translation probabilities t[src_word][tgt_word] = p(tgt|src)."""

    t: dict[str, dict[str, float]] = field(default_factory=dict)

    def prob(self, src_word: str, tgt_word: str) -> float:
        return self.t.get(src_word, {}).get(tgt_word, 0.0)


def _best_per_source(raw: RawLinks) -> dict[int, tuple[int, float]]:
    # one target per source index: highest score wins, then lowest target index
    best: dict[int, tuple[int, float]] = {}
    for i, j, s in sorted(raw, key=lambda l: (l[0], -l[2], l[1])):
        if i not in best:
            best[i] = (j, s)
    return best


def build_dicts(
    pair: ParallelPair, raw: RawLinks
) -> tuple[AlignmentDict, AlignmentDict]:
    """Turn symmetric scored links (src_idx, tgt_idx, score) into both directional dicts."""
    for i, j, _ in raw:
        if not (0 <= i < len(pair.src) and 0 <= j < len(pair.tgt)):
            raise ValueError(f"link {i}-{j} out of bounds for pair {pair.pair_id}")
    fwd = AlignmentDict(pair.src.lang_id, pair.tgt.lang_id, _best_per_source(raw))
    bwd = AlignmentDict(
        pair.tgt.lang_id, pair.src.lang_id, _best_per_source([(j, i, s) for i, j, s in raw])
    )
    return fwd, bwd


class GoldProvider:
    """Aligns from the pair's own gold links."""

    def raw_links(self, pair: ParallelPair) -> RawLinks:
        if pair.gold_links is None:
            raise ValueError(f"pair {pair.pair_id} has no gold links")
        return list(pair.gold_links)


class Ibm1Provider:
    """Aligns with a pair of EM-trained translation tables, one per direction."""

    def __init__(self, fwd_table: TranslationTable, bwd_table: TranslationTable):
        self.fwd_table = fwd_table
        self.bwd_table = bwd_table

    def raw_links(self, pair: ParallelPair) -> RawLinks:
        fwd = align_ibm1(self.fwd_table, pair.src.words, pair.tgt.words)
        bwd = align_ibm1(self.bwd_table, pair.tgt.words, pair.src.words)
        merged = {(i, j): s for i, j, s in fwd}
        for j, i, s in bwd:
            if (i, j) not in merged or s > merged[(i, j)]:
                merged[(i, j)] = s
        return [(i, j, s) for (i, j), s in sorted(merged.items())]


class FileProvider:
    """Aligns from precomputed scored links keyed by (pair_id, direction).

    Pairs or directions absent from the file yield empty dictionaries.
    """

    def __init__(self, links: dict[tuple[int, tuple[int, int]], RawLinks]):
        self.links = links

    @classmethod
    def from_path(cls, path) -> "FileProvider":
        return cls(load_alignments(path))

    def directional_links(self, pair: ParallelPair, direction: tuple[int, int]) -> RawLinks:
        return self.links.get((pair.pair_id, direction), [])


def word_align(
    pair: ParallelPair, provider
) -> tuple[AlignmentDict, AlignmentDict]:
    """Produce the (src->tgt, tgt->src) dictionaries for one pair."""
    if isinstance(provider, FileProvider):
        fwd_dir = (pair.src.lang_id, pair.tgt.lang_id)
        bwd_dir = (pair.tgt.lang_id, pair.src.lang_id)
        # each record's links are already indexed (own-side, other-side)
        fwd = AlignmentDict(*fwd_dir, _best_per_source(provider.directional_links(pair, fwd_dir)))
        bwd = AlignmentDict(*bwd_dir, _best_per_source(provider.directional_links(pair, bwd_dir)))
        for d, n_src, n_tgt in ((fwd, len(pair.src), len(pair.tgt)),
                                (bwd, len(pair.tgt), len(pair.src))):
            for i, (j, _) in d.links.items():
                if not (0 <= i < n_src and 0 <= j < n_tgt):
                    raise ValueError(f"link {i}-{j} out of bounds for pair {pair.pair_id}")
        return fwd, bwd
    return build_dicts(pair, provider.raw_links(pair))


def filter_by_threshold(d: AlignmentDict, tau: float = 0.9) -> AlignmentDict:
    """Keep only links with score >= tau. Idempotent; monotone in tau."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {tau}")
    kept = {i: (j, s) for i, (j, s) in d.links.items() if s >= tau}
    return AlignmentDict(d.src_lang, d.tgt_lang, kept)


def train_ibm1(
    pairs: list[ParallelPair], iterations: int, reverse: bool = False
) -> tuple[TranslationTable, list[float]]:
    """EM-train lexical translation probabilities p(tgt_word | src_word).

    With ``reverse`` the roles of the two sides are swapped, giving the
    table for the opposite direction. Returns the table and the corpus
    log-likelihood after each iteration (non-decreasing).
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if not pairs:
        raise ValueError("empty corpus")
    bitext = []
    for p in pairs:
        src, tgt = p.src.words, p.tgt.words
        if reverse:
            src, tgt = tgt, src
        bitext.append((src, tgt))

    # uniform init over co-occurring target words
    cooc: dict[str, set[str]] = {}
    for src, tgt in bitext:
        for sw in src:
            cooc.setdefault(sw, set()).update(tgt)
    t = {sw: {tw: 1.0 / len(tws) for tw in sorted(tws)} for sw, tws in sorted(cooc.items())}

    log_likelihoods = []
    for _ in range(iterations):
        counts: dict[str, dict[str, float]] = {sw: {} for sw in t}
        ll = 0.0
        for src, tgt in bitext:
            for tw in tgt:
                denom = sum(t[sw].get(tw, 0.0) for sw in src)
                ll += math.log(denom) - math.log(len(src))
                for sw in src:
                    p_st = t[sw].get(tw, 0.0)
                    if p_st > 0.0:
                        row = counts[sw]
                        row[tw] = row.get(tw, 0.0) + p_st / denom
        log_likelihoods.append(ll)
        for sw, row in counts.items():
            total = sum(row.values())
            if total > 0.0:
                t[sw] = {tw: c / total for tw, c in row.items()}
    return TranslationTable(t), log_likelihoods


def align_ibm1(
    table: TranslationTable, src_words: list[str], tgt_words: list[str]
) -> RawLinks:
    """Best target word per source word, scored by the posterior over the
    target sentence's candidate words. Unknown source words yield no link."""
    links: RawLinks = []
    for i, sw in enumerate(src_words):
        row = table.t.get(sw)
        if not row:
            continue
        probs = [row.get(tw, 0.0) for tw in tgt_words]
        z = sum(probs)
        if z <= 0.0:
            continue
        best_j = max(range(len(tgt_words)), key=lambda j: (probs[j], -j))
        links.append((i, best_j, probs[best_j] / z))
    return links


def log_likelihood(table: TranslationTable, pairs: list[ParallelPair], reverse: bool = False) -> float:
    """Corpus log-likelihood of the target sides under the lexical model."""
    ll = 0.0
    for p in pairs:
        src, tgt = (p.tgt.words, p.src.words) if reverse else (p.src.words, p.tgt.words)
        for tw in tgt:
            denom = sum(table.prob(sw, tw) for sw in src)
            if denom <= 0.0:
                return float("-inf")
            ll += math.log(denom) - math.log(len(src))
    return ll


def save_alignments(
    links: dict[tuple[int, tuple[int, int]], RawLinks], path
) -> None:
    """One record per (pair, direction): ``pair_id<TAB>a→b<TAB>i-j:score ...``."""
    with open(path, "w", encoding="utf-8") as f:
        for (pair_id, (a, b)), raw in sorted(links.items()):
            body = " ".join(f"{i}-{j}:{s!r}" for i, j, s in raw)
            f.write(f"{pair_id}\t{a}→{b}\t{body}\n")


def load_alignments(path) -> dict[tuple[int, tuple[int, int]], RawLinks]:
    """Inverse of :func:`save_alignments`."""
    out: dict[tuple[int, tuple[int, int]], RawLinks] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(f"line {lineno}: expected 3 tab-separated fields, got {len(fields)}")
            try:
                pair_id = int(fields[0])
                a, b = fields[1].split("→")
                direction = (int(a), int(b))
                raw: RawLinks = []
                for item in fields[2].split():
                    ij, score = item.split(":")
                    i, j = ij.split("-")
                    raw.append((int(i), int(j), float(score)))
            except ValueError as e:
                raise ParseError(f"line {lineno}: {e}") from e
            out[(pair_id, direction)] = raw
    return out
