"""Deterministic word-to-subword tokenizer with word-to-token-span maps.

Words longer than ``max_word_chars`` split into exactly two subwords (the
second carries a ``##`` continuation marker), so multi-token word spans
exist by construction. Every token sequence starts with a cls token, and
truncation drops trailing whole words so no span is ever cut in half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import ParallelPair, Sentence

PAD, CLS, MASK, UNK = 0, 1, 2, 3
SPECIALS = {"<pad>": PAD, "<cls>": CLS, "<mask>": MASK, "<unk>": UNK}

Span = tuple[int, int]


@dataclass
class TokenizedPair:
    """Cached tokenization of one parallel pair."""

    pair_id: int
    src_lang: int
    tgt_lang: int
    src_ids: np.ndarray
    src_spans: list[Span]
    tgt_ids: np.ndarray
    tgt_spans: list[Span]


class Tokenizer:
    def __init__(self, id_to_token: list[str], max_word_chars: int = 6, max_seq_len: int = 32):
        self.id_to_token = list(id_to_token)
        self.vocab = {tok: i for i, tok in enumerate(self.id_to_token)}
        self.max_word_chars = max_word_chars
        self.max_seq_len = max_seq_len

    def __len__(self) -> int:
        return len(self.id_to_token)

    @classmethod
    def build(cls, sentences: list[Sentence], max_word_chars: int = 6, max_seq_len: int = 32) -> "Tokenizer":
        """Collect every subword piece in the sentences into a dense id space."""
        pieces = set()
        for s in sentences:
            for w in s.words:
                pieces.update(cls.split_word(w, max_word_chars))
        id_to_token = [t for t, _ in sorted(SPECIALS.items(), key=lambda kv: kv[1])]
        id_to_token.extend(sorted(pieces))
        return cls(id_to_token, max_word_chars, max_seq_len)

    @staticmethod
    def split_word(word: str, max_word_chars: int) -> list[str]:
        if len(word) > max_word_chars:
            return [word[:max_word_chars], "##" + word[max_word_chars:]]
        return [word]

    def word_pieces(self, word: str) -> list[int]:
        return [
            self.vocab.get(piece, UNK)
            for piece in self.split_word(word, self.max_word_chars)
        ]

    def tokenize(self, sentence: Sentence) -> tuple[np.ndarray, list[Span]]:
        """cls-prefixed token ids plus one (start, end) token span per kept word.

        Words whose pieces would overflow ``max_seq_len`` are dropped from the
        end; a sentence whose first word already overflows is an error.
        """
        ids = [CLS]
        spans: list[Span] = []
        for w in sentence.words:
            piece_ids = self.word_pieces(w)
            if len(ids) + len(piece_ids) > self.max_seq_len:
                break
            spans.append((len(ids), len(ids) + len(piece_ids)))
            ids.extend(piece_ids)
        if not spans:
            raise ValueError(
                f"sentence empty after truncation to {self.max_seq_len} tokens"
            )
        return np.asarray(ids, dtype=np.int64), spans

    def tokenize_pair(self, pair: ParallelPair) -> TokenizedPair:
        src_ids, src_spans = self.tokenize(pair.src)
        tgt_ids, tgt_spans = self.tokenize(pair.tgt)
        return TokenizedPair(
            pair.pair_id, pair.src.lang_id, pair.tgt.lang_id,
            src_ids, src_spans, tgt_ids, tgt_spans,
        )
