#!/usr/bin/env python3
"""Walk through the three objectives on a small batch, with closed forms.

Translation ranking (TR) ranks each sentence's translation against the
other targets in the batch by cls cosine. Word translation ranking (WTR)
ranks an aligned word against the other words of the same target sentence
with a prefix-clipped span similarity. Aligned word prediction (AWP) masks
an aligned source word and predicts its target word's token ids.
"""

import math

import numpy as np

from alignemb import (
    CorpusConfig,
    Encoder,
    EncoderConfig,
    GoldProvider,
    LossWeights,
    Tokenizer,
    awp_loss,
    combined_loss,
    filter_by_threshold,
    generate_corpus,
    phi_m,
    tr_loss,
    word_align,
    wtr_loss,
)

# closed forms first
x = np.tile([1.0, 0.0], (4, 1))
print(f"TR with all-equal similarities, N=4: {tr_loss(x, x):.6f}  (ln 4 = {math.log(4):.6f})")
a = np.array([[1.0, 0.0], [0.0, 1.0], [3.0, 3.0]])
b = np.array([[1.0, 0.0], [1.0, 0.0]])
print(f"span similarity with clipping, 3x2 rows: {phi_m(a, b):.3f}  (mean of cos 1 and 0)")

# a real batch from a generated corpus
pairs = generate_corpus(
    CorpusConfig(languages=[(1, 25, 8)], fertility_prob=0.4, sentence_length_range=(3, 6)),
    seed=5,
)[(0, 1)]
sents = [s for p in pairs for s in (p.src, p.tgt)]
tok = Tokenizer.build(sents, max_word_chars=5, max_seq_len=32)
model = Encoder(
    EncoderConfig(model_dim=32, layers=2, heads=4, ffn_dim=64, max_seq_len=32,
                  vocab_size=len(tok)),
    tok, seed=0,
)

tok_pairs = [tok.tokenize_pair(p) for p in pairs]
dicts = [
    tuple(filter_by_threshold(d, 0.9) for d in word_align(p, GoldProvider()))
    for p in pairs
]
enc_pairs = [
    (model.encode(tp.src_ids, tp.src_spans), model.encode(tp.tgt_ids, tp.tgt_spans))
    for tp in tok_pairs
]
x_cls = np.stack([ex.h_cls for ex, _ in enc_pairs])
y_cls = np.stack([ey.h_cls for _, ey in enc_pairs])

tr = tr_loss(x_cls, y_cls)
wtr = wtr_loss(enc_pairs, dicts)
awp = awp_loss(model, tok_pairs, dicts)
print(f"\nrandom-init batch of {len(pairs)}:")
print(f"  tr  = {tr:.4f}   (ln N = {math.log(len(pairs)):.4f} at uniform similarity)")
print(f"  awp = {awp:.4f}  (per masked token about ln |V| = {math.log(len(tok)):.4f})")
print(f"  wtr = {wtr:.4f}")

losses = combined_loss(tr, awp, wtr, LossWeights(0.8, 0.1, 0.1), n=len(pairs))
print(f"  weighted total (0.8, 0.1, 0.1): {losses.total:.4f}")
