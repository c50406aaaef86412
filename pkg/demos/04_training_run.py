#!/usr/bin/env python3
"""A small end-to-end training run with dev-based checkpoint selection.

Trains the combined objective on a two-language corpus and prints the
metrics trajectory. The whole run is deterministic given the seed; the
best checkpoint is the one with the highest dev similarity-search
accuracy.
"""

from alignemb import (
    CorpusConfig,
    EncoderConfig,
    LossWeights,
    TrainConfig,
    generate_corpus,
    split_corpus,
    train,
)

corpus = generate_corpus(
    CorpusConfig(languages=[(1, 30, 230)], reorder_prob=0.1, sentence_length_range=(3, 9)),
    seed=1,
)[(0, 1)]
train_pairs, dev_pairs = split_corpus(corpus, 0.13)
print(f"{len(train_pairs)} train / {len(dev_pairs)} dev pairs")

config = TrainConfig(
    steps=120,
    batch_size=16,
    lr=1e-3,
    eval_every=30,
    weights=LossWeights(0.8, 0.1, 0.1),
    seed=42,
    encoder=EncoderConfig(model_dim=32, layers=2, heads=4, ffn_dim=64, max_seq_len=32),
    max_word_chars=5,
)
best, records = train(config, train_pairs, dev_pairs)

print("\nstep   tr      awp     wtr     total   dev")
for r in records:
    if r.step % 30 == 0:
        loss = "" if r.tr is None else f"{r.tr:7.4f} {r.awp:7.4f} {r.wtr:7.4f} {r.total:7.4f}"
        dev = "" if r.dev_metric is None else f"{r.dev_metric:.3f}"
        print(f"{r.step:4d}  {loss:31s} {dev}")

print(f"\nbest checkpoint: step {best.step}, dev similarity search {best.dev_metric:.3f}")
best.model.save("/tmp/demo_checkpoint.npz")
print("saved to /tmp/demo_checkpoint.npz")
