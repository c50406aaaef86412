#!/usr/bin/env python3
"""Evaluate a trained model: retrieval, mining, similarity correlation,
and the aligned-word view of the embedding layer.

Trains two small models on a corpus with a low-resource pair, one with the
translation-ranking objective alone and one with the full combination, and
compares them the way the headline experiments do: retrieval accuracy on
the low-resource pair plus the cosine between aligned words' embedding
rows (the under-alignment picture).
"""

from alignemb import (
    CorpusConfig,
    EncoderConfig,
    LossWeights,
    TrainConfig,
    aligned_word_cosine,
    dev_similarity_search,
    evaluate_corpus,
    export_projection,
    generate_corpus,
    report_text,
    sample_words_by_frequency,
    split_corpus,
    train,
)
from alignemb.evaluation import report_text  # noqa: F811  (re-exported for clarity)

corpus = generate_corpus(
    CorpusConfig(languages=[(1, 60, 560), (2, 60, 60)], reorder_prob=0.2,
                 fertility_prob=0.1, sentence_length_range=(3, 8)),
    seed=2,
)
high_train, high_dev = split_corpus(corpus[(0, 1)], 0.1)
low_train, low_dev = split_corpus(corpus[(0, 2)], 0.25)
train_pairs = high_train + low_train
dev_pairs = high_dev + low_dev
print(f"high-resource {len(high_train)}/{len(high_dev)}, low-resource {len(low_train)}/{len(low_dev)}")

models = {}
for label, weights in (("tr_only", LossWeights(1, 0, 0)), ("combined", LossWeights(0.8, 0.1, 0.1))):
    cfg = TrainConfig(
        steps=400, batch_size=32, lr=1.5e-3, eval_every=100, weights=weights, seed=42,
        encoder=EncoderConfig(model_dim=48, layers=2, heads=4, ffn_dim=96, max_seq_len=32),
        max_word_chars=5,
    )
    best, _ = train(cfg, train_pairs, dev_pairs)
    models[label] = best.model
    low_acc = dev_similarity_search(best.model, low_dev)
    cos_mean, cos_std = aligned_word_cosine(best.model, low_train + low_dev)
    print(f"{label:9s}: low-resource retrieval {low_acc:.3f}, "
          f"aligned-word cosine {cos_mean:.3f} (std {cos_std:.3f})")

print("\nfull report for the combined model on dev:")
report = evaluate_corpus(models["combined"], dev_pairs)
print(report_text(report))

words = sample_words_by_frequency(train_pairs, 200)
export_projection(models["combined"], words, "/tmp/demo_projection.tsv")
print("wrote 2-D embedding projection for 200 words to /tmp/demo_projection.tsv")
