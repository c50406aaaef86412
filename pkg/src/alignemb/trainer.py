"""Gradient training of the combined objective with periodic dev evaluation.

Batches are drawn from one language pair at a time (round-robin over
pairs), so in-batch ranking negatives always share a target language.
Checkpoint selection uses similarity search on the dev set: the fraction
of sentences whose nearest neighbor by cosine is their own translation,
averaged over both directions and macro-averaged over language pairs. The
whole loop is a pure function of (config, corpus, seed): rerunning yields
an identical metrics log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .alignment import (
    FileProvider,
    GoldProvider,
    Ibm1Provider,
    filter_by_threshold,
    train_ibm1,
    word_align,
)
from .corpus import ParallelPair, by_lang_pair
from .errors import ConfigError, TrainingDiverged
from .model import EncodedSentence, Encoder, EncoderConfig, pad_batch
from .objectives import (
    BatchLosses,
    LossWeights,
    awp_loss_grad,
    combined_loss,
    tr_loss_grad,
    wtr_loss_grad,
)
from .tokenizer import TokenizedPair, Tokenizer

LangPair = tuple[int, int]
PROVIDERS = ("gold", "ibm1", "file")


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 64
    lr: float = 5e-5
    eval_every: int = 200
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 42
    alignment_provider: str = "gold"
    threshold: float = 0.9
    use_language_embedding: bool = False
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    max_word_chars: int = 6
    ibm1_iterations: int = 20
    alignment_file: str | None = None
    weight_decay: float = 0.01
    softmax_scale: float = 1.0
    tr_bidirectional: bool = False

    def validate(self) -> None:
        if self.steps < 0:
            raise ConfigError(f"steps: must be >= 0, got {self.steps}")
        if self.steps > 0 and not self.steps >= self.eval_every >= 1:
            raise ConfigError(
                f"eval_every: need steps >= eval_every >= 1, got {self.steps}/{self.eval_every}"
            )
        if self.batch_size < 2:
            raise ConfigError(f"batch_size: must be >= 2, got {self.batch_size}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold: must be in [0, 1], got {self.threshold}")
        if self.alignment_provider not in PROVIDERS:
            raise ConfigError(f"alignment_provider: unknown provider {self.alignment_provider!r}")
        if self.alignment_provider == "file" and not self.alignment_file:
            raise ConfigError("alignment_file: required for the file provider")
        try:
            self.weights.validate()
        except ValueError as e:
            raise ConfigError(f"weights: {e}") from e


@dataclass
class Checkpoint:
    step: int
    model: Encoder
    dev_metric: float


@dataclass
class MetricsRecord:
    step: int
    tr: float | None = None
    awp: float | None = None
    wtr: float | None = None
    total: float | None = None
    dev_metric: float | None = None


def make_batches(
    pairs_by_lang_pair: dict[LangPair, list[ParallelPair]],
    batch_size: int,
    seed: int,
) -> Iterator[tuple[LangPair, list[ParallelPair]]]:
    """Endless deterministic batch stream, one language pair per batch,
    language pairs taken round-robin.

    A language pair with fewer pairs than the batch size is sampled with
    replacement; otherwise each batch is drawn without replacement.
    """
    keys = sorted(pairs_by_lang_pair)
    if not keys or any(not pairs_by_lang_pair[k] for k in keys):
        raise ValueError("every language pair needs at least one training pair")
    rngs = {k: np.random.default_rng([seed, 1 + i]) for i, k in enumerate(keys)}
    step = 0
    while True:
        lp = keys[step % len(keys)]
        pool = pairs_by_lang_pair[lp]
        rng = rngs[lp]
        if batch_size > len(pool):
            idx = rng.integers(0, len(pool), size=batch_size)
        else:
            idx = rng.choice(len(pool), size=batch_size, replace=False)
        yield lp, [pool[i] for i in idx]
        step += 1


class AdamW:
    """Adaptive moment estimation with decoupled weight decay."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 5e-5,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.01):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * (g * g)
            update = (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            p -= self.lr * (update + self.weight_decay * p)


def _as_groups(pairs) -> dict[LangPair, list[ParallelPair]]:
    if isinstance(pairs, dict):
        return {k: list(v) for k, v in sorted(pairs.items())}
    return by_lang_pair(list(pairs))


def compute_batch(
    model: Encoder,
    tok_pairs: list[TokenizedPair],
    dicts,
    weights: LossWeights,
    *,
    scale: float = 1.0,
    bidirectional: bool = False,
    awp_mode: str = "batched",
    want_grads: bool = True,
) -> tuple[BatchLosses, dict[str, np.ndarray] | None]:
    """One optimization step's losses and parameter gradients.

    Components with zero weight are skipped and logged as 0.0. Gradients
    are already scaled by the loss weights.
    """
    use_lang = model.cfg.use_language_embedding
    ids_s, mask_s = pad_batch([tp.src_ids for tp in tok_pairs])
    ids_t, mask_t = pad_batch([tp.tgt_ids for tp in tok_pairs])
    lang_s = np.asarray([tp.src_lang for tp in tok_pairs]) if use_lang else None
    lang_t = np.asarray([tp.tgt_lang for tp in tok_pairs]) if use_lang else None
    hS, cS = model.forward_batch(ids_s, mask_s, lang_s)
    hT, cT = model.forward_batch(ids_t, mask_t, lang_t)

    grads = model.zero_grads() if want_grads else None
    dhS = np.zeros_like(hS)
    dhT = np.zeros_like(hT)

    tr, dXc, dYc = tr_loss_grad(
        hS[:, 0, :], hT[:, 0, :], scale=scale, bidirectional=bidirectional,
        upstream=weights.alpha,
    )
    dhS[:, 0, :] += dXc
    dhT[:, 0, :] += dYc

    wtr = 0.0
    if weights.gamma > 0.0:
        enc_pairs = [
            (
                EncodedSentence(hS[b, 0], hS[b, : len(tp.src_ids)], tp.src_spans),
                EncodedSentence(hT[b, 0], hT[b, : len(tp.tgt_ids)], tp.tgt_spans),
            )
            for b, tp in enumerate(tok_pairs)
        ]
        wtr, dxs, dys = wtr_loss_grad(enc_pairs, dicts, scale=scale, upstream=weights.gamma)
        for b, d in enumerate(dxs):
            dhS[b, : d.shape[0]] += d
        for b, d in enumerate(dys):
            dhT[b, : d.shape[0]] += d

    if want_grads:
        model.backward_batch(cS, dhS, grads)
        model.backward_batch(cT, dhT, grads)

    awp = 0.0
    if weights.beta > 0.0:
        if want_grads:
            awp = awp_loss_grad(model, tok_pairs, dicts, grads,
                                upstream=weights.beta, mode=awp_mode)
        else:
            from .objectives import awp_loss

            awp = awp_loss(model, tok_pairs, dicts, mode=awp_mode)

    if not all(math.isfinite(v) for v in (tr, awp, wtr)):
        raise TrainingDiverged(f"non-finite loss: tr={tr} awp={awp} wtr={wtr}")
    return combined_loss(tr, awp, wtr, weights, n=len(tok_pairs)), grads


def dev_similarity_search(model: Encoder, dev) -> float:
    """Nearest-neighbor translation accuracy on dev, both directions
    averaged, macro-averaged over language pairs."""
    from .evaluation import retrieval_accuracy

    groups = _as_groups(dev)
    total_pairs = sum(len(v) for v in groups.values())
    if total_pairs < 2:
        raise ValueError("dev similarity search needs at least 2 pairs")
    accs = []
    for lp in sorted(groups):
        pairs = groups[lp]
        X = _embed_sentences(model, [p.src for p in pairs])
        Y = _embed_sentences(model, [p.tgt for p in pairs])
        if len(pairs) == 1:
            accs.append(1.0)
            continue
        accs.append(retrieval_accuracy(X, Y)[2])
    return float(np.mean(accs))


def _embed_sentences(model: Encoder, sentences, chunk: int = 256) -> np.ndarray:
    rows = []
    for start in range(0, len(sentences), chunk):
        part = sentences[start : start + chunk]
        toks = [model.tokenizer.tokenize(s) for s in part]
        langs = [s.lang_id for s in part] if model.cfg.use_language_embedding else None
        rows.extend(e.h_cls for e in model.encode_batch(toks, langs))
    return np.stack(rows)


class _PerLangPairProvider:
    """Dispatches to a per-language-pair aligner (used for the EM provider)."""

    def __init__(self, providers: dict[LangPair, Ibm1Provider]):
        self.providers = providers

    def raw_links(self, pair: ParallelPair):
        return self.providers[(pair.src.lang_id, pair.tgt.lang_id)].raw_links(pair)


def build_provider(cfg: TrainConfig, corpus_by: dict[LangPair, list[ParallelPair]]):
    if cfg.alignment_provider == "gold":
        return GoldProvider()
    if cfg.alignment_provider == "file":
        return FileProvider.from_path(cfg.alignment_file)
    providers = {}
    for lp in sorted(corpus_by):
        fwd, _ = train_ibm1(corpus_by[lp], cfg.ibm1_iterations)
        bwd, _ = train_ibm1(corpus_by[lp], cfg.ibm1_iterations, reverse=True)
        providers[lp] = Ibm1Provider(fwd, bwd)
    return _PerLangPairProvider(providers)


def _snapshot(model: Encoder) -> Encoder:
    return Encoder(model.cfg, model.tokenizer, params={k: v.copy() for k, v in model.params.items()})


def train(cfg: TrainConfig, corpus, dev) -> tuple[Checkpoint, list[MetricsRecord]]:
    """Run the optimization loop and return the best dev checkpoint.

    The word aligner is frozen: alignment dictionaries are produced once
    before the loop (from gold links, the EM aligner, or a file) and
    filtered at the confidence threshold. With ``steps == 0`` the initial
    model is returned with its dev metric.
    """
    cfg.validate()
    corpus_by = _as_groups(corpus)
    dev_by = _as_groups(dev)
    if not any(dev_by.values()):
        raise ValueError("dev set must be non-empty")

    train_pairs = [p for lp in sorted(corpus_by) for p in corpus_by[lp]]
    dev_pairs = [p for lp in sorted(dev_by) for p in dev_by[lp]]
    sentences = [s for p in train_pairs + dev_pairs for s in (p.src, p.tgt)]
    tokenizer = Tokenizer.build(sentences, cfg.max_word_chars, cfg.encoder.max_seq_len)
    lang_count = max(s.lang_id for s in sentences) + 1
    enc_cfg = replace(
        cfg.encoder,
        vocab_size=len(tokenizer),
        use_language_embedding=cfg.use_language_embedding,
        language_count=lang_count,
    )
    model = Encoder(enc_cfg, tokenizer, seed=cfg.seed)

    provider = build_provider(cfg, corpus_by)
    toks: dict[int, TokenizedPair] = {}
    dicts: dict[int, tuple] = {}
    for p in train_pairs:
        fwd, bwd = word_align(p, provider)
        dicts[p.pair_id] = (
            filter_by_threshold(fwd, cfg.threshold),
            filter_by_threshold(bwd, cfg.threshold),
        )
        toks[p.pair_id] = tokenizer.tokenize_pair(p)

    opt = AdamW(model.params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    dev0 = dev_similarity_search(model, dev_by)
    best = Checkpoint(0, _snapshot(model), dev0)
    records = [MetricsRecord(0, dev_metric=dev0)]

    batches = make_batches(corpus_by, cfg.batch_size, cfg.seed)
    for step in range(1, cfg.steps + 1):
        _, batch = next(batches)
        try:
            losses, grads = compute_batch(
                model,
                [toks[p.pair_id] for p in batch],
                [dicts[p.pair_id] for p in batch],
                cfg.weights,
                scale=cfg.softmax_scale,
                bidirectional=cfg.tr_bidirectional,
            )
        except TrainingDiverged as e:
            raise TrainingDiverged(f"step {step}: {e}") from e
        opt.step(model.params, grads)
        dev_metric = None
        if step % cfg.eval_every == 0 or step == cfg.steps:
            dev_metric = dev_similarity_search(model, dev_by)
            if dev_metric > best.dev_metric:
                best = Checkpoint(step, _snapshot(model), dev_metric)
        records.append(MetricsRecord(step, losses.tr, losses.awp, losses.wtr,
                                     losses.total, dev_metric))
    return best, records


def metrics_log_text(records: list[MetricsRecord]) -> str:
    """Tab-separated metrics log; float fields use full-precision repr."""

    def fmt(v):
        return "" if v is None else repr(v)

    return "".join(
        f"{r.step}\t{fmt(r.tr)}\t{fmt(r.awp)}\t{fmt(r.wtr)}\t{fmt(r.total)}\t{fmt(r.dev_metric)}\n"
        for r in records
    )


def write_metrics(records: list[MetricsRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(metrics_log_text(records))
