"""Training objectives: translation ranking (TR), aligned word prediction
(AWP), word translation ranking (WTR), and their weighted combination.

TR is an in-batch contrastive loss over cls sentence vectors: each source
sentence must rank its own translation above the other targets in the
batch. WTR plays the same game at the word level, with the other words of
the *same* target sentence as negatives and a pairwise similarity that
clips unequal token spans to their common prefix length. AWP masks an
aligned source word and asks the masked-prediction head to produce the
token ids of its aligned target-language word, again prefix-clipped.

Word-level terms always run in both directions and are averaged over 2N at
batch level; pairs whose alignment dictionaries are empty contribute zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .alignment import AlignmentDict
from .model import EncodedSentence, Encoder
from .tokenizer import MASK, Span, TokenizedPair

DictPair = tuple[AlignmentDict, AlignmentDict]


@dataclass
class LossWeights:
    """Mixing weights for the combined objective (TR, AWP, WTR)."""

    alpha: float = 0.8
    beta: float = 0.1
    gamma: float = 0.1

    def validate(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            w = getattr(self, name)
            if w < 0:
                raise ValueError(f"{name} must be >= 0, got {w}")


@dataclass
class BatchLosses:
    tr: float
    awp: float
    wtr: float
    total: float
    n: int = 0


def combined_loss(tr: float, awp: float, wtr: float, w: LossWeights, n: int = 0) -> BatchLosses:
    """Weighted sum of the three components; keeps the parts for logging."""
    w.validate()
    for name, v in (("tr", tr), ("awp", awp), ("wtr", wtr)):
        if not np.isfinite(v):
            raise ValueError(f"{name} loss is not finite: {v}")
    return BatchLosses(tr, awp, wtr, w.alpha * tr + w.beta * awp + w.gamma * wtr, n)


# ---------------------------------------------------------------------------
# similarity functions


def phi(u, v) -> float:
    """Cosine similarity of two non-zero vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(u @ v / (nu * nv))


def phi_m(a, b) -> float:
    """Pairwise similarity of two token spans: clip the longer span to the
    common prefix length m, then average the position-wise cosines."""
    A = np.atleast_2d(np.asarray(a, dtype=float))
    B = np.atleast_2d(np.asarray(b, dtype=float))
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("empty span")
    m = min(A.shape[0], B.shape[0])
    return float(np.mean([phi(A[t], B[t]) for t in range(m)]))


# ---------------------------------------------------------------------------
# translation ranking (sentence level)


def _normalize_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = np.linalg.norm(x, axis=1)
    if np.any(n == 0.0):
        raise ValueError("zero sentence vector")
    return x / n[:, None], n


def tr_loss_grad(
    x_cls, y_cls, *, scale: float = 1.0, bidirectional: bool = False, upstream: float = 1.0
) -> tuple[float, np.ndarray, np.ndarray]:
    """In-batch softmax ranking loss and its gradients wrt the cls vectors.

    Sources are the queries; the other targets in the batch are the
    negatives. With ``bidirectional`` the target-as-query direction is
    averaged in (off by default).
    """
    X = np.asarray(x_cls, dtype=float)
    Y = np.asarray(y_cls, dtype=float)
    if X.shape != Y.shape or X.ndim != 2:
        raise ValueError(f"mismatched cls batches: {X.shape} vs {Y.shape}")
    N = X.shape[0]
    if N < 2:
        raise ValueError("translation ranking needs a batch of at least 2 pairs")
    Xn, xr = _normalize_rows(X)
    Yn, yr = _normalize_rows(Y)
    S = scale * (Xn @ Yn.T)

    def row_ce(sim):
        z = logsumexp(sim, axis=1)
        loss = float(np.mean(z - np.diag(sim)))
        dS = np.exp(sim - z[:, None])
        dS[np.diag_indices(N)] -= 1.0
        return loss, dS / N

    loss, dS = row_ce(S)
    if bidirectional:
        loss_b, dS_b = row_ce(S.T)
        loss = 0.5 * (loss + loss_b)
        dS = 0.5 * (dS + dS_b.T)
    dS *= scale * upstream
    dXn = dS @ Yn
    dYn = dS.T @ Xn
    dX = (dXn - Xn * (dXn * Xn).sum(1, keepdims=True)) / xr[:, None]
    dY = (dYn - Yn * (dYn * Yn).sum(1, keepdims=True)) / yr[:, None]
    return loss, dX, dY


def tr_loss(x_cls, y_cls, *, scale: float = 1.0, bidirectional: bool = False) -> float:
    return tr_loss_grad(x_cls, y_cls, scale=scale, bidirectional=bidirectional)[0]


# ---------------------------------------------------------------------------
# word translation ranking (word level, in-sentence negatives)


def _span_tensors(h: np.ndarray, spans: list[Span], width: int) -> tuple[np.ndarray, np.ndarray]:
    out = np.zeros((len(spans), width, h.shape[1]))
    lens = np.zeros(len(spans), dtype=np.int64)
    for w, (s, e) in enumerate(spans):
        out[w, : e - s] = h[s:e]
        lens[w] = e - s
    return out, lens


def _norm3(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = np.linalg.norm(x, axis=2)
    safe = np.where(n > 0.0, n, 1.0)
    return x / safe[:, :, None], safe


def _denorm3(dxn: np.ndarray, xn: np.ndarray, n: np.ndarray) -> np.ndarray:
    return (dxn - xn * (dxn * xn).sum(2, keepdims=True)) / n[:, :, None]


def _wtr_direction(
    query: EncodedSentence, target: EncodedSentence, links: dict[int, tuple[int, float]],
    scale: float, want_grad: bool,
):
    """Sum of ranking terms for one direction of one pair.

    Links referencing words dropped by truncation are skipped: they have no
    hidden states to compare.
    """
    dq = np.zeros_like(query.h_tokens) if want_grad else None
    dt = np.zeros_like(target.h_tokens) if want_grad else None
    usable = [
        (j, kv[0])
        for j, kv in sorted(links.items())
        if j < len(query.word_spans) and kv[0] < len(target.word_spans)
    ]
    if not usable:
        return 0.0, dq, dt
    width = max(e - s for s, e in query.word_spans + target.word_spans)
    Q, qlens = _span_tensors(query.h_tokens, query.word_spans, width)
    T, tlens = _span_tensors(target.h_tokens, target.word_spans, width)
    Qn, qn = _norm3(Q)
    Tn, tn = _norm3(T)
    C = np.einsum("ipd,jpd->ijp", Qn, Tn)
    m = np.minimum.outer(qlens, tlens)
    prefix = np.take_along_axis(C.cumsum(axis=2), (m - 1)[:, :, None], axis=2)[:, :, 0]
    phim = prefix / m
    rows = scale * phim
    total = 0.0
    dphim = np.zeros_like(phim)
    for j, k in usable:
        r = rows[j]
        z = float(logsumexp(r))
        total += z - float(r[k])
        if want_grad:
            pr = np.exp(r - z)
            pr[k] -= 1.0
            dphim[j] += pr
    if not want_grad:
        return total, dq, dt
    dC = (scale * dphim / m)[:, :, None] * (np.arange(width)[None, None, :] < m[:, :, None])
    dQ = _denorm3(np.einsum("ijp,jpd->ipd", dC, Tn), Qn, qn)
    dT = _denorm3(np.einsum("ijp,ipd->jpd", dC, Qn), Tn, tn)
    for w, (s, e) in enumerate(query.word_spans):
        dq[s:e] += dQ[w, : e - s]
    for w, (s, e) in enumerate(target.word_spans):
        dt[s:e] += dT[w, : e - s]
    return total, dq, dt


def wtr_pair_terms(
    enc_x: EncodedSentence, enc_y: EncodedSentence, dicts: DictPair, *, scale: float = 1.0
) -> float:
    """Both-direction ranking terms for one pair (unnormalized sum)."""
    fwd, bwd = dicts
    lx, _, _ = _wtr_direction(enc_x, enc_y, fwd.links, scale, want_grad=False)
    ly, _, _ = _wtr_direction(enc_y, enc_x, bwd.links, scale, want_grad=False)
    return lx + ly


def wtr_loss(
    encoded_pairs: list[tuple[EncodedSentence, EncodedSentence]],
    dicts: list[DictPair],
    *,
    scale: float = 1.0,
) -> float:
    """Batch word translation ranking loss, averaged over 2N."""
    if not encoded_pairs:
        raise ValueError("empty batch")
    total = sum(wtr_pair_terms(ex, ey, d, scale=scale) for (ex, ey), d in zip(encoded_pairs, dicts))
    return total / (2 * len(encoded_pairs))


def wtr_loss_grad(
    encoded_pairs: list[tuple[EncodedSentence, EncodedSentence]],
    dicts: list[DictPair],
    *,
    scale: float = 1.0,
    upstream: float = 1.0,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Loss plus per-sentence gradients wrt h_tokens (already scaled by
    upstream / 2N)."""
    if not encoded_pairs:
        raise ValueError("empty batch")
    n = len(encoded_pairs)
    c = upstream / (2 * n)
    total = 0.0
    dxs, dys = [], []
    for (ex, ey), (fwd, bwd) in zip(encoded_pairs, dicts):
        lx, dq1, dt1 = _wtr_direction(ex, ey, fwd.links, scale, want_grad=True)
        ly, dq2, dt2 = _wtr_direction(ey, ex, bwd.links, scale, want_grad=True)
        total += lx + ly
        dxs.append((dq1 + dt2) * c)
        dys.append((dt1 + dq2) * c)
    return total / (2 * n), dxs, dys


# ---------------------------------------------------------------------------
# aligned word prediction (masked cross-lingual token prediction)


@dataclass
class AwpRow:
    """One masked forward-pass input: ids with mask tokens substituted and
    the (position, target token id) pairs to score."""

    ids: np.ndarray
    scored: list[tuple[int, int]]
    lang_id: int


def _awp_row(ids_q, spans_q, ids_t, spans_t, links, lang_id, only: int | None = None) -> AwpRow | None:
    masked = ids_q.copy()
    scored: list[tuple[int, int]] = []
    for j, (k, _) in sorted(links.items()):
        if only is not None and j != only:
            continue
        if j >= len(spans_q) or k >= len(spans_t):
            continue
        s, e = spans_q[j]
        masked[s:e] = MASK
        ts, te = spans_t[k]
        m = min(e - s, te - ts)
        scored.extend((s + t, int(ids_t[ts + t])) for t in range(m))
    if not scored:
        return None
    return AwpRow(masked, scored, lang_id)


def build_awp_rows(
    tok_pairs: list[TokenizedPair], dicts: list[DictPair], *, exact: bool = False
) -> list[AwpRow]:
    """Masked inputs for both directions of every pair.

    Default: one row per (pair, direction) with every aligned word masked at
    once. ``exact``: one row per aligned word with only that word masked,
    matching the per-word definition literally.
    """
    rows: list[AwpRow] = []
    for tp, (fwd, bwd) in zip(tok_pairs, dicts):
        for links, ids_q, spans_q, ids_t, spans_t, lang in (
            (fwd.links, tp.src_ids, tp.src_spans, tp.tgt_ids, tp.tgt_spans, tp.src_lang),
            (bwd.links, tp.tgt_ids, tp.tgt_spans, tp.src_ids, tp.src_spans, tp.tgt_lang),
        ):
            if exact:
                for j in sorted(links):
                    row = _awp_row(ids_q, spans_q, ids_t, spans_t, links, lang, only=j)
                    if row is not None:
                        rows.append(row)
            else:
                row = _awp_row(ids_q, spans_q, ids_t, spans_t, links, lang)
                if row is not None:
                    rows.append(row)
    return rows


def _awp_ce(
    model: Encoder, rows: list[AwpRow], *, upstream: float | None = None,
    grads: dict[str, np.ndarray] | None = None, chunk: int = 256,
) -> float:
    """Total cross-entropy over all scored positions; optionally accumulates
    parameter gradients scaled by ``upstream``."""
    from .model import pad_batch  # local import to avoid cycle at module load

    total = 0.0
    for start in range(0, len(rows), chunk):
        part = rows[start : start + chunk]
        ids, mask = pad_batch([r.ids for r in part])
        lang = None
        if model.cfg.use_language_embedding:
            lang = np.asarray([r.lang_id for r in part])
        h, cache = model.forward_batch(ids, mask, lang)
        logits = model.mlm_from_hidden(h)
        bs = np.asarray([b for b, r in enumerate(part) for _ in r.scored])
        ts = np.asarray([pos for r in part for pos, _ in r.scored])
        ys = np.asarray([tid for r in part for _, tid in r.scored])
        picked = logits[bs, ts]
        z = logsumexp(picked, axis=1)
        total += float(np.sum(z - picked[np.arange(len(ys)), ys]))
        if grads is not None:
            soft = np.exp(picked - z[:, None])
            soft[np.arange(len(ys)), ys] -= 1.0
            dlogits = np.zeros_like(logits)
            dlogits[bs, ts] = soft * upstream
            dh = model.mlm_backward(h, dlogits, grads)
            model.backward_batch(cache, dh, grads)
    return total


def awp_pair_terms(
    model: Encoder, tok_pair: TokenizedPair, dicts: DictPair, *, mode: str = "batched"
) -> float:
    """Both-direction masked-prediction terms for one pair (unnormalized)."""
    rows = build_awp_rows([tok_pair], [dicts], exact=(mode == "exact"))
    return _awp_ce(model, rows)


def awp_loss(
    model: Encoder,
    tok_pairs: list[TokenizedPair],
    dicts: list[DictPair],
    *,
    mode: str = "batched",
) -> float:
    """Batch aligned word prediction loss, averaged over 2N.

    ``batched`` masks all aligned words of a sentence in one forward pass
    (an efficiency approximation); ``exact`` masks one word per pass.
    """
    if mode not in ("batched", "exact"):
        raise ValueError(f"unknown awp mode {mode!r}")
    if not tok_pairs:
        raise ValueError("empty batch")
    rows = build_awp_rows(tok_pairs, dicts, exact=(mode == "exact"))
    return _awp_ce(model, rows) / (2 * len(tok_pairs))


def awp_loss_grad(
    model: Encoder,
    tok_pairs: list[TokenizedPair],
    dicts: list[DictPair],
    grads: dict[str, np.ndarray],
    *,
    upstream: float = 1.0,
    mode: str = "batched",
) -> float:
    if not tok_pairs:
        raise ValueError("empty batch")
    n = len(tok_pairs)
    rows = build_awp_rows(tok_pairs, dicts, exact=(mode == "exact"))
    return _awp_ce(model, rows, upstream=upstream / (2 * n), grads=grads) / (2 * n)
