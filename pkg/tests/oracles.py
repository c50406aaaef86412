"""Independent brute-force reference implementations used only by tests.

Everything here is written with explicit loops and library primitives,
deliberately sharing no code path with the package under test.
"""

import math

import numpy as np

from alignemb.alignment import AlignmentDict, filter_by_threshold, word_align, GoldProvider
from alignemb.corpus import CorpusConfig, generate_corpus
from alignemb.model import EncodedSentence, Encoder, EncoderConfig
from alignemb.tokenizer import MASK, Tokenizer


def random_loss_batch(rng, n_max=4, len_max=6, model_dim=8, layers=1, use_lang=False):
    """A small random batch: model, tokenized pairs, encodings, filtered dicts.

    Link scores are re-drawn uniformly so threshold filtering produces a mix
    of full, partial and empty dictionaries.
    """
    n = int(rng.integers(2, n_max + 1))
    cfg = CorpusConfig(
        languages=[(1, int(rng.integers(10, 16)), n)],
        cipher_seed=int(rng.integers(0, 1000)),
        reorder_prob=float(rng.choice([0.0, 0.5])),
        fertility_prob=float(rng.choice([0.0, 0.5])),
        sentence_length_range=(1, max(1, len_max // 2)),
    )
    pairs = generate_corpus(cfg, seed=int(rng.integers(0, 10_000)))[(0, 1)]
    sents = [s for p in pairs for s in (p.src, p.tgt)]
    tok = Tokenizer.build(sents, max_word_chars=5, max_seq_len=32)
    enc_cfg = EncoderConfig(
        model_dim=model_dim, layers=layers, heads=2, ffn_dim=2 * model_dim,
        max_seq_len=32, vocab_size=len(tok),
        use_language_embedding=use_lang, language_count=2,
    )
    model = Encoder(enc_cfg, tok, seed=int(rng.integers(0, 10_000)))
    tau = float(rng.choice([0.0, 0.5, 0.9]))
    tok_pairs, enc_pairs, dicts = [], [], []
    for p in pairs:
        noisy = [(i, j, float(rng.uniform())) for i, j, _ in p.gold_links]
        scored = p.__class__(p.pair_id, p.src, p.tgt, noisy)
        fwd, bwd = word_align(scored, GoldProvider())
        dicts.append((filter_by_threshold(fwd, tau), filter_by_threshold(bwd, tau)))
        tp = tok.tokenize_pair(p)
        tok_pairs.append(tp)
        lang_s = p.src.lang_id if use_lang else None
        lang_t = p.tgt.lang_id if use_lang else None
        enc_pairs.append(
            (
                model.encode(tp.src_ids, tp.src_spans, lang_s),
                model.encode(tp.tgt_ids, tp.tgt_spans, lang_t),
            )
        )
    x_cls = np.stack([ex.h_cls for ex, _ in enc_pairs])
    y_cls = np.stack([ey.h_cls for _, ey in enc_pairs])
    return model, tok_pairs, enc_pairs, dicts, x_cls, y_cls


def cos(u, v):
    nu = math.sqrt(math.fsum(a * a for a in u))
    nv = math.sqrt(math.fsum(b * b for b in v))
    return math.fsum(a * b for a, b in zip(u, v)) / (nu * nv)


def brute_tr_loss(x_cls, y_cls, scale=1.0, bidirectional=False):
    N = len(x_cls)
    def one_direction(queries, pool):
        total = 0.0
        for i in range(N):
            sims = [scale * cos(queries[i], pool[j]) for j in range(N)]
            denom = math.fsum(math.exp(s) for s in sims)
            total += -math.log(math.exp(sims[i]) / denom)
        return total / N
    loss = one_direction(x_cls, y_cls)
    if bidirectional:
        loss = 0.5 * (loss + one_direction(y_cls, x_cls))
    return loss


def brute_phi_m(a, b):
    m = min(len(a), len(b))
    return math.fsum(cos(a[t], b[t]) for t in range(m)) / m


def _brute_wtr_sentence(query, target, links, scale):
    total = 0.0
    for j in sorted(links):
        k, _ = links[j]
        if j >= len(query.word_spans) or k >= len(target.word_spans):
            continue
        qs, qe = query.word_spans[j]
        span_q = query.h_tokens[qs:qe]
        sims = []
        for n in range(len(target.word_spans)):
            ns, ne = target.word_spans[n]
            sims.append(scale * brute_phi_m(span_q, target.h_tokens[ns:ne]))
        denom = math.fsum(math.exp(s) for s in sims)
        total += -math.log(math.exp(sims[k]) / denom)
    return total


def brute_wtr_loss(encoded_pairs, dicts, scale=1.0):
    total = 0.0
    for (ex, ey), (fwd, bwd) in zip(encoded_pairs, dicts):
        total += _brute_wtr_sentence(ex, ey, fwd.links, scale)
        total += _brute_wtr_sentence(ey, ex, bwd.links, scale)
    return total / (2 * len(encoded_pairs))


def _brute_awp_sentence(model, ids_q, spans_q, ids_t, spans_t, links, lang):
    total = 0.0
    lang_arg = lang if model.cfg.use_language_embedding else None
    for j in sorted(links):
        k, _ = links[j]
        if j >= len(spans_q) or k >= len(spans_t):
            continue
        masked = ids_q.copy()
        s, e = spans_q[j]
        for pos in range(s, e):
            masked[pos] = MASK
        logits = model.mlm_logits(masked, lang_arg)
        ts, te = spans_t[k]
        m = min(e - s, te - ts)
        for t in range(m):
            row = logits[s + t]
            target = int(ids_t[ts + t])
            mx = float(np.max(row))
            denom = math.fsum(math.exp(float(v) - mx) for v in row)
            total += -(float(row[target]) - mx - math.log(denom))
    return total


def brute_awp_loss(model, tok_pairs, dicts):
    """Per-word masking semantics (the exact mode), summed and averaged 2N."""
    total = 0.0
    for tp, (fwd, bwd) in zip(tok_pairs, dicts):
        total += _brute_awp_sentence(
            model, tp.src_ids, tp.src_spans, tp.tgt_ids, tp.tgt_spans, fwd.links, tp.src_lang
        )
        total += _brute_awp_sentence(
            model, tp.tgt_ids, tp.tgt_spans, tp.src_ids, tp.src_spans, bwd.links, tp.tgt_lang
        )
    return total / (2 * len(tok_pairs))


def oracle_encode(model, ids, lang_id=None):
    """Loop-based transformer forward, structurally independent of the model."""
    p, cfg = model.params, model.cfg
    T, D, H = len(ids), cfg.model_dim, cfg.heads
    dh = D // H

    def layer_norm(row, g, b):
        mu = row.mean()
        var = ((row - mu) ** 2).mean()
        return (row - mu) / np.sqrt(var + 1e-5) * g + b

    x = np.stack([p["tok_emb"][tok] + p["pos_emb"][t] for t, tok in enumerate(ids)])
    if cfg.use_language_embedding:
        x = x + p["lang_emb"][lang_id]
    h = np.stack([layer_norm(r, p["emb_ln_g"], p["emb_ln_b"]) for r in x])
    for i in range(cfg.layers):
        pre = f"l{i}."
        q = np.stack([r @ p[pre + "wq"] + p[pre + "bq"] for r in h])
        k = np.stack([r @ p[pre + "wk"] for r in h])
        v = np.stack([r @ p[pre + "wv"] + p[pre + "bv"] for r in h])
        mixed = np.zeros((T, D))
        for hd in range(H):
            sl = slice(hd * dh, (hd + 1) * dh)
            for t in range(T):
                scores = np.array([q[t, sl] @ k[u, sl] / math.sqrt(dh) for u in range(T)])
                w = np.exp(scores - scores.max())
                w /= w.sum()
                mixed[t, sl] = sum(w[u] * v[u, sl] for u in range(T))
        attn = np.stack([r @ p[pre + "wo"] + p[pre + "bo"] for r in mixed])
        h1 = np.stack(
            [layer_norm(h[t] + attn[t], p[pre + "ln1_g"], p[pre + "ln1_b"]) for t in range(T)]
        )
        out = []
        for t in range(T):
            z1 = h1[t] @ p[pre + "w1"] + p[pre + "b1"]
            g1 = np.array([0.5 * u * (1.0 + math.erf(u / math.sqrt(2.0))) for u in z1])
            out.append(g1 @ p[pre + "w2"] + p[pre + "b2"])
        h = np.stack(
            [layer_norm(h1[t] + out[t], p[pre + "ln2_g"], p[pre + "ln2_b"]) for t in range(T)]
        )
    return h


def oracle_mlm_logits(model, ids, lang_id=None):
    h = oracle_encode(model, ids, lang_id)
    return np.stack([model.params["tok_emb"] @ r + model.params["mlm_bias"] for r in h])


def finite_difference_grads(params, loss_fn, eps=1e-5):
    """Central-difference gradient of loss_fn() wrt every entry of params."""
    out = {}
    for name, p in params.items():
        flat = p.reshape(-1)
        num = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss_fn()
            flat[i] = orig - eps
            lm = loss_fn()
            flat[i] = orig
            num[i] = (lp - lm) / (2 * eps)
        out[name] = num.reshape(p.shape)
    return out


def tensor_rel_err(a, b):
    return float(
        np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    )


def brute_spearman(x, y):
    def avg_ranks(vals):
        order = sorted(range(len(vals)), key=lambda i: vals[i])
        ranks = [0.0] * len(vals)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and vals[order[j + 1]] == vals[order[i]]:
                j += 1
            shared = (i + j) / 2 + 1
            for t in range(i, j + 1):
                ranks[order[t]] = shared
            i = j + 1
        return ranks

    rx, ry = avg_ranks(list(x)), avg_ranks(list(y))
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = math.fsum((a - mx) ** 2 for a in rx)
    vy = math.fsum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy)


def brute_retrieval(src, tgt):
    n = len(src)
    fwd = bwd = 0
    for i in range(n):
        best = max(range(n), key=lambda j: (cos(src[i], tgt[j]), -j))
        fwd += best == i
        best = max(range(n), key=lambda j: (cos(src[j], tgt[i]), -j))
        bwd += best == i
    return fwd / n, bwd / n, (fwd + bwd) / (2 * n)


def brute_mine(A, B, gold, k=4, mode="ratio"):
    nA, nB = len(A), len(B)
    sim = [[cos(A[a], B[b]) for b in range(nB)] for a in range(nA)]
    if mode == "ratio":
        ka, kb = min(k, nB), min(k, nA)
        nn_a = [sum(sorted(sim[a])[-ka:]) / ka for a in range(nA)]
        nn_b = [sum(sorted(sim[a][b] for a in range(nA))[-kb:]) / kb for b in range(nB)]
        score = [[sim[a][b] / ((nn_a[a] + nn_b[b]) / 2) for b in range(nB)] for a in range(nA)]
    else:
        score = sim
    cands = set()
    for a in range(nA):
        cands.add((a, max(range(nB), key=lambda b: (score[a][b], -b))))
    for b in range(nB):
        cands.add((max(range(nA), key=lambda a: (score[a][b], -a)), b))

    def prf(pred):
        hit = len(pred & gold)
        p = hit / len(pred) if pred else 0.0
        r = hit / len(gold)
        f = 2 * p * r / (p + r) if p + r else 0.0
        return p, r, f

    ranked = sorted(cands, key=lambda ab: (-score[ab[0]][ab[1]], ab))
    best = (0.0, 0.0, 0.0)
    for n_keep in range(1, len(ranked) + 1):
        cur = prf(set(ranked[:n_keep]))
        if cur[2] > best[2]:
            best = cur
    return best
