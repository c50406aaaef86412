"""Small trainable transformer encoder in numpy with hand-written backprop.

The encoder returns per-token final-layer hidden states plus the cls state
used as the sentence vector (no pooler projection). A masked-prediction
head ties its output weights to the input token embedding. All math is
float64 and fully deterministic; eval-mode encoding is read-only and safe
to run concurrently.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import erf

from .corpus import Sentence
from .errors import ConfigError
from .tokenizer import MASK, Span, Tokenizer

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_NEG_INF = -1e9


@dataclass
class EncoderConfig:
    model_dim: int = 64
    layers: int = 2
    heads: int = 4
    ffn_dim: int = 128
    max_seq_len: int = 32
    vocab_size: int = 0
    use_language_embedding: bool = False
    language_count: int = 0

    def validate(self) -> None:
        if self.model_dim < 1 or self.model_dim % self.heads != 0:
            raise ConfigError(f"model_dim: must be divisible by heads, got {self.model_dim}/{self.heads}")
        if self.max_seq_len < 4:
            raise ConfigError(f"max_seq_len: must be >= 4, got {self.max_seq_len}")
        if self.layers < 1:
            raise ConfigError(f"layers: must be >= 1, got {self.layers}")
        if self.vocab_size < len({0, 1, 2, 3}) + 1:
            raise ConfigError(f"vocab_size: must cover specials plus content, got {self.vocab_size}")
        if self.use_language_embedding and self.language_count < 1:
            raise ConfigError("language_count: must be >= 1 when use_language_embedding is set")


@dataclass
class EncodedSentence:
    """Final-layer states for one sentence; h_tokens[0] is the cls state."""

    h_cls: np.ndarray
    h_tokens: np.ndarray
    word_spans: list[Span] = field(default_factory=list)


def word_states(enc: EncodedSentence, word_idx: int) -> np.ndarray:
    """Hidden-state rows of one word's token span, in token order."""
    if not 0 <= word_idx < len(enc.word_spans):
        raise IndexError(f"word index {word_idx} out of range ({len(enc.word_spans)} words)")
    s, e = enc.word_spans[word_idx]
    return enc.h_tokens[s:e]


def _softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _ln_fwd(x, g, b, eps=1e-5):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xh = xc * inv
    return xh * g + b, (xh, inv)


def _ln_bwd(dy, g, cache):
    xh, inv = cache
    dg = (dy * xh).sum(tuple(range(dy.ndim - 1)))
    db = dy.sum(tuple(range(dy.ndim - 1)))
    dxh = dy * g
    dx = inv * (dxh - dxh.mean(-1, keepdims=True) - xh * (dxh * xh).mean(-1, keepdims=True))
    return dx, dg, db


def _attn_fwd(x, p, pre, key_bias, heads):
    B, T, D = x.shape
    dh = D // heads
    q = x @ p[pre + "wq"] + p[pre + "bq"]
    # no key bias: a constant key offset shifts each query row's scores
    # uniformly, which softmax ignores
    k = x @ p[pre + "wk"]
    v = x @ p[pre + "wv"] + p[pre + "bv"]
    qh = q.reshape(B, T, heads, dh).transpose(0, 2, 1, 3)
    kh = k.reshape(B, T, heads, dh).transpose(0, 2, 1, 3)
    vh = v.reshape(B, T, heads, dh).transpose(0, 2, 1, 3)
    scores = qh @ kh.transpose(0, 1, 3, 2) / math.sqrt(dh) + key_bias
    att = _softmax(scores)
    ctx = (att @ vh).transpose(0, 2, 1, 3).reshape(B, T, D)
    out = ctx @ p[pre + "wo"] + p[pre + "bo"]
    return out, (x, qh, kh, vh, att, ctx)


def _attn_bwd(dout, p, pre, cache, heads, grads):
    x, qh, kh, vh, att, ctx = cache
    B, T, D = x.shape
    dh = D // heads
    grads[pre + "wo"] += ctx.reshape(-1, D).T @ dout.reshape(-1, D)
    grads[pre + "bo"] += dout.sum((0, 1))
    dctx = (dout @ p[pre + "wo"].T).reshape(B, T, heads, dh).transpose(0, 2, 1, 3)
    datt = dctx @ vh.transpose(0, 1, 3, 2)
    dvh = att.transpose(0, 1, 3, 2) @ dctx
    dscores = att * (datt - (datt * att).sum(-1, keepdims=True))
    dscores /= math.sqrt(dh)
    dqh = dscores @ kh
    dkh = dscores.transpose(0, 1, 3, 2) @ qh
    xf = x.reshape(-1, D)
    dx = np.zeros_like(x)
    for name, dxh in (("q", dqh), ("k", dkh), ("v", dvh)):
        d = dxh.transpose(0, 2, 1, 3).reshape(B, T, D)
        grads[pre + "w" + name] += xf.T @ d.reshape(-1, D)
        if name != "k":
            grads[pre + "b" + name] += d.sum((0, 1))
        dx += d @ p[pre + "w" + name].T
    return dx


def _layer_fwd(x, p, i, key_bias, heads):
    pre = f"l{i}."
    ao, ac = _attn_fwd(x, p, pre, key_bias, heads)
    h1, lc1 = _ln_fwd(x + ao, p[pre + "ln1_g"], p[pre + "ln1_b"])
    f1 = h1 @ p[pre + "w1"] + p[pre + "b1"]
    g1 = _gelu(f1)
    f2 = g1 @ p[pre + "w2"] + p[pre + "b2"]
    h2, lc2 = _ln_fwd(h1 + f2, p[pre + "ln2_g"], p[pre + "ln2_b"])
    return h2, (ac, lc1, h1, f1, g1, lc2)


def _layer_bwd(dh2, p, i, cache, heads, grads):
    pre = f"l{i}."
    ac, lc1, h1, f1, g1, lc2 = cache
    D = h1.shape[-1]
    dr2, dg, db = _ln_bwd(dh2, p[pre + "ln2_g"], lc2)
    grads[pre + "ln2_g"] += dg
    grads[pre + "ln2_b"] += db
    grads[pre + "w2"] += g1.reshape(-1, g1.shape[-1]).T @ dr2.reshape(-1, D)
    grads[pre + "b2"] += dr2.sum((0, 1))
    df1 = (dr2 @ p[pre + "w2"].T) * _gelu_grad(f1)
    grads[pre + "w1"] += h1.reshape(-1, D).T @ df1.reshape(-1, df1.shape[-1])
    grads[pre + "b1"] += df1.sum((0, 1))
    dh1 = dr2 + df1 @ p[pre + "w1"].T
    dr1, dg, db = _ln_bwd(dh1, p[pre + "ln1_g"], lc1)
    grads[pre + "ln1_g"] += dg
    grads[pre + "ln1_b"] += db
    return dr1 + _attn_bwd(dr1, p, pre, ac, heads, grads)


def _init_params(cfg: EncoderConfig, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    sd = 0.02
    D, F = cfg.model_dim, cfg.ffn_dim
    p: dict[str, np.ndarray] = {}
    p["tok_emb"] = rng.normal(0.0, sd, (cfg.vocab_size, D))
    p["pos_emb"] = rng.normal(0.0, sd, (cfg.max_seq_len, D))
    if cfg.use_language_embedding:
        p["lang_emb"] = rng.normal(0.0, sd, (cfg.language_count, D))
    p["emb_ln_g"] = np.ones(D)
    p["emb_ln_b"] = np.zeros(D)
    for i in range(cfg.layers):
        pre = f"l{i}."
        for name in ("wq", "wk", "wv", "wo"):
            p[pre + name] = rng.normal(0.0, sd, (D, D))
        for name in ("bq", "bv", "bo"):
            p[pre + name] = np.zeros(D)
        p[pre + "ln1_g"] = np.ones(D)
        p[pre + "ln1_b"] = np.zeros(D)
        p[pre + "w1"] = rng.normal(0.0, sd, (D, F))
        p[pre + "b1"] = np.zeros(F)
        p[pre + "w2"] = rng.normal(0.0, sd, (F, D))
        p[pre + "b2"] = np.zeros(D)
        p[pre + "ln2_g"] = np.ones(D)
        p[pre + "ln2_b"] = np.zeros(D)
    p["mlm_bias"] = np.zeros(cfg.vocab_size)
    return p


class Encoder:
    """Transformer encoder over token ids; holds config, tokenizer and weights."""

    def __init__(self, cfg: EncoderConfig, tokenizer: Tokenizer,
                 params: dict[str, np.ndarray] | None = None, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.tokenizer = tokenizer
        self.params = params if params is not None else _init_params(cfg, seed)

    # ---- training-facing forward/backward over padded batches ----

    def forward_batch(self, ids: np.ndarray, mask: np.ndarray,
                      lang_ids: np.ndarray | None = None):
        """Final hidden states (B, T, D) plus the cache for backward.

        ``mask`` is True at real token positions; padded key positions are
        excluded from attention. Padded rows never influence real rows.
        """
        p = self.params
        B, T = ids.shape
        if T > self.cfg.max_seq_len:
            raise ValueError(f"sequence length {T} exceeds max_seq_len {self.cfg.max_seq_len}")
        self._check_lang(lang_ids)
        x0 = p["tok_emb"][ids] + p["pos_emb"][:T][None, :, :]
        if self.cfg.use_language_embedding:
            x0 = x0 + p["lang_emb"][lang_ids][:, None, :]
        h, emb_c = _ln_fwd(x0, p["emb_ln_g"], p["emb_ln_b"])
        key_bias = np.where(mask, 0.0, _NEG_INF)[:, None, None, :]
        layer_caches = []
        for i in range(self.cfg.layers):
            h, c = _layer_fwd(h, p, i, key_bias, self.cfg.heads)
            layer_caches.append(c)
        return h, (ids, lang_ids, emb_c, layer_caches, T)

    def backward_batch(self, cache, dh: np.ndarray,
                       grads: dict[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
        ids, lang_ids, emb_c, layer_caches, T = cache
        p = self.params
        if grads is None:
            grads = self.zero_grads()
        for i in reversed(range(self.cfg.layers)):
            dh = _layer_bwd(dh, p, i, layer_caches[i], self.cfg.heads, grads)
        dx0, dg, db = _ln_bwd(dh, p["emb_ln_g"], emb_c)
        grads["emb_ln_g"] += dg
        grads["emb_ln_b"] += db
        np.add.at(grads["tok_emb"], ids, dx0)
        grads["pos_emb"][:T] += dx0.sum(0)
        if self.cfg.use_language_embedding:
            np.add.at(grads["lang_emb"], lang_ids, dx0.sum(1))
        return grads

    def mlm_from_hidden(self, h: np.ndarray) -> np.ndarray:
        """Vocabulary logits from hidden states; output weights tied to tok_emb."""
        return h @ self.params["tok_emb"].T + self.params["mlm_bias"]

    def mlm_backward(self, h: np.ndarray, dlogits: np.ndarray,
                     grads: dict[str, np.ndarray]) -> np.ndarray:
        V, D = self.params["tok_emb"].shape
        grads["tok_emb"] += dlogits.reshape(-1, V).T @ h.reshape(-1, D)
        grads["mlm_bias"] += dlogits.reshape(-1, V).sum(0)
        return dlogits @ self.params["tok_emb"]

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    # ---- eval-facing encoding ----

    def encode(self, token_ids: np.ndarray, word_spans: list[Span] | None = None,
               lang_id: int | None = None) -> EncodedSentence:
        """Deterministic single-sentence encoding; h_cls is h_tokens[0]."""
        ids = np.asarray(token_ids, dtype=np.int64)[None, :]
        lang = None
        if self.cfg.use_language_embedding:
            if lang_id is None:
                raise ValueError("lang_id required when the language embedding is enabled")
            lang = np.asarray([lang_id])
        h, _ = self.forward_batch(ids, np.ones_like(ids, dtype=bool), lang)
        return EncodedSentence(h[0, 0], h[0], list(word_spans or []))

    def encode_batch(self, tokenized: list[tuple[np.ndarray, list[Span]]],
                     lang_ids: list[int] | None = None) -> list[EncodedSentence]:
        if not tokenized:
            return []
        ids, mask = pad_batch([t[0] for t in tokenized])
        lang = None
        if self.cfg.use_language_embedding:
            if lang_ids is None:
                raise ValueError("lang_ids required when the language embedding is enabled")
            lang = np.asarray(lang_ids)
        h, _ = self.forward_batch(ids, mask, lang)
        return [
            EncodedSentence(h[b, 0], h[b, : len(t[0])], list(t[1]))
            for b, t in enumerate(tokenized)
        ]

    def encode_sentence(self, sentence: Sentence) -> EncodedSentence:
        ids, spans = self.tokenizer.tokenize(sentence)
        lang = sentence.lang_id if self.cfg.use_language_embedding else None
        return self.encode(ids, spans, lang)

    def mlm_logits(self, token_ids: np.ndarray, lang_id: int | None = None) -> np.ndarray:
        """Vocabulary logits at every position of a (partially) masked sentence."""
        ids = np.asarray(token_ids, dtype=np.int64)
        if not (ids == MASK).any():
            raise ValueError("mlm_logits requires at least one mask position")
        lang = None
        if self.cfg.use_language_embedding:
            if lang_id is None:
                raise ValueError("lang_id required when the language embedding is enabled")
            lang = np.asarray([lang_id])
        h, _ = self.forward_batch(ids[None, :], np.ones((1, len(ids)), dtype=bool), lang)
        return self.mlm_from_hidden(h[0])

    def _check_lang(self, lang_ids) -> None:
        if self.cfg.use_language_embedding:
            if lang_ids is None:
                raise ValueError("lang_ids required when the language embedding is enabled")
            la = np.asarray(lang_ids)
            if la.size and (la.min() < 0 or la.max() >= self.cfg.language_count):
                raise ValueError(f"unknown lang_id in {sorted(set(la.tolist()))}")

    # ---- checkpoint I/O ----

    def save(self, path) -> None:
        meta = {
            "config": asdict(self.cfg),
            "tokenizer": {
                "id_to_token": self.tokenizer.id_to_token,
                "max_word_chars": self.tokenizer.max_word_chars,
                "max_seq_len": self.tokenizer.max_seq_len,
            },
        }
        arrays = {f"param/{k}": v for k, v in self.params.items()}
        buf = io.BytesIO()
        np.savez(buf, __meta__=np.array(json.dumps(meta)), **arrays)
        with open(path, "wb") as f:
            f.write(buf.getvalue())

    @classmethod
    def load(cls, path) -> "Encoder":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"]))
            params = {k[len("param/"):]: data[k] for k in data.files if k.startswith("param/")}
        cfg = EncoderConfig(**meta["config"])
        tk = meta["tokenizer"]
        tokenizer = Tokenizer(tk["id_to_token"], tk["max_word_chars"], tk["max_seq_len"])
        return cls(cfg, tokenizer, params=params)


def pad_batch(id_arrays: list[np.ndarray], pad_id: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stack variable-length id arrays into (ids, mask) with right padding."""
    T = max(len(a) for a in id_arrays)
    ids = np.full((len(id_arrays), T), pad_id, dtype=np.int64)
    mask = np.zeros((len(id_arrays), T), dtype=bool)
    for b, a in enumerate(id_arrays):
        ids[b, : len(a)] = a
        mask[b, : len(a)] = True
    return ids, mask
