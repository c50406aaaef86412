"""Evaluation: bitext retrieval, margin-based bitext mining, Spearman
semantic-similarity correlation, aligned-word cosine statistics, and 2-D
projection export of word embeddings.

Mining scores candidates with a ratio margin: the cosine of a candidate
pair divided by the mean of the k-nearest-neighbor cosines around both
endpoints; the decision threshold is the one maximizing F1 on the supplied
gold pairs (pass an explicit threshold to skip tuning).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .corpus import ParallelPair
from .errors import ParseError
from .model import Encoder

LangPair = tuple[int, int]


def _unit_rows(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"{name} must be a 2-D embedding matrix")
    n = np.linalg.norm(x, axis=1)
    if np.any(n == 0.0):
        raise ValueError(f"zero vector in {name}")
    return x / n[:, None]


def retrieval_accuracy(src_embeds, tgt_embeds) -> tuple[float, float, float]:
    """Fraction of items whose nearest neighbor by cosine is their own
    translation, for both query directions plus the mean."""
    S = _unit_rows(src_embeds, "src_embeds")
    T = _unit_rows(tgt_embeds, "tgt_embeds")
    if S.shape[0] != T.shape[0]:
        raise ValueError(f"count mismatch: {S.shape[0]} vs {T.shape[0]}")
    if S.shape[0] < 2:
        raise ValueError("retrieval needs at least 2 items")
    sim = S @ T.T
    own = np.arange(S.shape[0])
    fwd = float(np.mean(sim.argmax(axis=1) == own))
    bwd = float(np.mean(sim.argmax(axis=0) == own))
    return fwd, bwd, (fwd + bwd) / 2.0


def _prf(pred: set, gold: set) -> tuple[float, float, float]:
    hit = len(pred & gold)
    p = hit / len(pred) if pred else 0.0
    r = hit / len(gold)
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def mine_bitext(
    embeds_a,
    embeds_b,
    gold_pairs: set[tuple[int, int]],
    k: int = 4,
    mode: str = "ratio",
    threshold: float | None = None,
) -> tuple[float, float, float]:
    """Mine translation pairs from two monolingual pools and score them
    against gold. Candidates are each row's and each column's best match;
    without an explicit threshold, the sweep keeps the highest-scoring
    prefix that maximizes F1."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if mode not in ("ratio", "cosine"):
        raise ValueError(f"unknown mining mode {mode!r}")
    if not gold_pairs:
        raise ValueError("empty gold set")
    A = _unit_rows(embeds_a, "embeds_a")
    B = _unit_rows(embeds_b, "embeds_b")
    cos = A @ B.T
    if mode == "ratio":
        ka = min(k, B.shape[0])
        kb = min(k, A.shape[0])
        nn_a = np.sort(cos, axis=1)[:, -ka:].mean(axis=1)
        nn_b = np.sort(cos, axis=0)[-kb:, :].mean(axis=0)
        score = cos / ((nn_a[:, None] + nn_b[None, :]) / 2.0)
    else:
        score = cos
    cand = {(a, int(score[a].argmax())) for a in range(A.shape[0])}
    cand |= {(int(score[:, b].argmax()), b) for b in range(B.shape[0])}
    scored = sorted(cand, key=lambda ab: (-score[ab], ab))
    if threshold is not None:
        pred = {ab for ab in scored if score[ab] >= threshold}
        return _prf(pred, gold_pairs)
    best = (0.0, 0.0, 0.0)
    for n_keep in range(1, len(scored) + 1):
        prf = _prf(set(scored[:n_keep]), gold_pairs)
        if prf[2] > best[2]:
            best = prf
    return best


def sts_spearman(similarities, gold_scores) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    x = np.asarray(similarities, dtype=float)
    y = np.asarray(gold_scores, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"mismatched score lists: {x.shape} vs {y.shape}")
    if len(x) < 3:
        raise ValueError("spearman needs at least 3 items")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("spearman undefined for a constant score list")
    return float(stats.spearmanr(x, y).statistic)


def _first_token_embedding(model: Encoder, word: str) -> np.ndarray:
    return model.params["tok_emb"][model.tokenizer.word_pieces(word)[0]]


def aligned_word_cosine(
    model: Encoder, pairs: list[ParallelPair], n_words: int = 500
) -> tuple[float, float]:
    """Mean and std of the embedding-layer cosine between aligned words.

    Takes the ``n_words`` most frequent aligned word-type pairs over the
    given gold links; each word is represented by its first subword's row
    of the input embedding table.
    """
    counts: Counter[tuple[str, str]] = Counter()
    for p in pairs:
        for i, j, _ in p.gold_links or []:
            counts[(p.src.words[i], p.tgt.words[j])] += 1
    if not counts:
        raise ValueError("no aligned word pairs in the given pairs")
    top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n_words]
    cosines = []
    for (ws, wt), _ in top:
        u = _first_token_embedding(model, ws)
        v = _first_token_embedding(model, wt)
        cosines.append(float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v))))
    return float(np.mean(cosines)), float(np.std(cosines))


def sample_words_by_frequency(
    pairs: list[ParallelPair], n_words: int = 500
) -> list[tuple[str, int]]:
    """Most frequent (word, lang_id) types across both sides of the pairs."""
    counts: Counter[tuple[str, int]] = Counter()
    for p in pairs:
        for s in (p.src, p.tgt):
            for w in s.words:
                counts[(w, s.lang_id)] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [wl for wl, _ in ranked[:n_words]]


def pca_2d(vectors: np.ndarray) -> np.ndarray:
    """Deterministic 2-D principal-component coordinates (centered; each
    component's first nonzero loading is made positive)."""
    X = np.asarray(vectors, dtype=float)
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    comps = vt[:2] if vt.shape[0] >= 2 else np.vstack([vt, np.zeros((2 - vt.shape[0], X.shape[1]))])
    for r in range(2):
        nz = np.nonzero(comps[r])[0]
        if nz.size and comps[r, nz[0]] < 0:
            comps[r] = -comps[r]
    return Xc @ comps.T


def export_projection(
    model: Encoder, words: list[tuple[str, int]], out_path, method: str = "pca"
) -> None:
    """Write ``word<TAB>lang<TAB>x<TAB>y`` coordinates for sampled words."""
    if method != "pca":
        raise ValueError(f"unknown projection method {method!r}")
    if len(words) < 3:
        raise ValueError(f"projection needs at least 3 words, got {len(words)}")
    vectors = np.stack([_first_token_embedding(model, w) for w, _ in words])
    coords = pca_2d(vectors)
    with open(out_path, "w", encoding="utf-8") as f:
        for (w, lang), (x, y) in zip(words, coords):
            f.write(f"{w}\t{lang}\t{float(x)!r}\t{float(y)!r}\n")


# ---------------------------------------------------------------------------
# corpus-level report


@dataclass
class EvalReport:
    retrieval: dict[LangPair, tuple[float, float, float]]
    mining: tuple[float, float, float] | None = None
    sts: float | None = None
    aligned_cosine: tuple[float, float] | None = None


def evaluate_corpus(
    model: Encoder,
    pairs: list[ParallelPair],
    *,
    mining: bool = True,
    sts: bool = True,
    aligned: bool = True,
    mining_k: int = 4,
) -> EvalReport:
    """Full report over a parallel corpus.

    Retrieval treats each language pair's sentences as query/pool sets and
    is reported per pair. Mining pools all source and target sentences into
    one task whose gold set is the corpus pairs themselves. The similarity
    task scores each translation pair 1.0 and one rotated (mismatched)
    pairing per sentence 0.0, then rank-correlates model cosines against
    those labels, macro-averaged over language pairs.
    """
    from .corpus import by_lang_pair
    from .trainer import _embed_sentences

    groups = by_lang_pair(pairs)
    retrieval: dict[LangPair, tuple[float, float, float]] = {}
    sts_scores = []
    pooled_x, pooled_y = [], []
    for lp in sorted(groups):
        group = groups[lp]
        X = _embed_sentences(model, [p.src for p in group])
        Y = _embed_sentences(model, [p.tgt for p in group])
        retrieval[lp] = retrieval_accuracy(X, Y)
        pooled_x.append(X)
        pooled_y.append(Y)
        n = len(group)
        if sts and n >= 2:
            Xn = _unit_rows(X, "X")
            Yn = _unit_rows(Y, "Y")
            shifted = np.roll(np.arange(n), -1)
            sims = np.concatenate([(Xn * Yn).sum(1), (Xn * Yn[shifted]).sum(1)])
            gold_scores = np.concatenate([np.ones(n), np.zeros(n)])
            sts_scores.append(sts_spearman(sims, gold_scores))
    report = EvalReport(retrieval=retrieval)
    if mining:
        X = np.concatenate(pooled_x)
        Y = np.concatenate(pooled_y)
        gold = {(i, i) for i in range(X.shape[0])}
        report.mining = mine_bitext(X, Y, gold, k=mining_k)
    if sts and sts_scores:
        report.sts = float(np.mean(sts_scores))
    if aligned and any(p.gold_links for p in pairs):
        report.aligned_cosine = aligned_word_cosine(model, pairs)
    return report


def report_text(report: EvalReport) -> str:
    lines = []
    for (a, b), (fwd, bwd, mean) in sorted(report.retrieval.items()):
        lines.append(f"retrieval.{a}-{b}.fwd\t{fwd!r}")
        lines.append(f"retrieval.{a}-{b}.bwd\t{bwd!r}")
        lines.append(f"retrieval.{a}-{b}.mean\t{mean!r}")
    if report.mining is not None:
        p, r, f = report.mining
        lines.append(f"mining.precision\t{p!r}")
        lines.append(f"mining.recall\t{r!r}")
        lines.append(f"mining.f1\t{f!r}")
    if report.sts is not None:
        lines.append(f"sts.spearman\t{report.sts!r}")
    if report.aligned_cosine is not None:
        m, s = report.aligned_cosine
        lines.append(f"aligned_cosine.mean\t{m!r}")
        lines.append(f"aligned_cosine.std\t{s!r}")
    return "".join(line + "\n" for line in lines)


def write_report(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(report_text(report))


def read_report(path) -> EvalReport:
    values: dict[str, float] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected key<TAB>value")
            try:
                values[parts[0]] = float(parts[1])
            except ValueError as e:
                raise ParseError(f"line {lineno}: {e}") from e
    retrieval: dict[LangPair, dict[str, float]] = {}
    for key, v in values.items():
        if key.startswith("retrieval."):
            _, lp, which = key.split(".")
            a, b = lp.split("-")
            retrieval.setdefault((int(a), int(b)), {})[which] = v
    report = EvalReport(
        retrieval={
            lp: (d["fwd"], d["bwd"], d["mean"]) for lp, d in sorted(retrieval.items())
        }
    )
    if "mining.precision" in values:
        report.mining = (values["mining.precision"], values["mining.recall"], values["mining.f1"])
    if "sts.spearman" in values:
        report.sts = values["sts.spearman"]
    if "aligned_cosine.mean" in values:
        report.aligned_cosine = (values["aligned_cosine.mean"], values["aligned_cosine.std"])
    return report
