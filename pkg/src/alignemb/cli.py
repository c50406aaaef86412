"""Command-line entry point for reproducible corpus/align/train/eval runs.

One JSON config document drives a run; flags override individual fields.
Exit codes: 0 success, 1 runtime failure, 2 missing file, 3 invalid config
or invalid command line.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import corpus as corpus_mod
from .alignment import filter_by_threshold, word_align
from .errors import ConfigError
from .evaluation import (
    evaluate_corpus,
    export_projection,
    sample_words_by_frequency,
    write_report,
)
from .model import Encoder, EncoderConfig
from .objectives import LossWeights
from .trainer import TrainConfig, build_provider, train, write_metrics


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(3)


def _load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: invalid JSON ({e})") from e


def _corpus_config(doc: dict) -> corpus_mod.CorpusConfig:
    section = doc.get("corpus")
    if not isinstance(section, dict):
        raise ConfigError("corpus: missing config section")
    cfg = corpus_mod.CorpusConfig(
        languages=[tuple(entry) for entry in section.get("languages", [])],
        cipher_seed=section.get("cipher_seed", 0),
        reorder_prob=section.get("reorder_prob", 0.0),
        fertility_prob=section.get("fertility_prob", 0.0),
        sentence_length_range=tuple(section.get("sentence_length_range", (3, 9))),
    )
    cfg.validate()
    return cfg


def _parse_weights(text: str) -> LossWeights:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"weights: expected three comma-separated numbers, got {text!r}")
    try:
        a, b, g = (float(x) for x in parts)
    except ValueError as e:
        raise ConfigError(f"weights: {e}") from e
    w = LossWeights(a, b, g)
    try:
        w.validate()
    except ValueError as e:
        raise ConfigError(f"weights: {e}") from e
    return w


def _train_config(doc: dict, args) -> TrainConfig:
    t = doc.get("train", {})
    enc = doc.get("encoder", {})
    weights = t.get("weights", [0.8, 0.1, 0.1])
    cfg = TrainConfig(
        steps=t.get("steps", 2000),
        batch_size=t.get("batch_size", 64),
        lr=t.get("lr", 5e-5),
        eval_every=t.get("eval_every", 200),
        weights=LossWeights(*weights),
        seed=t.get("seed", 42),
        alignment_provider=t.get("provider", "gold"),
        threshold=t.get("threshold", 0.9),
        use_language_embedding=t.get("use_language_embedding", False),
        encoder=EncoderConfig(
            model_dim=enc.get("model_dim", 64),
            layers=enc.get("layers", 2),
            heads=enc.get("heads", 4),
            ffn_dim=enc.get("ffn_dim", 128),
            max_seq_len=enc.get("max_seq_len", 32),
            vocab_size=5,
        ),
        max_word_chars=t.get("max_word_chars", 6),
        ibm1_iterations=t.get("ibm1_iterations", 20),
        alignment_file=t.get("alignment_file"),
        weight_decay=t.get("weight_decay", 0.01),
        softmax_scale=t.get("softmax_scale", 1.0),
        tr_bidirectional=t.get("tr_bidirectional", False),
    )
    if args.seed is not None:
        cfg.seed = args.seed
    if args.weights is not None:
        cfg.weights = _parse_weights(args.weights)
    if args.provider is not None:
        cfg.alignment_provider = args.provider
    if args.threshold is not None:
        cfg.threshold = args.threshold
    if args.lang_embedding is not None:
        cfg.use_language_embedding = args.lang_embedding == "on"
    cfg.validate()
    return cfg


def _resolve_corpus(doc: dict, args) -> tuple[list, list]:
    """Training/dev pairs: from corpus_dir files when given, else generated."""
    corpus_dir = doc.get("corpus_dir")
    if corpus_dir:
        base = Path(corpus_dir)
        train_path, dev_path = base / "train.tsv", base / "dev.tsv"
        for p in (train_path, dev_path):
            if not p.exists():
                raise FileNotFoundError(f"corpus file not found: {p}")
        return corpus_mod.load_parallel(train_path), corpus_mod.load_parallel(dev_path)
    cc = _corpus_config(doc)
    section = doc["corpus"]
    generated = corpus_mod.generate_corpus(cc, section.get("seed", 0))
    dev_fraction = section.get("dev_fraction", 0.1)
    train_pairs, dev_pairs = [], []
    for lp in sorted(generated):
        tr, dv = corpus_mod.split_corpus(generated[lp], dev_fraction)
        train_pairs.extend(tr)
        dev_pairs.extend(dv)
    return train_pairs, dev_pairs


def cmd_gen_corpus(args) -> int:
    doc = _load_config(args.config)
    cc = _corpus_config(doc)
    section = doc["corpus"]
    seed = args.seed if args.seed is not None else section.get("seed", 0)
    dev_fraction = section.get("dev_fraction", 0.1)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    generated = corpus_mod.generate_corpus(cc, seed)
    all_pairs, train_pairs, dev_pairs = [], [], []
    for lp in sorted(generated):
        all_pairs.extend(generated[lp])
        tr, dv = corpus_mod.split_corpus(generated[lp], dev_fraction)
        train_pairs.extend(tr)
        dev_pairs.extend(dv)
    corpus_mod.save_parallel(all_pairs, out / "corpus.tsv")
    corpus_mod.save_parallel(train_pairs, out / "train.tsv")
    corpus_mod.save_parallel(dev_pairs, out / "dev.tsv")
    resolved = {"corpus": {**section, "seed": seed, "dev_fraction": dev_fraction}}
    (out / "corpus_config.json").write_text(json.dumps(resolved, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(all_pairs)} pairs ({len(train_pairs)} train / {len(dev_pairs)} dev) to {out}")
    return 0


def cmd_align(args) -> int:
    path = Path(args.corpus)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    pairs = corpus_mod.load_parallel(path)
    cfg = TrainConfig(
        alignment_provider=args.provider,
        threshold=args.threshold,
        ibm1_iterations=args.iterations,
        alignment_file=args.alignments,
    )
    cfg.validate()
    provider = build_provider(cfg, corpus_mod.by_lang_pair(pairs))
    records = {}
    for p in pairs:
        fwd, bwd = word_align(p, provider)
        for d in (filter_by_threshold(fwd, cfg.threshold), filter_by_threshold(bwd, cfg.threshold)):
            links = [(i, j, s) for i, (j, s) in sorted(d.links.items())]
            records[(p.pair_id, (d.src_lang, d.tgt_lang))] = links
    from .alignment import save_alignments

    save_alignments(records, args.out)
    print(f"wrote alignments for {len(pairs)} pairs to {args.out}")
    return 0


def cmd_train(args) -> int:
    doc = _load_config(args.config)
    cfg = _train_config(doc, args)
    train_pairs, dev_pairs = _resolve_corpus(doc, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    best, records = train(cfg, train_pairs, dev_pairs)
    best.model.save(out / "checkpoint.npz")
    write_metrics(records, out / "metrics.tsv")
    resolved = dict(doc)
    resolved["train"] = {
        **doc.get("train", {}),
        "steps": cfg.steps,
        "seed": cfg.seed,
        "weights": [cfg.weights.alpha, cfg.weights.beta, cfg.weights.gamma],
        "provider": cfg.alignment_provider,
        "threshold": cfg.threshold,
        "use_language_embedding": cfg.use_language_embedding,
    }
    resolved["encoder"] = asdict(cfg.encoder)
    (out / "config.json").write_text(json.dumps(resolved, indent=2) + "\n", encoding="utf-8")
    print(f"best checkpoint: step {best.step}, dev similarity search {best.dev_metric:.4f}")
    return 0


def cmd_eval(args) -> int:
    for p in (args.checkpoint, args.corpus):
        if not Path(p).exists():
            raise FileNotFoundError(f"file not found: {p}")
    model = Encoder.load(args.checkpoint)
    pairs = corpus_mod.load_parallel(args.corpus)
    report = evaluate_corpus(model, pairs, mining_k=args.mining_k)
    write_report(report, args.out)
    print(f"wrote report to {args.out}")
    return 0


def cmd_export_embeddings(args) -> int:
    for p in (args.checkpoint, args.corpus):
        if not Path(p).exists():
            raise FileNotFoundError(f"file not found: {p}")
    model = Encoder.load(args.checkpoint)
    pairs = corpus_mod.load_parallel(args.corpus)
    words = sample_words_by_frequency(pairs, args.n_words)
    export_projection(model, words, args.out)
    print(f"wrote {len(words)} projected words to {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="alignemb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-corpus", help="generate a synthetic parallel corpus with gold links")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override corpus seed")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("align", help="produce a filtered word-alignment file for a corpus")
    p.add_argument("--corpus", required=True, help="parallel corpus file")
    p.add_argument("--provider", choices=["gold", "ibm1", "file"], default="gold")
    p.add_argument("--threshold", type=float, default=0.9, help="minimum link score")
    p.add_argument("--iterations", type=int, default=20, help="EM iterations for ibm1")
    p.add_argument("--alignments", default=None, help="input alignment file for provider=file")
    p.add_argument("--out", required=True, help="output alignment file")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("train", help="train an encoder on a corpus")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override training seed")
    p.add_argument("--weights", default=None, help="override loss weights A,B,G (default 0.8,0.1,0.1)")
    p.add_argument("--provider", choices=["gold", "ibm1", "file"], default=None)
    p.add_argument("--threshold", type=float, default=None, help="alignment score threshold (default 0.9)")
    p.add_argument("--lang-embedding", choices=["on", "off"], default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a parallel corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--mining-k", type=int, default=4)
    p.add_argument("--out", required=True, help="report file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-embeddings", help="export 2-D projected word embeddings")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True, help="corpus for frequency-based word sampling")
    p.add_argument("--n-words", type=int, default=500)
    p.add_argument("--out", required=True, help="projection file")
    p.set_defaults(func=cmd_export_embeddings)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"alignemb: error: {e}", file=sys.stderr)
        return 2
    except ConfigError as e:
        print(f"alignemb: config error: {e}", file=sys.stderr)
        return 3
    except Exception as e:  # noqa: BLE001 - one-line diagnostic, nonzero exit
        print(f"alignemb: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
