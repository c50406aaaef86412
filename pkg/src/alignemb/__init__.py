"""Desk-scale laboratory for word-aligned cross-lingual sentence embedding.

Synthetic cipher corpora with gold word alignments, an EM word aligner,
a small trainable numpy transformer encoder, three training objectives
(translation ranking, aligned word prediction, word translation ranking),
and a retrieval/mining/similarity evaluation harness.
"""

from .alignment import (
    AlignmentDict,
    FileProvider,
    GoldProvider,
    Ibm1Provider,
    TranslationTable,
    align_ibm1,
    filter_by_threshold,
    load_alignments,
    save_alignments,
    train_ibm1,
    word_align,
)
from .corpus import (
    CorpusConfig,
    ParallelPair,
    Sentence,
    by_lang_pair,
    generate_corpus,
    load_parallel,
    save_parallel,
    split_corpus,
)
from .errors import ConfigError, ParseError, TrainingDiverged
from .evaluation import (
    EvalReport,
    aligned_word_cosine,
    evaluate_corpus,
    export_projection,
    mine_bitext,
    read_report,
    retrieval_accuracy,
    sample_words_by_frequency,
    sts_spearman,
    write_report,
)
from .model import EncodedSentence, Encoder, EncoderConfig, word_states
from .objectives import (
    BatchLosses,
    LossWeights,
    awp_loss,
    awp_pair_terms,
    combined_loss,
    phi,
    phi_m,
    tr_loss,
    wtr_loss,
    wtr_pair_terms,
)
from .tokenizer import TokenizedPair, Tokenizer
from .trainer import (
    Checkpoint,
    TrainConfig,
    dev_similarity_search,
    make_batches,
    metrics_log_text,
    train,
    write_metrics,
)

__version__ = "0.1.0"
