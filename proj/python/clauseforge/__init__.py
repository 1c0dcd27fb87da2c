"""Clause generation from contract context.

Thin wrapper over the C++ core: corpus ingestion, hash embeddings, the
contract similarity index, context strategies, the wordpiece tokenizer,
ROUGE/BLEU and the end-to-end pipeline.
"""

from ._core import (
    ConfigError,
    Error,
    FormatError,
    HnswIndex,
    ParseError,
    SchemaError,
    StaleCacheError,
    Vocab,
    assemble,
    bleu,
    build_reps,
    embed,
    evaluate,
    hash_encode,
    ingest,
    normalize,
    pearson,
    read_creb,
    rouge_l,
    rouge_n,
    run_pipeline,
    strategies,
    train_vocab,
    write_creb,
    write_synthetic_corpus,
)

__all__ = [
    "ConfigError",
    "Error",
    "FormatError",
    "HnswIndex",
    "ParseError",
    "SchemaError",
    "StaleCacheError",
    "Vocab",
    "assemble",
    "bleu",
    "build_reps",
    "embed",
    "evaluate",
    "hash_encode",
    "ingest",
    "normalize",
    "pearson",
    "read_creb",
    "rouge_l",
    "rouge_n",
    "run_pipeline",
    "strategies",
    "train_vocab",
    "write_creb",
    "write_synthetic_corpus",
]
