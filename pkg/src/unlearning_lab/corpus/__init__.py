from .generator import (
    entropy_rate,
    generate,
    generator_alphabet,
    resolve_chain,
    stationary_distribution,
    validate_spec,
)
from .io import read_corpus, read_split_manifest, write_corpus, write_split_manifest
from .splits import CorpusSplits, draw_approximate, make_splits

__all__ = [
    "CorpusSplits",
    "draw_approximate",
    "entropy_rate",
    "generate",
    "generator_alphabet",
    "make_splits",
    "read_corpus",
    "read_split_manifest",
    "resolve_chain",
    "stationary_distribution",
    "validate_spec",
    "write_corpus",
    "write_split_manifest",
]
