"""
Corpus and split-manifest files.
Corpora are UTF-8 text with one sequence per line; the manifest is JSON with indices per split.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from ..errors import CorpusSpecError, SplitError
from .splits import CorpusSplits

PathLike = Union[str, Path]


def write_corpus(path: PathLike, sequences: Sequence[str]) -> Path:
    path = Path(path)
    for i, seq in enumerate(sequences):
        if "\n" in seq or "\r" in seq:
            raise CorpusSpecError(f"sequence {i} contains a line break and cannot be stored one per line")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(seq + "\n" for seq in sequences), encoding="utf-8")
    return path


def read_corpus(path: PathLike) -> List[str]:
    text = Path(path).read_text(encoding="utf-8")
    if not text:
        return []
    if text.endswith("\n"):
        text = text[:-1]
    return text.split("\n")


def write_split_manifest(path: PathLike, splits: CorpusSplits, extra: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    manifest = {
        "num_train": len(splits.train),
        "num_approximate": len(splits.approximate),
        "forget": splits.forget_indices,
        "retain_sample": splits.retain_sample_indices,
        "general": splits.general_indices,
        **(extra or {}),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


def read_split_manifest(path: PathLike, train: Sequence[str], approximate: Sequence[str]) -> CorpusSplits[str]:
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    if manifest["num_train"] != len(train) or manifest["num_approximate"] != len(approximate):
        raise SplitError(
            f"manifest expects {manifest['num_train']} training and {manifest['num_approximate']} "
            f"approximate sequences, got {len(train)} and {len(approximate)}"
        )
    splits = CorpusSplits(
        train=list(train),
        forget_indices=list(manifest["forget"]),
        retain_sample_indices=list(manifest["retain_sample"]),
        general_indices=list(manifest["general"]),
        approximate=list(approximate),
    )
    splits.check()
    return splits
