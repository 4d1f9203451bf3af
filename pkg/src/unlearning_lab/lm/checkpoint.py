"""
Checkpoint save/load.
An .npz archive holding one float64 array per parameter plus a JSON header (see docs/checkpoint_format.md).
"""

import json
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import CheckpointFormatError
from .params import Arch, ModelParams, Role
from .vocab import CharVocab

logger = logging.getLogger(__name__)

FORMAT_NAME = "unlearning-lab-checkpoint"
FORMAT_VERSION = 1
HEADER_KEY = "__header__"
PARAM_PREFIX = "param/"


def save_checkpoint(model: ModelParams, path: Union[str, Path], vocab: Optional[CharVocab] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "arch": model.arch.value,
        "vocab_size": model.vocab_size,
        "layers": model.layers,
        "dim": model.dim,
        "heads": model.heads,
        "context_length": model.context_length,
        "activation": model.activation,
        "role": model.role.value,
        "array_order": list(model.arrays),
        "vocab": vocab.chars if vocab else None,
        "meta": dict(model.meta),
    }
    payload = {HEADER_KEY: np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8)}
    for name, arr in model.arrays.items():
        payload[PARAM_PREFIX + name] = np.ascontiguousarray(arr, dtype=np.float64)
    # np.savez appends .npz unless given a file object
    with open(path, "wb") as fh:
        np.savez(fh, **payload)
    logger.debug(f"[CHECKPOINT] wrote {model.role.value} {model.arch.value} to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[ModelParams, Optional[CharVocab]]:
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise CheckpointFormatError(f"{path}: not a readable checkpoint ({e})") from e
    with archive:
        if HEADER_KEY not in archive.files:
            raise CheckpointFormatError(f"{path}: missing checkpoint header")
        header = json.loads(archive[HEADER_KEY].tobytes().decode("utf-8"))
        if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
            raise CheckpointFormatError(
                f"{path}: unsupported format {header.get('format')!r} version {header.get('version')!r}"
            )
        missing = [n for n in header["array_order"] if PARAM_PREFIX + n not in archive.files]
        if missing:
            raise CheckpointFormatError(f"{path}: arrays missing from archive: {missing}")
        arrays = {name: archive[PARAM_PREFIX + name] for name in header["array_order"]}

    model = ModelParams(
        arch=Arch(header["arch"]),
        vocab_size=int(header["vocab_size"]),
        arrays=arrays,
        role=Role(header["role"]),
        layers=int(header["layers"]),
        dim=int(header["dim"]),
        heads=int(header["heads"]),
        context_length=int(header["context_length"]),
        activation=header["activation"],
        meta=dict(header.get("meta") or {}),
    )
    vocab = CharVocab(header["vocab"]) if header.get("vocab") else None
    return model, vocab
