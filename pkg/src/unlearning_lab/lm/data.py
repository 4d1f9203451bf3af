"""
Batching of token sequences.
"""

from typing import List, Optional, Sequence

import numpy as np

from .model import group_by_length


def make_batches(
    data: Sequence[Sequence[int]], batch_size: int, rng: Optional[np.random.Generator] = None
) -> List[List[List[int]]]:
    """Chunk sequences into batches of at most batch_size, equal length within a batch.

    With an rng the visiting order is a fresh permutation; otherwise data order is kept.
    """
    order = np.arange(len(data)) if rng is None else rng.permutation(len(data))
    permuted = [list(data[i]) for i in order]
    batches: List[List[List[int]]] = []
    for _, idx in group_by_length(permuted).items():
        for start in range(0, len(idx), batch_size):
            batches.append([permuted[i] for i in idx[start : start + batch_size]])
    if rng is not None and len(batches) > 1:
        batches = [batches[i] for i in rng.permutation(len(batches))]
    return batches
