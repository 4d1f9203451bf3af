"""
Data splits: forget set U, retain set D∖U, retain sample R, general set G and approximate set A.
Membership is decided by ranking sequences on a seeded content hash, so it does not
depend on the order in which D is presented.
"""

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Generic, List, Optional, Sequence, TypeVar

from ..config import GeneratorSpec
from ..errors import SplitError
from ..hashing import derive_seed
from .generator import generate

logger = logging.getLogger(__name__)

T = TypeVar("T")
S = TypeVar("S")

APPROX_REDRAW_ROUNDS = 8


@dataclass(frozen=True)
class CorpusSplits(Generic[T]):
    """Splits of a training corpus D plus the approximate set A.

    Index lists refer to positions in `train`; A is a separate list and never shares
    an index with D.
    """

    train: List[T]
    forget_indices: List[int]
    retain_sample_indices: List[int]
    general_indices: List[int]
    approximate: List[T]

    @property
    def forget(self) -> List[T]:
        return [self.train[i] for i in self.forget_indices]

    @property
    def retain_indices(self) -> List[int]:
        excluded = set(self.forget_indices)
        return [i for i in range(len(self.train)) if i not in excluded]

    @property
    def retain(self) -> List[T]:
        return [self.train[i] for i in self.retain_indices]

    @property
    def retain_sample(self) -> List[T]:
        return [self.train[i] for i in self.retain_sample_indices]

    @property
    def general(self) -> List[T]:
        return [self.train[i] for i in self.general_indices]

    def map(self, fn: Callable[[T], S]) -> "CorpusSplits[S]":
        """Apply fn to every sequence (e.g. encode text to token ids), keeping indices."""
        return CorpusSplits(
            train=[fn(s) for s in self.train],
            forget_indices=list(self.forget_indices),
            retain_sample_indices=list(self.retain_sample_indices),
            general_indices=list(self.general_indices),
            approximate=[fn(s) for s in self.approximate],
        )

    def check(self) -> None:
        """Raise SplitError unless every disjointness and size invariant holds."""
        n = len(self.train)
        forget, sample, general = set(self.forget_indices), set(self.retain_sample_indices), set(self.general_indices)
        if not 1 <= len(forget) < n:
            raise SplitError(f"|U| = {len(forget)} must satisfy 1 <= |U| < |D| = {n}")
        if len(forget) != len(self.forget_indices):
            raise SplitError("forget indices contain duplicates")
        for name, idx in (("forget", forget), ("retain sample", sample), ("general", general)):
            if any(not 0 <= i < n for i in idx):
                raise SplitError(f"{name} index outside [0, {n})")
        if forget & sample or forget & general:
            raise SplitError("R and G must be subsets of D∖U")
        if sample & general:
            raise SplitError("R and G must be disjoint")
        shared = {_content_key(s) for s in self.train} & {_content_key(s) for s in self.approximate}
        if shared:
            raise SplitError(f"A repeats {len(shared)} training sequence(s); A and D must be disjoint")


def _content_key(seq):
    return seq if isinstance(seq, str) else tuple(seq)


def _rank(items: Sequence[str], seed: int, label: str) -> List[int]:
    """Order indices by a seeded content hash; repeated contents are told apart by occurrence."""
    seen: Counter = Counter()
    keys = []
    for i, item in enumerate(items):
        occurrence = seen[item]
        seen[item] += 1
        digest = hashlib.sha256(f"{seed}|{label}|{occurrence}|{item}".encode("utf-8")).hexdigest()
        keys.append((digest, i))
    return [i for _, i in sorted(keys)]


def draw_approximate(
    spec: GeneratorSpec, corpus: Sequence[str], size: int, seed: int
) -> List[str]:
    """Fresh sequences from the same generator, rejecting copies of training sequences."""
    existing = set(corpus)
    approx: List[str] = []
    for round_ in range(APPROX_REDRAW_ROUNDS):
        for seq in generate(spec, seed=derive_seed(seed, "approximate", round_), count=size):
            if seq not in existing and len(approx) < size:
                approx.append(seq)
        if len(approx) == size:
            return approx
    if not approx:
        raise SplitError("the generator reproduced only training sequences; cannot draw an approximate set")
    logger.warning(
        f"[CORPUS] generator keeps reproducing training sequences; A holds {len(approx)} of {size} sequences"
    )
    return approx


def make_splits(
    corpus: Sequence[str],
    forget_fraction: float,
    retain_sample_size: Optional[int],
    approx_size: int,
    seed: int,
    spec: Optional[GeneratorSpec] = None,
    general_size: int = 0,
    approximate: Optional[Sequence[str]] = None,
) -> CorpusSplits[str]:
    """Build CorpusSplits over a text corpus.

    A is drawn from `spec` with a seed derived from `seed`; callers that already hold
    an approximate set may pass it instead.
    """
    n = len(corpus)
    if not 0.0 < forget_fraction < 1.0:
        raise SplitError(f"forget fraction must lie strictly between 0 and 1, got {forget_fraction}")
    n_forget = int(round(forget_fraction * n))
    if not 1 <= n_forget < n:
        raise SplitError(f"forget fraction {forget_fraction} on {n} sequences gives |U| = {n_forget}")
    n_sample = n_forget if retain_sample_size is None else retain_sample_size
    if n_sample + general_size > n - n_forget:
        raise SplitError(
            f"|R| + |G| = {n_sample + general_size} exceeds |D∖U| = {n - n_forget}"
        )

    forget_idx = sorted(_rank(corpus, seed, "forget")[:n_forget])
    forget_set = set(forget_idx)
    retain_rank = [i for i in _rank(corpus, seed, "retain") if i not in forget_set]
    sample_idx = sorted(retain_rank[:n_sample])
    sample_set = set(sample_idx)
    general_rank = [i for i in _rank(corpus, seed, "general") if i not in forget_set and i not in sample_set]
    general_idx = sorted(general_rank[:general_size])

    if approximate is not None:
        approx = list(approximate)
    elif spec is not None:
        approx = draw_approximate(spec, corpus, approx_size, seed)
    else:
        raise SplitError("an approximate set needs either a generator spec or explicit sequences")
    if len(approx) < 1:
        raise SplitError("approximate set must not be empty")

    splits = CorpusSplits(
        train=list(corpus),
        forget_indices=forget_idx,
        retain_sample_indices=sample_idx,
        general_indices=general_idx,
        approximate=approx,
    )
    splits.check()
    logger.info(
        f"[CORPUS] |D|={n} |U|={n_forget} |R|={len(sample_idx)} |G|={len(general_idx)} |A|={len(approx)}"
    )
    return splits
