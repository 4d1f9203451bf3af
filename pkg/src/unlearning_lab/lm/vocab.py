"""
Character-level vocabulary.
"""

from typing import Dict, Iterable, List, Sequence

from ..errors import ModelInputError


class CharVocab:
    """Closed character vocabulary; token ids follow sorted character order."""

    def __init__(self, chars: Iterable[str]):
        self.chars: List[str] = sorted(set(chars))
        if not self.chars:
            raise ModelInputError("vocabulary must contain at least one character")
        self.index: Dict[str, int] = {c: i for i, c in enumerate(self.chars)}

    @classmethod
    def from_sequences(cls, sequences: Iterable[str]) -> "CharVocab":
        chars = set()
        for seq in sequences:
            chars.update(seq)
        return cls(chars)

    def __len__(self) -> int:
        return len(self.chars)

    def __eq__(self, other) -> bool:
        return isinstance(other, CharVocab) and self.chars == other.chars

    def encode(self, text: str) -> List[int]:
        try:
            return [self.index[c] for c in text]
        except KeyError as e:
            raise ModelInputError(f"character {e.args[0]!r} is not in the vocabulary") from None

    def decode(self, ids: Sequence[int]) -> str:
        for i in ids:
            if not 0 <= int(i) < len(self.chars):
                raise ModelInputError(f"token id {i} is outside [0, {len(self.chars)})")
        return "".join(self.chars[int(i)] for i in ids)
