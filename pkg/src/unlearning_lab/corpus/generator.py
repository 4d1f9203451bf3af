"""
Synthetic corpus generators with known statistics.
Order-k Markov chains over a character alphabet, and a slot-filling template grammar.
"""

import logging
import re
from typing import List, Optional, Tuple

import numpy as np

from ..config import GeneratorSpec
from ..errors import CorpusSpecError

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-12
ENTROPY_TOLERANCE = 1e-9
SLOT_PATTERN = re.compile(r"\{(\w+)\}")


def _check_stochastic(matrix: np.ndarray, what: str) -> None:
    if np.any(~np.isfinite(matrix)) or np.any(matrix < 0):
        raise CorpusSpecError(f"{what} has negative or non-finite entries")
    sums = matrix.sum(axis=-1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > ROW_SUM_TOLERANCE:
        raise CorpusSpecError(f"{what} is not stochastic: max |row sum - 1| = {worst:.3e}")


def resolve_chain(spec: GeneratorSpec) -> Tuple[np.ndarray, np.ndarray]:
    """(transition (V**k, V), initial (V**k,)) for a Markov spec, drawing the matrix if needed."""
    V, k = len(spec.alphabet), spec.order
    states = V ** k
    if spec.transition is not None:
        transition = np.asarray(spec.transition, dtype=np.float64)
        if transition.shape != (states, V):
            raise CorpusSpecError(f"transition matrix must have shape ({states}, {V}), got {transition.shape}")
    else:
        rng = np.random.default_rng(spec.matrix_seed)
        transition = rng.dirichlet(np.full(V, spec.dirichlet_concentration), size=states)
        transition /= transition.sum(axis=1, keepdims=True)
    _check_stochastic(transition, "transition matrix")

    if spec.initial is not None:
        initial = np.asarray(spec.initial, dtype=np.float64)
        if initial.shape != (states,):
            raise CorpusSpecError(f"initial distribution must have length {states}, got {initial.shape}")
        _check_stochastic(initial, "initial distribution")
    else:
        initial = np.full(states, 1.0 / states)
    return transition, initial


def state_transition_matrix(transition: np.ndarray, order: int) -> np.ndarray:
    """Expand a (V**k, V) order-k chain to its (V**k, V**k) chain on k-gram states."""
    states, V = transition.shape
    full = np.zeros((states, states))
    for s in range(states):
        nxt = (s * V) % states + np.arange(V)
        full[s, nxt] += transition[s]
    return full


def stationary_distribution(transition: np.ndarray, order: int = 1) -> np.ndarray:
    """Stationary distribution over k-gram states (least-squares solution of pi P = pi, sum pi = 1)."""
    full = state_transition_matrix(np.asarray(transition, dtype=np.float64), order)
    n = full.shape[0]
    system = np.vstack([full.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def entropy_rate(transition: np.ndarray, order: int = 1) -> float:
    """Entropy rate in nats/token: sum_s pi_s H(row_s)."""
    transition = np.asarray(transition, dtype=np.float64)
    pi = stationary_distribution(transition, order)
    with np.errstate(divide="ignore", invalid="ignore"):
        row_entropy = -np.where(transition > 0, transition * np.log(transition), 0.0).sum(axis=1)
    return float(pi @ row_entropy)


def generator_alphabet(spec: GeneratorSpec) -> str:
    """Every character a generator can emit, sorted."""
    if spec.kind == "markov-chain":
        return "".join(sorted(spec.alphabet))
    chars = set()
    for template in spec.templates:
        chars.update(SLOT_PATTERN.sub("", template))
    for fillers in spec.slots.values():
        for filler in fillers:
            chars.update(filler)
    return "".join(sorted(chars))


def validate_spec(spec: GeneratorSpec) -> Optional[float]:
    """Check a spec and return its analytic entropy rate (None for template grammars)."""
    if spec.kind == "template-grammar":
        for template in spec.templates:
            for slot in SLOT_PATTERN.findall(template):
                if not spec.slots.get(slot):
                    raise CorpusSpecError(f"template slot '{slot}' has no fillers")
        return None
    transition, _ = resolve_chain(spec)
    rate = entropy_rate(transition, spec.order)
    if spec.entropy_rate is not None and abs(rate - spec.entropy_rate) > ENTROPY_TOLERANCE:
        raise CorpusSpecError(f"stored entropy rate {spec.entropy_rate:.12g} differs from the matrix's {rate:.12g}")
    return rate


def _generate_markov(spec: GeneratorSpec, count: int, rng: np.random.Generator) -> List[str]:
    transition, initial = resolve_chain(spec)
    V, k, L = len(spec.alphabet), spec.order, spec.sequence_length
    states = V ** k
    alphabet = np.array(list(spec.alphabet))

    cdf = np.cumsum(transition, axis=1)
    state = np.minimum(np.searchsorted(np.cumsum(initial), rng.random(count), side="right"), states - 1)
    tokens = np.zeros((count, max(L, k)), dtype=np.int64)
    for j in range(k):
        tokens[:, j] = (state // V ** (k - 1 - j)) % V
    for t in range(k, L):
        u = rng.random(count)
        nxt = np.minimum((cdf[state] <= u[:, None]).sum(axis=1), V - 1)
        tokens[:, t] = nxt
        state = (state * V) % states + nxt
    return ["".join(row) for row in alphabet[tokens[:, :L]]]


def _generate_templates(spec: GeneratorSpec, count: int, rng: np.random.Generator) -> List[str]:
    sequences = []
    for _ in range(count):
        template = spec.templates[int(rng.integers(len(spec.templates)))]

        def fill(match: re.Match) -> str:
            fillers = spec.slots[match.group(1)]
            return fillers[int(rng.integers(len(fillers)))]

        sequences.append(SLOT_PATTERN.sub(fill, template)[: spec.sequence_length])
    return sequences


def generate(spec: GeneratorSpec, seed: Optional[int] = None, count: Optional[int] = None) -> List[str]:
    """Draw `count` (default spec.num_sequences) sequences; deterministic for a fixed seed."""
    validate_spec(spec)
    seed = spec.seed if seed is None else seed
    count = spec.num_sequences if count is None else count
    rng = np.random.default_rng(seed)
    if spec.kind == "markov-chain":
        sequences = _generate_markov(spec, count, rng)
    else:
        sequences = _generate_templates(spec, count, rng)
    logger.debug(f"[CORPUS] generated {len(sequences)} {spec.kind} sequences (seed {seed})")
    return sequences
