"""
Tests for corpus generation, splits and corpus files.
"""

import numpy as np
import pytest

from unlearning_lab.config import GeneratorSpec
from unlearning_lab.corpus import (
    CorpusSplits,
    entropy_rate,
    generate,
    generator_alphabet,
    make_splits,
    read_corpus,
    read_split_manifest,
    stationary_distribution,
    validate_spec,
    write_corpus,
    write_split_manifest,
)
from unlearning_lab.corpus.generator import state_transition_matrix
from unlearning_lab.errors import CorpusSpecError, SplitError

TWO_STATE = [[0.9, 0.1], [0.5, 0.5]]


def _entropy(row):
    row = np.asarray(row)
    return float(-(row * np.log(row)).sum())


def test_two_state_stationary_distribution_and_entropy_rate():
    pi = stationary_distribution(np.array(TWO_STATE))
    np.testing.assert_allclose(pi, [5 / 6, 1 / 6], atol=1e-12)
    expected = 5 / 6 * _entropy(TWO_STATE[0]) + 1 / 6 * _entropy(TWO_STATE[1])
    assert entropy_rate(np.array(TWO_STATE)) == pytest.approx(expected, abs=1e-12)


def test_higher_order_stationary_distribution_is_invariant():
    rng = np.random.default_rng(0)
    transition = rng.dirichlet(np.ones(3), size=9)
    pi = stationary_distribution(transition, order=2)
    full = state_transition_matrix(transition, 2)
    assert pi.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(pi @ full, pi, atol=1e-10)


def test_generation_is_deterministic_per_seed():
    spec = GeneratorSpec(alphabet="abc", num_sequences=20, sequence_length=12, matrix_seed=5)
    first = generate(spec, seed=7)
    assert first == generate(spec, seed=7)
    assert first != generate(spec, seed=8)
    assert len(first) == 20
    assert all(len(s) == 12 and set(s) <= set("abc") for s in first)


def test_empirical_conditional_entropy_approaches_rate():
    spec = GeneratorSpec(alphabet="ab", transition=TWO_STATE, num_sequences=200, sequence_length=200)
    counts = np.zeros((2, 2))
    for seq in generate(spec, seed=1):
        ids = ["ab".index(c) for c in seq]
        for a, b in zip(ids, ids[1:]):
            counts[a, b] += 1
    joint = counts / counts.sum()
    conditional = counts / counts.sum(axis=1, keepdims=True)
    empirical = float(-(joint * np.log(conditional)).sum())
    assert empirical == pytest.approx(validate_spec(spec), abs=0.02)


def test_stored_entropy_rate_must_match():
    rate = entropy_rate(np.array(TWO_STATE))
    assert validate_spec(GeneratorSpec(alphabet="ab", transition=TWO_STATE, entropy_rate=rate)) == pytest.approx(rate)
    with pytest.raises(CorpusSpecError):
        validate_spec(GeneratorSpec(alphabet="ab", transition=TWO_STATE, entropy_rate=rate + 0.1))


def test_non_stochastic_matrix_is_rejected():
    with pytest.raises(CorpusSpecError):
        validate_spec(GeneratorSpec(alphabet="ab", transition=[[0.5, 0.6], [0.5, 0.5]]))
    with pytest.raises(CorpusSpecError):
        validate_spec(GeneratorSpec(alphabet="ab", transition=[[1.0, 0.0]]))


def test_template_grammar_fills_slots():
    spec = GeneratorSpec(
        kind="template-grammar",
        templates=["{name} likes {food}."],
        slots={"name": ["ann", "bo"], "food": ["figs", "tea"]},
        num_sequences=30,
        sequence_length=40,
    )
    seqs = generate(spec, seed=0)
    allowed = {f"{n} likes {f}." for n in ("ann", "bo") for f in ("figs", "tea")}
    assert set(seqs) <= allowed
    assert set(generator_alphabet(spec)) >= set("annbolikesfigstea. ")
    assert validate_spec(spec) is None


def test_template_slot_without_fillers_is_rejected():
    spec = GeneratorSpec(kind="template-grammar", templates=["{who} ran"], slots={})
    with pytest.raises(CorpusSpecError):
        generate(spec)


def _corpus(n=40):
    return [f"seq{i:03d}" for i in range(n)]


def test_splits_are_disjoint_and_sized():
    splits = make_splits(_corpus(), 0.1, None, 3, seed=0, general_size=5, approximate=["new1", "new2", "new3"])
    forget = set(splits.forget_indices)
    assert len(forget) == 4
    assert len(splits.retain_sample_indices) == 4
    assert len(splits.general_indices) == 5
    assert not forget & set(splits.retain_sample_indices)
    assert not forget & set(splits.general_indices)
    assert not set(splits.retain_sample_indices) & set(splits.general_indices)
    assert len(splits.retain) == 36
    assert set(splits.retain).isdisjoint(splits.forget)


def test_splits_depend_only_on_seed():
    a = make_splits(_corpus(), 0.2, 4, 2, seed=3, approximate=["x", "y"])
    b = make_splits(_corpus(), 0.2, 4, 2, seed=3, approximate=["x", "y"])
    c = make_splits(_corpus(), 0.2, 4, 2, seed=4, approximate=["x", "y"])
    assert a == b
    assert a.forget_indices != c.forget_indices


def test_forget_membership_ignores_corpus_order():
    corpus = _corpus()
    shuffled = [corpus[i] for i in np.random.default_rng(5).permutation(len(corpus))]
    a = make_splits(corpus, 0.2, 4, 2, seed=3, general_size=6, approximate=["x", "y"])
    b = make_splits(shuffled, 0.2, 4, 2, seed=3, general_size=6, approximate=["x", "y"])
    assert sorted(a.forget) == sorted(b.forget)
    assert sorted(a.retain_sample) == sorted(b.retain_sample)
    assert sorted(a.general) == sorted(b.general)


def test_split_invariants_hold_for_many_seeds():
    corpus = _corpus(60)
    for seed in range(100):
        splits = make_splits(corpus, 0.05, None, 2, seed=seed, general_size=10, approximate=["x", "y"])
        forget, sample, general = map(set, (splits.forget_indices, splits.retain_sample_indices, splits.general_indices))
        assert len(forget) == 3 and len(sample) == 3 and len(general) == 10
        assert not forget & sample and not forget & general and not sample & general
        assert forget | set(splits.retain_indices) == set(range(60))


def test_approximate_set_avoids_training_sequences():
    spec = GeneratorSpec(alphabet="abcd", num_sequences=50, sequence_length=8, matrix_seed=2)
    corpus = generate(spec, seed=0)
    splits = make_splits(corpus, 0.1, None, 10, seed=0, spec=spec)
    assert len(splits.approximate) == 10
    assert set(splits.approximate).isdisjoint(corpus)


@pytest.mark.parametrize("fraction", [0.0, 1.0, 0.001])
def test_bad_forget_fraction(fraction):
    with pytest.raises(SplitError):
        make_splits(_corpus(), fraction, None, 1, seed=0, approximate=["z"])


def test_oversized_retain_and_general_are_rejected():
    with pytest.raises(SplitError):
        make_splits(_corpus(10), 0.5, 3, 1, seed=0, general_size=3, approximate=["z"])


def test_missing_approximate_source_is_rejected():
    with pytest.raises(SplitError):
        make_splits(_corpus(), 0.1, None, 3, seed=0)


def test_check_catches_overlap():
    bad = CorpusSplits(train=_corpus(5), forget_indices=[0], retain_sample_indices=[0], general_indices=[], approximate=["z"])
    with pytest.raises(SplitError):
        bad.check()


def test_check_rejects_approximate_copy_of_training_sequence():
    corpus = _corpus(5)
    bad = CorpusSplits(
        train=corpus, forget_indices=[0], retain_sample_indices=[1], general_indices=[], approximate=["z", corpus[3]]
    )
    with pytest.raises(SplitError, match="A and D must be disjoint"):
        bad.check()


def test_check_compares_token_sequences_by_content():
    bad = CorpusSplits(
        train=[[0, 1, 2], [2, 1, 0]],
        forget_indices=[0],
        retain_sample_indices=[],
        general_indices=[],
        approximate=[[2, 1, 0]],
    )
    with pytest.raises(SplitError):
        bad.check()


def test_explicit_approximate_overlapping_corpus_is_rejected():
    with pytest.raises(SplitError):
        make_splits(_corpus(), 0.1, None, 2, seed=0, approximate=["fresh", "seq007"])


def test_exhausted_generator_never_admits_training_copies():
    spec = GeneratorSpec(kind="template-grammar", templates=["ab {x}"], slots={"x": ["c"]}, num_sequences=3)
    with pytest.raises(SplitError):
        make_splits(generate(spec, seed=0), 0.34, None, 2, seed=0, spec=spec)


def test_map_keeps_indices():
    splits = make_splits(_corpus(), 0.1, None, 2, seed=0, approximate=["ab", "cd"])
    lengths = splits.map(len)
    assert lengths.forget_indices == splits.forget_indices
    assert lengths.approximate == [2, 2]


def test_corpus_and_manifest_files(tmp_path):
    corpus = _corpus(12)
    splits = make_splits(corpus, 0.25, 2, 2, seed=1, general_size=2, approximate=["u", "v"])
    write_corpus(tmp_path / "corpus.txt", corpus)
    write_corpus(tmp_path / "approximate.txt", splits.approximate)
    write_split_manifest(tmp_path / "splits.json", splits, extra={"seed": 1})

    train = read_corpus(tmp_path / "corpus.txt")
    approx = read_corpus(tmp_path / "approximate.txt")
    assert train == corpus
    assert read_split_manifest(tmp_path / "splits.json", train, approx) == splits
    with pytest.raises(SplitError):
        read_split_manifest(tmp_path / "splits.json", train[:-1], approx)


def test_line_breaks_cannot_be_stored(tmp_path):
    with pytest.raises(CorpusSpecError):
        write_corpus(tmp_path / "bad.txt", ["ok", "two\nlines"])
