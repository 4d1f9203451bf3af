"""
Tests for perplexity, Min-K% membership inference and the behavioral measures.
"""

import math

import numpy as np
import pytest

from conftest import VOCAB
from unlearning_lab.config import BehavioralConstraint, GeneratorSpec, MiaConfig
from unlearning_lab.corpus import generate
from unlearning_lab.errors import ModelInputError
from unlearning_lab.eval import (
    approx_retrain_target,
    auc,
    forbidden_probabilities,
    js_divergence,
    kl_divergence,
    mia_auc_sweep,
    mia_table,
    min_k_from_log_probs,
    min_k_score,
    next_token_accuracy,
    perplexity,
    renyi_divergence,
    split_score,
    type1_measure,
    type2_violation,
)
from unlearning_lab.eval.mia import min_k_count
from unlearning_lab.lm import CharVocab, bigram_mle, init_model, token_log_probs


def test_uniform_model_perplexity_is_vocab_size(bigram):
    assert perplexity(bigram, [[0, 1, 2], [3, 4, 0, 1]]) == pytest.approx(VOCAB)


def test_perplexity_needs_predicted_positions(bigram):
    with pytest.raises(ModelInputError):
        perplexity(bigram, [])
    with pytest.raises(ModelInputError):
        perplexity(bigram, [[1], [2]])


def test_accuracy_on_a_deterministic_cycle():
    data = [[0, 1, 2, 0, 1, 2, 0]]
    model = bigram_mle(data, 3)
    assert next_token_accuracy(model, data) == 1.0
    assert perplexity(model, data) == pytest.approx(1.0)
    score = split_score(model, data)
    assert score.tokens == 6


def test_accuracy_breaks_ties_toward_lowest_id(bigram):
    # the uniform model always predicts token 0
    assert next_token_accuracy(bigram, [[3, 0, 1]]) == pytest.approx(0.5)


def test_approx_retrain_target_is_vanilla_on_approximate(bigram):
    target = approx_retrain_target(bigram, [[0, 1, 2, 3]])
    assert target.ppl == pytest.approx(VOCAB)
    with pytest.raises(ModelInputError):
        approx_retrain_target(bigram, [])


def test_min_k_hand_values():
    lp = [-1.0, -3.0, -2.0, -4.0]
    assert min_k_from_log_probs(lp, 10) == pytest.approx(-4.0)
    assert min_k_from_log_probs(lp, 50) == pytest.approx(-3.5)
    assert min_k_from_log_probs(lp, 100) == pytest.approx(-2.5)
    assert min_k_count(30, 10) == 3
    assert min_k_count(1, 3) == 1
    with pytest.raises(ValueError):
        min_k_from_log_probs(lp, 0)
    with pytest.raises(ModelInputError):
        min_k_from_log_probs([], 50)


def test_min_k_score_uses_model_log_probs(decoder):
    seq = [0, 1, 2, 3, 4, 0]
    lp = token_log_probs(decoder, seq)
    assert min_k_score(decoder, seq, 40) == pytest.approx(np.sort(lp)[:2].mean())


def test_auc_hand_values():
    assert auc([2.0, 3.0], [1.0]) == 1.0
    assert auc([1.0], [2.0, 3.0]) == 0.0
    assert auc([1.0, 1.0], [1.0, 1.0]) == 0.5
    assert auc([1.0, 3.0], [2.0]) == 0.5
    assert auc([2.0], [2.0, 1.0]) == 0.75
    with pytest.raises(ValueError):
        auc([], [1.0])


def test_mia_sweep_picks_smallest_k_on_ties(decoder, token_corpus):
    result = mia_auc_sweep(decoder, token_corpus[:4], token_corpus[:4], MiaConfig(k_percents=[50, 20, 100]))
    assert list(result.auc_per_k) == [20, 50, 100]
    assert all(v == 0.5 for v in result.auc_per_k.values())
    assert result.best_k == 20
    table = mia_table({"vanilla": result})
    assert list(table.columns) == ["model", "k_percent", "auc", "best"]
    assert table["best"].sum() == 1


def test_mia_separates_memorised_sequences():
    members = [[0, 1, 2, 3, 4, 0, 1]] * 3
    non_members = [[4, 3, 2, 1, 0, 4, 3], [2, 2, 2, 2, 2, 2, 2]]
    model = bigram_mle(members, VOCAB)
    result = mia_auc_sweep(model, members, non_members, MiaConfig(k_percents=[10, 50]))
    assert result.best_auc == 1.0


def test_renyi_and_kl_hand_values():
    p, q = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    assert renyi_divergence(p, q, 2.0) == pytest.approx(math.log(4 / 3))
    assert kl_divergence(p, q) == pytest.approx(0.5 * math.log(4 / 3))
    assert renyi_divergence(p, p, 0.5) == pytest.approx(0.0, abs=1e-12)
    assert js_divergence(p, q) == pytest.approx(js_divergence(q, p))
    assert js_divergence(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(math.log(2))


def test_renyi_rejects_bad_orders():
    p = np.array([0.5, 0.5])
    with pytest.raises(ValueError):
        renyi_divergence(p, p, 1.0)
    with pytest.raises(ValueError):
        renyi_divergence(p, p, 0.0)


def test_renyi_handles_zero_mass_in_q():
    value = renyi_divergence(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 2.0)
    assert np.isfinite(value) and value > 10


def test_type1_measure_is_zero_for_the_same_model(decoder, bigram):
    prompts = [[0, 1, 2], [3, 4]]
    assert type1_measure(decoder, decoder, prompts, 2.0) == pytest.approx(0.0, abs=1e-12)
    forward = type1_measure(decoder, bigram, prompts, 2.0)
    assert forward > 0
    assert forward == pytest.approx(type1_measure(bigram, decoder, prompts, 2.0))
    with pytest.raises(ModelInputError):
        type1_measure(decoder, bigram, [], 2.0)


def test_type2_violation_reports_worst_pair():
    model = bigram_mle([[0, 1, 0, 2, 0, 1, 1, 3]], VOCAB)
    pairs = [([4, 0], 2), ([0], 1), ([2, 1], 3)]
    probs = forbidden_probabilities(model, pairs)
    np.testing.assert_allclose(probs, [1 / 3, 2 / 3, 1 / 3], atol=1e-12)
    result = type2_violation(model, BehavioralConstraint(mode="type-II", forbidden=pairs, xi=0.5))
    assert result.worst_pair == 1
    assert result.value == pytest.approx(2 / 3)
    assert not result.satisfied
    loose = type2_violation(model, BehavioralConstraint(mode="type-II", forbidden=pairs, xi=0.9))
    assert loose.satisfied


def test_model_that_never_saw_either_set_has_chance_auc():
    spec = GeneratorSpec(alphabet="abcde", num_sequences=800, sequence_length=40, dirichlet_concentration=3.0)
    vocab = CharVocab(spec.alphabet)
    retrained = bigram_mle([vocab.encode(s) for s in generate(spec, seed=0)], len(vocab))
    members = [vocab.encode(s) for s in generate(spec, seed=1, count=100)]
    non_members = [vocab.encode(s) for s in generate(spec, seed=2, count=100)]
    result = mia_auc_sweep(retrained, members, non_members, MiaConfig(k_percents=[20, 100]))
    for value in result.auc_per_k.values():
        assert abs(value - 0.5) < 0.15


def test_renyi_is_nondecreasing_in_alpha():
    rng = np.random.default_rng(11)
    alphas = [0.25, 0.5, 0.9, 0.99, 1.01, 2.0, 3.0, 10.0]
    for _ in range(20):
        p, q = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
        values = [renyi_divergence(p, q, a) for a in alphas]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
        assert values[3] - 1e-9 <= kl_divergence(p, q) <= values[4] + 1e-9


@pytest.mark.parametrize("alpha", [0.5, 2.0, 5.0])
def test_type1_measure_is_symmetric(decoder_spec, alpha):
    a = init_model(decoder_spec, VOCAB, seed=1)
    b = init_model(decoder_spec.model_copy(update={"init_std": 0.5}), VOCAB, seed=2)
    prompts = [[0, 1, 2, 3], [4, 4], [2]]
    assert type1_measure(a, b, prompts, alpha) == pytest.approx(type1_measure(b, a, prompts, alpha), rel=1e-12)
    assert type1_measure(a, b, prompts, alpha) > 0
