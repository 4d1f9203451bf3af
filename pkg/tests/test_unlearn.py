"""
Tests for the unified unlearning objective, its method presets and the unlearning runner.
"""

import numpy as np
import pytest

from conftest import VOCAB
from unlearning_lab.config import BehavioralConstraint, GeneratorSpec, MethodSpec, ModelSpec, TrainConfig, UnlearnRun
from unlearning_lab.corpus import CorpusSplits, generate, make_splits
from unlearning_lab.errors import MethodSpecError, UnknownMethodError
from unlearning_lab.eval import approx_retrain_target, forbidden_probabilities, perplexity
from unlearning_lab.lm import CharVocab, Role, Sgd, bigram_mle, next_token_distribution, training_step
from unlearning_lab.unlearn import (
    adversarial_from_probs,
    adversarial_token,
    kl_retain_term,
    plan_batches,
    reference_distribution,
    reference_targets,
    retrain_oracle,
    run_behavioral_unlearning,
    run_unlearning,
    unified_step,
    unlearning_gradients,
)


def _token_splits(token_corpus):
    return CorpusSplits(
        train=token_corpus,
        forget_indices=[0, 1],
        retain_sample_indices=[2, 3],
        general_indices=[4, 5],
        approximate=[[1, 2, 3, 4, 0, 1, 2, 3]],
    )


def test_gradient_ascent_step_negates_training_step(decoder, token_corpus):
    batch = token_corpus[:3] + token_corpus[8:10]
    lr = 0.05
    ascended = unified_step(decoder, batch, None, MethodSpec.preset("gradient-ascent"), lr, optimizer=Sgd())
    trained, _, _, _ = training_step(decoder, batch, lr, Sgd())
    for name, w in decoder.arrays.items():
        np.testing.assert_allclose(ascended.arrays[name] - w, -(trained.arrays[name] - w), rtol=0, atol=1e-12)


def test_unknown_preset():
    with pytest.raises(UnknownMethodError):
        MethodSpec.preset("forget-everything")


def test_adversarial_picks_most_likely_wrong_token():
    probs = np.array([0.1, 0.5, 0.3, 0.1])
    assert adversarial_from_probs(probs, true_token=1).tolist() == [2]
    assert adversarial_from_probs(probs, true_token=2).tolist() == [1]
    assert adversarial_from_probs(probs, true_token=1, k=2).tolist() == [2, 0]
    assert adversarial_from_probs(probs, true_token=1, k=10).tolist() == [2, 0, 3]


def test_adversarial_targets_match_per_position_choice(decoder):
    spec = MethodSpec.preset("adversarial")
    seq = [0, 3, 1, 4, 2]
    targets = reference_targets(spec, decoder, np.array([seq]))
    assert targets.shape == (1, 4, VOCAB)
    for t in range(1, len(seq)):
        expected = adversarial_token(decoder, seq[:t], seq[t])
        assert int(np.argmax(targets[0, t - 1])) == expected
        assert expected != seq[t]
        np.testing.assert_array_equal(targets[0, t - 1], reference_distribution(spec, decoder, seq[:t], seq[t]))


def test_top_k_adversarial_spreads_mass(decoder):
    spec = MethodSpec(name="adv-top2", reference="delta-adversarial", forget_sign="none", adversarial_k=2)
    targets = reference_targets(spec, decoder, np.array([[0, 1, 2, 3]]))
    assert np.all((targets > 0).sum(axis=-1) == 2)
    np.testing.assert_allclose(targets.sum(axis=-1), 1.0)


def test_top_k_needs_adversarial_reference():
    with pytest.raises(ValueError):
        MethodSpec(reference="uniform", adversarial_k=2)


def test_random_labels_targets_are_uniform(decoder):
    targets = reference_targets(MethodSpec.preset("random-labels"), decoder, np.array([[0, 1, 2], [2, 1, 0]]))
    np.testing.assert_allclose(targets, np.full((2, 2, VOCAB), 1.0 / VOCAB))


def test_true_token_targets_are_one_hot(decoder):
    targets = reference_targets(MethodSpec.preset("gradient-ascent"), decoder, np.array([[0, 4, 2]]))
    assert targets[0, 0, 4] == 1.0 and targets[0, 1, 2] == 1.0
    assert targets.sum() == 2.0


def test_kl_term_vanishes_at_vanilla(decoder, token_corpus):
    forget, retain = token_corpus[:2], token_corpus[2:5]
    assert kl_retain_term(decoder, decoder, retain) == pytest.approx(0.0, abs=1e-12)
    hybrid = unlearning_gradients(decoder, forget, retain, MethodSpec.preset("ga-kl-in-distribution"), vanilla=decoder)
    plain = unlearning_gradients(decoder, forget, None, MethodSpec.preset("gradient-ascent"))
    assert hybrid.retain == pytest.approx(0.0, abs=1e-10)
    assert hybrid.forget == pytest.approx(plain.forget)
    for name in plain.grads:
        np.testing.assert_allclose(hybrid.grads[name], plain.grads[name], atol=1e-10)


def test_kl_term_is_positive_after_a_step(decoder, token_corpus):
    moved = unified_step(decoder, token_corpus[:2], None, MethodSpec.preset("gradient-ascent"), 0.1, optimizer=Sgd())
    assert kl_retain_term(moved, decoder, token_corpus[2:5]) > 0


def test_descent_retain_term_matches_mean_nll(decoder, token_corpus):
    spec = MethodSpec.preset("ga-descent-in-distribution")
    value = unlearning_gradients(decoder, token_corpus[:2], token_corpus[2:4], spec)
    assert value.retain == pytest.approx(np.log(perplexity(decoder, token_corpus[2:4])))
    assert value.forget == pytest.approx(-np.log(perplexity(decoder, token_corpus[:2])))


def test_zero_retain_coefficient_reduces_hybrid_to_gradient_ascent(decoder, token_corpus):
    forget, retain = token_corpus[:2], token_corpus[2:5]
    plain = unlearning_gradients(decoder, forget, None, MethodSpec.preset("gradient-ascent"))
    for preset in ("ga-descent-in-distribution", "ga-kl-general"):
        spec = MethodSpec.preset(preset).model_copy(update={"retain_coefficient": 0.0})
        hybrid = unlearning_gradients(decoder, forget, retain, spec, vanilla=decoder)
        assert hybrid.forget == pytest.approx(plain.forget)
        for name in plain.grads:
            np.testing.assert_allclose(hybrid.grads[name], plain.grads[name], atol=1e-12)


def test_random_labels_bigram_gradient_is_softmax_minus_uniform():
    model = bigram_mle([[0, 1, 2, 3, 4, 0, 2, 2]], VOCAB)
    value = unlearning_gradients(model, [[2, 3]], None, MethodSpec.preset("random-labels"))
    expected = np.zeros((VOCAB, VOCAB))
    expected[2] = next_token_distribution(model, [2]) - 1.0 / VOCAB
    np.testing.assert_allclose(value.grads["W"], expected, atol=1e-12)


def test_batch_requirements(decoder, token_corpus):
    with pytest.raises(MethodSpecError):
        unlearning_gradients(decoder, [], None, MethodSpec.preset("gradient-ascent"))
    with pytest.raises(MethodSpecError):
        unlearning_gradients(decoder, token_corpus[:2], token_corpus[2:4], MethodSpec.preset("gradient-ascent"))
    with pytest.raises(MethodSpecError):
        unlearning_gradients(decoder, token_corpus[:2], None, MethodSpec.preset("ga-descent-general"))
    with pytest.raises(MethodSpecError):
        unlearning_gradients(decoder, token_corpus[:2], token_corpus[2:4], MethodSpec.preset("ga-kl-general"))


def test_plan_batches_covers_items_once():
    plan = plan_batches(10, 3)
    assert [len(b) for b in plan] == [4, 3, 3]
    assert sorted(i for b in plan for i in b) == list(range(10))
    shuffled = plan_batches(10, 4, np.random.default_rng(0))
    assert sorted(i for b in shuffled for i in b) == list(range(10))
    assert plan_batches(2, 5) == [[0], [1], [0], [1], [0]]
    assert plan_batches(0, 3) == []


def test_fixed_steps_run(decoder, token_corpus):
    splits = _token_splits(token_corpus)
    run = UnlearnRun(method="gradient-ascent", stop_rule="fixed-steps", steps=3, learning_rate=0.05)
    model, summary = run_unlearning(decoder, splits, run)
    assert summary.steps_taken == 3
    assert len(summary.trace) == 3
    assert summary.stop_reason == "budget"
    assert summary.forget_tokens == 3 * 7
    assert model.role == Role.UNLEARNED
    assert summary.trace[-1].forget_ppl > perplexity(decoder, splits.forget)


def test_zero_step_run_returns_vanilla_weights(decoder, token_corpus):
    run = UnlearnRun(method="gradient-ascent", stop_rule="fixed-steps", steps=0)
    model, summary = run_unlearning(decoder, _token_splits(token_corpus), run)
    assert summary.steps_taken == 0
    assert model.fingerprint() == decoder.fingerprint()


def test_hybrid_run_uses_retain_data(decoder, token_corpus):
    run = UnlearnRun(method="ga-kl-general", stop_rule="fixed-steps", steps=2, learning_rate=0.05)
    model, summary = run_unlearning(decoder, _token_splits(token_corpus), run)
    assert summary.steps_taken == 2
    assert all(np.isfinite(step.retain_ppl) for step in summary.trace)


def test_target_rule_stops_once_reached(decoder, token_corpus):
    splits = _token_splits(token_corpus)
    start = perplexity(decoder, splits.forget)
    run = UnlearnRun(method="gradient-ascent", stop_rule="reach-forget-ppl-target", step_budget=10)
    _, summary = run_unlearning(decoder, splits, run, target=start)
    assert summary.steps_taken == 0
    assert summary.target_reached
    assert summary.stop_reason == "target-reached"


def test_target_rule_respects_budget(decoder, token_corpus):
    run = UnlearnRun(method="random-labels", stop_rule="reach-forget-ppl-target", target=1e6, step_budget=2)
    _, summary = run_unlearning(decoder, _token_splits(token_corpus), run)
    assert summary.steps_taken == 2
    assert not summary.target_reached
    assert summary.stop_reason == "budget"


def test_target_rule_needs_a_target(decoder, token_corpus):
    run = UnlearnRun(method="gradient-ascent", stop_rule="reach-forget-ppl-target")
    with pytest.raises(MethodSpecError):
        run_unlearning(decoder, _token_splits(token_corpus), run)


def test_target_rule_lands_inside_the_band(token_corpus):
    splits = _token_splits(token_corpus)
    vanilla = bigram_mle(splits.retain, VOCAB)
    target = 1.5 * perplexity(vanilla, splits.forget)
    # one full step at this lr overshoots the target many times over
    run = UnlearnRun(
        method="gradient-ascent", stop_rule="reach-forget-ppl-target", optimizer="sgd",
        learning_rate=100.0, tolerance=0.02, step_budget=8,
    )
    model, summary = run_unlearning(vanilla, splits, run, target=target)
    final = perplexity(model, splits.forget)
    assert summary.stop_reason == "target-reached"
    assert summary.target_reached
    assert summary.backtracks >= 1
    assert 0.98 * target <= final <= 1.02 * target
    assert summary.trace[-1].forget_ppl == pytest.approx(final)


def test_target_rule_without_overshoot_never_backtracks(token_corpus):
    splits = _token_splits(token_corpus)
    vanilla = bigram_mle(splits.retain, VOCAB)
    run = UnlearnRun(method="gradient-ascent", stop_rule="reach-forget-ppl-target", target=1e6, step_budget=3)
    _, summary = run_unlearning(vanilla, splits, run)
    assert summary.backtracks == 0
    assert summary.steps_taken == 3


def test_trace_monitors_the_retain_sample(decoder, token_corpus):
    splits = _token_splits(token_corpus)
    run = UnlearnRun(method="gradient-ascent", stop_rule="fixed-steps", steps=2, learning_rate=0.05)
    model, summary = run_unlearning(decoder, splits, run)
    assert summary.trace[-1].retain_ppl == pytest.approx(perplexity(model, splits.retain_sample))
    assert summary.trace[-1].retain_ppl != pytest.approx(perplexity(model, splits.general))


def test_retrain_oracle_never_sees_forget_set(token_corpus):
    splits = _token_splits(token_corpus)
    spec = ModelSpec(arch="bigram")
    oracle = retrain_oracle(splits, TrainConfig(epochs=2, batch_size=4), spec, VOCAB)
    assert oracle.role == Role.RETRAINED
    again = retrain_oracle(splits, TrainConfig(epochs=2, batch_size=4), spec, VOCAB)
    assert oracle.fingerprint() == again.fingerprint()


def test_behavioral_run_meets_type2_constraint():
    model = bigram_mle([[1, 2, 1, 2, 1, 2, 1, 0, 1, 3, 1, 4]], VOCAB)
    constraint = BehavioralConstraint(mode="type-II", forbidden=[([0, 1], 2)], xi=0.01)
    assert forbidden_probabilities(model, constraint.forbidden)[0] == pytest.approx(0.5)
    unlearned, summary = run_behavioral_unlearning(model, constraint, lr=0.1, step_budget=200, monitor=[[0, 1, 2, 3]])
    assert summary.target_reached
    assert summary.stop_reason == "target-reached"
    assert forbidden_probabilities(unlearned, constraint.forbidden)[0] <= 0.01
    assert next_token_distribution(unlearned, [1]).sum() == pytest.approx(1.0)


def test_behavioral_run_needs_type2():
    model = bigram_mle([[0, 1, 2]], VOCAB)
    constraint = BehavioralConstraint(mode="type-I", prompts=[[0, 1]])
    with pytest.raises(MethodSpecError):
        run_behavioral_unlearning(model, constraint, lr=0.1, step_budget=1, monitor=[[0, 1]])


def test_behavioral_run_leaves_satisfied_pairs_alone():
    model = bigram_mle([[1, 2, 1, 2, 1, 2, 1, 0, 1, 3, 1, 4]], VOCAB)
    pairs = [([0, 1], 2), ([2], 0)]
    constraint = BehavioralConstraint(mode="type-II", forbidden=pairs, xi=0.01)
    assert forbidden_probabilities(model, pairs)[1] <= 0.01
    unlearned, summary = run_behavioral_unlearning(model, constraint, lr=0.1, step_budget=200, monitor=[[0, 1, 2, 3]])
    assert summary.target_reached
    np.testing.assert_array_equal(unlearned.arrays["W"][2], model.arrays["W"][2])
    assert summary.forget_tokens == summary.steps_taken


def test_behavioral_run_holds_retain_perplexity():
    model = bigram_mle([[1, 2, 1, 2, 1, 2, 1, 0, 1, 3, 1, 4]], VOCAB)
    constraint = BehavioralConstraint(mode="type-II", forbidden=[([0, 1], 2)], xi=0.01)
    retain = [[0, 1, 2, 1, 2]]
    start = perplexity(model, retain)
    unlearned, summary = run_behavioral_unlearning(
        model, constraint, lr=0.1, step_budget=200, monitor=[[0, 1, 2, 3]], retain=retain, ppl_slack=0.05
    )
    # reaching xi would need P(2 | 1) near 0.01, far past the slack on this retain set
    assert not summary.target_reached
    assert summary.rejected_steps > 0
    assert summary.stop_reason in ("retain-guard", "budget")
    assert perplexity(unlearned, retain) <= start * 1.05 + 1e-12
    assert forbidden_probabilities(unlearned, constraint.forbidden)[0] < 0.5


def test_behavioral_run_with_kl_anchor_still_meets_constraint():
    model = bigram_mle([[1, 2, 1, 2, 1, 2, 1, 0, 1, 3, 1, 4]], VOCAB)
    constraint = BehavioralConstraint(mode="type-II", forbidden=[([0, 1], 2)], xi=0.01)
    retain = [[1, 3, 1, 4, 1, 0]]
    start = perplexity(model, retain)
    unlearned, summary = run_behavioral_unlearning(
        model, constraint, lr=0.1, step_budget=200, monitor=[[0, 1, 2, 3]], retain=retain, ppl_slack=0.05
    )
    assert summary.target_reached
    assert perplexity(unlearned, retain) <= start * 1.05


def _bigram_lab(seed):
    spec = GeneratorSpec(
        alphabet="abcde", num_sequences=1000, sequence_length=50, dirichlet_concentration=3.0, matrix_seed=seed
    )
    text = make_splits(generate(spec, seed=seed), 0.1, None, 100, seed=seed, spec=spec, general_size=100)
    splits = text.map(CharVocab(spec.alphabet).encode)
    vanilla = bigram_mle(splits.train, len(spec.alphabet))
    oracle = bigram_mle(splits.retain, len(spec.alphabet), role=Role.RETRAINED)
    return splits, vanilla, oracle


def test_target_rule_tracks_the_retrain_oracle_on_a_bigram():
    rows = []
    for seed in (0, 1, 2):
        splits, vanilla, oracle = _bigram_lab(seed)
        target = approx_retrain_target(vanilla, splits.approximate).ppl
        run = UnlearnRun(method="gradient-ascent", learning_rate=0.05)
        model, summary = run_unlearning(vanilla, splits, run, target=target, seed=seed)
        assert summary.target_reached
        rows.append(
            (
                perplexity(model, splits.forget),
                perplexity(oracle, splits.forget),
                perplexity(model, splits.retain),
                perplexity(vanilla, splits.retain),
            )
        )
    unlearned, retrained, retain, vanilla_retain = np.median(np.array(rows), axis=0)
    assert abs(unlearned - retrained) <= 0.10 * retrained
    assert abs(retain - vanilla_retain) <= 0.05 * vanilla_retain
