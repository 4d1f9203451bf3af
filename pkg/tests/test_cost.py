"""
Tests for the FLOPs cost model.
"""

import pytest

from unlearning_lab.config import MethodSpec
from unlearning_lab.cost import (
    cost_table,
    efficiency_ratio,
    format_flops,
    forward_flops,
    method_flops,
    training_flops,
)
from unlearning_lab.cost.flops import as_count
from unlearning_lab.errors import UnknownMethodError

P = 6e9
TRAINING_TOKENS = 3e12
FORGET_TOKENS = 2000 * 4096


def test_retraining_row():
    flops = training_flops(TRAINING_TOKENS, P)
    assert flops == 108_000_000_000_000_000_000_000
    assert format_flops(flops) == "1.08e23"


def test_first_order_rows():
    assert method_flops("gradient-ascent", FORGET_TOKENS, P) == 294_912_000_000_000_000
    assert format_flops(method_flops("gradient-ascent", FORGET_TOKENS, P)) == "2.95e17"
    assert method_flops("random-labels", FORGET_TOKENS, P) == method_flops("gradient-ascent", FORGET_TOKENS, P)


def test_forward_pass_component():
    assert forward_flops(FORGET_TOKENS, P) == 98_304_000_000_000_000


def test_adversarial_row():
    flops = method_flops("adversarial", FORGET_TOKENS, P)
    assert flops == 294_912_000_000_000_000 + 98_304_000_000_000_000
    assert format_flops(flops) == "3.93e17"


@pytest.mark.parametrize(
    "name", ["ga-descent-general", "ga-descent-in-distribution", "ga-kl-general", "ga-kl-in-distribution"]
)
def test_hybrid_rows(name):
    flops = method_flops(name, FORGET_TOKENS, P)
    assert flops == 2 * 294_912_000_000_000_000
    assert format_flops(flops) == "5.90e17"


def test_epochs_scale_linearly():
    assert method_flops("gradient-ascent", FORGET_TOKENS, P, epochs=3) == 3 * method_flops(
        "gradient-ascent", FORGET_TOKENS, P
    )


def test_custom_spec_uses_its_kind():
    spec = MethodSpec(name="adv-top3", reference="delta-adversarial", forget_sign="none", adversarial_k=3)
    assert method_flops(spec, FORGET_TOKENS, P) == method_flops("adversarial", FORGET_TOKENS, P)
    assert method_flops("hybrid", 10, 10) == 1200


def test_unknown_method():
    with pytest.raises(UnknownMethodError):
        method_flops("fine-tune-forever", FORGET_TOKENS, P)


def test_counts_must_be_exact_non_negative_integers():
    assert as_count("3e12") == 3_000_000_000_000
    assert as_count(6e9) == 6_000_000_000
    with pytest.raises(ValueError):
        as_count(1.5)
    with pytest.raises(ValueError):
        as_count(-1)
    with pytest.raises(ValueError):
        as_count(True)


def test_cost_table():
    table = cost_table(P, TRAINING_TOKENS, FORGET_TOKENS)
    assert len(table) == 8
    assert table.iloc[0]["method"] == "retraining"
    texts = dict(zip(table["method"], table["flops_text"]))
    assert texts["retraining"] == "1.08e23"
    assert texts["adversarial"] == "3.93e17"
    assert texts["ga-kl-general"] == "5.90e17"
    assert all(isinstance(v, int) for v in table["flops"])


def test_efficiency_ratio():
    ratio = efficiency_ratio(P, TRAINING_TOKENS, FORGET_TOKENS)
    assert ratio == pytest.approx(108e21 / 294.912e15)
    assert format_flops(0) == "0"
