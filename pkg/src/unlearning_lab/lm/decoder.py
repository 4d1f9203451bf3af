"""
Tiny decoder-only transformer built on the computation graph.
Pre-norm blocks: causal multi-head attention followed by a 4x MLP, both residual.
"""

import math
from typing import Dict, Tuple

import numpy as np

from ..autodiff import CompGraph, NodeId
from ..config import ModelSpec
from .params import Arch, ModelParams, Role

MASK_VALUE = -1e9


def init_decoder(spec: ModelSpec, vocab_size: int, seed: int) -> ModelParams:
    """Gaussian(0, init_std) weights, unit layer-norm gains, zero biases."""
    rng = np.random.default_rng(seed)
    d, V = spec.dim, vocab_size

    def normal(*shape):
        return rng.normal(0.0, spec.init_std, size=shape)

    arrays: Dict[str, np.ndarray] = {
        "tok_emb": normal(V, d),
        "pos_emb": normal(spec.context_length, d),
    }
    for layer in range(spec.layers):
        p = f"h{layer}."
        arrays[p + "ln1_g"] = np.ones(d)
        arrays[p + "ln1_b"] = np.zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            arrays[p + name] = normal(d, d)
        arrays[p + "ln2_g"] = np.ones(d)
        arrays[p + "ln2_b"] = np.zeros(d)
        arrays[p + "mlp_w1"] = normal(d, 4 * d)
        arrays[p + "mlp_b1"] = np.zeros(4 * d)
        arrays[p + "mlp_w2"] = normal(4 * d, d)
        arrays[p + "mlp_b2"] = np.zeros(d)
    arrays["lnf_g"] = np.ones(d)
    arrays["lnf_b"] = np.zeros(d)
    arrays["w_out"] = normal(d, V)
    arrays["b_out"] = np.zeros(V)

    return ModelParams(
        arch=Arch.TINY_DECODER,
        vocab_size=V,
        arrays=arrays,
        role=Role.VANILLA,
        layers=spec.layers,
        dim=d,
        heads=spec.heads,
        context_length=spec.context_length,
        activation=spec.activation,
    )


def causal_mask(length: int) -> np.ndarray:
    return np.triu(np.full((length, length), MASK_VALUE), k=1)


def build_decoder_graph(g: CompGraph, model: ModelParams, ids: np.ndarray) -> Tuple[Dict[str, NodeId], NodeId]:
    """Record the decoder on ids of shape (B, L); returns (parameter nodes, probs node (B, L, V))."""
    B, L = ids.shape
    d, H = model.dim, model.heads
    dh = d // H
    params = {name: g.input(value, name=name) for name, value in model.arrays.items()}

    def norm(x: NodeId, prefix: str) -> NodeId:
        return g.add(g.mul(g.layer_norm(x), params[prefix + "_g"]), params[prefix + "_b"])

    def split_heads(x: NodeId) -> NodeId:
        return g.transpose(g.reshape(x, (B, L, H, dh)), (0, 2, 1, 3))

    act = g.gelu if model.activation == "gelu" else g.relu
    mask = g.input(causal_mask(L), name="causal_mask")

    x = g.add(g.embedding(params["tok_emb"], ids), g.embedding(params["pos_emb"], np.arange(L)))
    for layer in range(model.layers):
        p = f"h{layer}."
        h = norm(x, p + "ln1")
        q = split_heads(g.matmul(h, params[p + "wq"]))
        k = split_heads(g.matmul(h, params[p + "wk"]))
        v = split_heads(g.matmul(h, params[p + "wv"]))
        scores = g.scale(g.matmul(q, g.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
        attn = g.softmax(g.add(scores, mask))
        heads = g.matmul(attn, v)
        merged = g.reshape(g.transpose(heads, (0, 2, 1, 3)), (B, L, d))
        x = g.add(x, g.matmul(merged, params[p + "wo"]))

        h = norm(x, p + "ln2")
        hidden = act(g.add(g.matmul(h, params[p + "mlp_w1"]), params[p + "mlp_b1"]))
        x = g.add(x, g.add(g.matmul(hidden, params[p + "mlp_w2"]), params[p + "mlp_b2"]))

    h = norm(x, "lnf")
    logits = g.add(g.matmul(h, params["w_out"]), params["b_out"])
    return params, g.softmax(logits)
