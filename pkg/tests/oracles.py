"""Independent reference computations used to freeze expected values.

These deliberately avoid the code paths they check: enumeration instead
of beam pruning, stepwise prefix scoring instead of one teacher-forced
pass, and position-by-position loops instead of vectorized attention.
"""

from __future__ import annotations

import math

import numpy as np

from typegtr import net


def enumerate_sequences(model, x_ids, max_len):
    """Every decodable sequence (EOS-terminated within max_len steps, or
    truncated at max_len), scored stepwise, sorted like beam output."""
    vocab = model.vocab
    h_x = net.encode(model, x_ids)
    results = []

    def walk(ids, log_prob, depth):
        if ids[-1] == vocab.eos_id:
            results.append((log_prob, tuple(ids)))
            return
        if depth == max_len:
            results.append((log_prob, tuple(ids)))
            return
        probs = net.decode_step(model, h_x, np.array(ids))
        for token_id in range(len(vocab)):
            if token_id == vocab.bos_id:
                continue
            walk(ids + [token_id], log_prob + math.log(probs[token_id]), depth + 1)

    walk([vocab.bos_id], 0.0, 0)
    results.sort(key=lambda r: (-r[0], r[1]))
    return results


def stepwise_likelihood(model, x_ids, y_ids) -> float:
    """Likelihood via per-step prefix recomputation (matches Eq.-style
    definition directly; independent of the single-pass implementation)."""
    h_x = net.encode(model, x_ids)
    product = 1.0
    for t in range(1, len(y_ids)):
        probs = net.decode_step(model, h_x, np.array(y_ids[:t]))
        product *= float(probs[y_ids[t]])
    return product


def reference_encoder_forward(model, ids):
    """Loop-based re-implementation of the encoder forward pass."""
    p = model.tensors
    dims = model.dims
    d, h = dims.d_model, dims.n_heads
    dh = d // h
    T = len(ids)
    x = np.array(
        [p["embed"][tok] * math.sqrt(d) + model.pos_table[i] for i, tok in enumerate(ids)]
    )

    def ln(v, g, b):
        out = np.empty_like(v)
        for i in range(v.shape[0]):
            row = v[i]
            mu = row.mean()
            var = ((row - mu) ** 2).mean()
            out[i] = g * (row - mu) / math.sqrt(var + 1e-5) + b
        return out

    def gelu(z):
        from scipy.special import erf

        return 0.5 * z * (1.0 + erf(z / math.sqrt(2.0)))

    for l in range(dims.n_layers):
        pre = ln(x, p[f"enc{l}.ln1.g"], p[f"enc{l}.ln1.b"])
        q = pre @ p[f"enc{l}.attn.wq"] + p[f"enc{l}.attn.bq"]
        k = pre @ p[f"enc{l}.attn.wk"] + p[f"enc{l}.attn.bk"]
        v = pre @ p[f"enc{l}.attn.wv"] + p[f"enc{l}.attn.bv"]
        merged = np.zeros((T, d))
        for head in range(h):
            sl = slice(head * dh, (head + 1) * dh)
            for i in range(T):
                scores = np.array(
                    [q[i, sl] @ k[j, sl] / math.sqrt(dh) for j in range(T)]
                )
                weights = np.exp(scores - scores.max())
                weights /= weights.sum()
                merged[i, sl] = sum(weights[j] * v[j, sl] for j in range(T))
        x = x + merged @ p[f"enc{l}.attn.wo"] + p[f"enc{l}.attn.bo"]
        pre = ln(x, p[f"enc{l}.ln2.g"], p[f"enc{l}.ln2.b"])
        x = x + gelu(pre @ p[f"enc{l}.ffn.w1"] + p[f"enc{l}.ffn.b1"]) @ p[
            f"enc{l}.ffn.w2"
        ] + p[f"enc{l}.ffn.b2"]
    return ln(x, p["enc_final.g"], p["enc_final.b"])


def finite_difference_grads(loss_fn, tensors, names, eps=1e-6):
    """Central finite differences on every coordinate of the named tensors."""
    grads = {}
    for name in names:
        t = tensors[name]
        g = np.zeros_like(t)
        for i in range(t.size):
            orig = t.flat[i]
            t.flat[i] = orig + eps
            lp = loss_fn()
            t.flat[i] = orig - eps
            lm = loss_fn()
            t.flat[i] = orig
            g.flat[i] = (lp - lm) / (2 * eps)
        grads[name] = g
    return grads


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)
