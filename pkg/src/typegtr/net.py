"""From-scratch encoder-decoder sequence network in numpy.

Pre-norm transformer blocks: the encoder reads a token sequence
bidirectionally; the decoder attends causally over its own prefix and
over the encoder states, and a linear head maps decoder states to a
vocabulary distribution.  Forward passes are deterministic functions of
(parameters, inputs).  Backward passes are hand-derived and verified
against central finite differences in the test suite.

Parameters live in a flat ``name -> ndarray`` dict in a fixed declared
order (see :func:`param_layout`), which is also the checkpoint tensor
order.  All in-memory math is float64; checkpoints store float32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_LN_EPS = 1e-5


class SequenceTooLong(ValueError):
    """Input exceeds the model's maximum sequence length."""


class EmptyNegatives(ValueError):
    """Contrastive loss needs at least one negative similarity."""


@dataclass(frozen=True)
class ModelDims:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    max_seq_len: int = 256

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.n_layers < 1:
            raise ValueError("need at least one encoder/decoder layer")


@dataclass
class SeqModel:
    """Vocabulary, dimension header, and all learnable tensors."""

    vocab: object
    dims: ModelDims
    tensors: dict
    seed: int
    _pos: np.ndarray | None = field(default=None, repr=False)

    @property
    def pos_table(self) -> np.ndarray:
        if self._pos is None:
            self._pos = sinusoid_table(self.dims.max_seq_len, self.dims.d_model)
        return self._pos

    def copy(self) -> "SeqModel":
        return SeqModel(
            self.vocab,
            self.dims,
            {k: v.copy() for k, v in self.tensors.items()},
            self.seed,
        )


def sinusoid_table(max_len: int, d_model: int) -> np.ndarray:
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    idx = np.arange(d_model, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * (idx // 2)) / d_model)
    table = np.empty((max_len, d_model), dtype=np.float64)
    table[:, 0::2] = np.sin(angle[:, 0::2])
    table[:, 1::2] = np.cos(angle[:, 1::2])
    return table


def _attention_names(prefix: str):
    return [f"{prefix}.{n}" for n in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")]


def param_layout(vocab_size: int, dims: ModelDims) -> list[tuple[str, tuple[int, ...]]]:
    """Declared (name, shape) order of every learnable tensor."""
    d, f = dims.d_model, dims.d_ff
    layout: list[tuple[str, tuple[int, ...]]] = [("embed", (vocab_size, d))]

    def ln(prefix):
        layout.append((f"{prefix}.g", (d,)))
        layout.append((f"{prefix}.b", (d,)))

    def attn(prefix):
        for name in _attention_names(prefix):
            layout.append((name, (d, d) if ".w" in name else (d,)))

    def ffn(prefix):
        layout.append((f"{prefix}.w1", (d, f)))
        layout.append((f"{prefix}.b1", (f,)))
        layout.append((f"{prefix}.w2", (f, d)))
        layout.append((f"{prefix}.b2", (d,)))

    for l in range(dims.n_layers):
        ln(f"enc{l}.ln1")
        attn(f"enc{l}.attn")
        ln(f"enc{l}.ln2")
        ffn(f"enc{l}.ffn")
    ln("enc_final")
    for l in range(dims.n_layers):
        ln(f"dec{l}.ln1")
        attn(f"dec{l}.self")
        ln(f"dec{l}.ln2")
        attn(f"dec{l}.cross")
        ln(f"dec{l}.ln3")
        ffn(f"dec{l}.ffn")
    ln("dec_final")
    layout.append(("head.w", (d, vocab_size)))
    layout.append(("head.b", (vocab_size,)))
    return layout


def init_params(vocab, dims: ModelDims, seed: int) -> SeqModel:
    """Seeded initialization: uniform scaled by fan-in for matrices and
    embeddings, ones for norm gains, zeros for biases."""
    rng = np.random.Generator(np.random.PCG64(seed))
    tensors = {}
    for name, shape in param_layout(len(vocab), dims):
        if len(shape) == 2:
            fan_in = dims.d_model if name == "embed" else shape[0]
            scale = 1.0 / math.sqrt(fan_in)
            tensors[name] = rng.uniform(-scale, scale, size=shape)
        elif name.endswith(".g"):
            tensors[name] = np.ones(shape)
        else:
            tensors[name] = np.zeros(shape)
    return SeqModel(vocab, dims, tensors, seed)


def zero_grads(model: SeqModel) -> dict:
    return {k: np.zeros_like(v) for k, v in model.tensors.items()}


def accumulate(into: dict, grads: dict) -> None:
    for k, v in grads.items():
        into[k] += v


# ---------------------------------------------------------------------------
# Primitive layers (forward + backward)
# ---------------------------------------------------------------------------


def layer_norm_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def layer_norm_bwd(dy, cache):
    xhat, inv, g = cache
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    return dx, dg, db


def gelu_fwd(x):
    # Exact (erf-based) GELU; smooth everywhere, which keeps finite
    # difference checks well conditioned.
    return 0.5 * x * (1.0 + erf(x / _SQRT2)), x


def gelu_bwd(dy, x):
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return dy * (cdf + x * pdf)


def softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z, axis=-1):
    m = z.max(axis=axis, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=axis, keepdims=True))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors; invariant to positive scaling."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    return float(a @ b / (na * nb))


def _cosine_grads(a, b):
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    dot = a @ b
    da = b / (na * nb) - (dot / (na ** 3 * nb)) * a
    db = a / (na * nb) - (dot / (na * nb ** 3)) * b
    return da, db


def _split_heads(x, n_heads):
    t, d = x.shape
    return x.reshape(t, n_heads, d // n_heads).transpose(1, 0, 2)


def _merge_heads(x):
    h, t, dh = x.shape
    return x.transpose(1, 0, 2).reshape(t, h * dh)


def attention_fwd(p, prefix, q_in, kv_in, n_heads, causal):
    """Multi-head attention; ``q_in`` may differ from ``kv_in`` (cross)."""
    wq, bq, wk, bk, wv, bv, wo, bo = (p[n] for n in _attention_names(prefix))
    q = _split_heads(q_in @ wq + bq, n_heads)
    k = _split_heads(kv_in @ wk + bk, n_heads)
    v = _split_heads(kv_in @ wv + bv, n_heads)
    dh = q.shape[-1]
    scores = q @ k.transpose(0, 2, 1) / math.sqrt(dh)
    if causal:
        tq = q_in.shape[0]
        mask = np.triu(np.full((tq, tq), -np.inf), k=1)
        scores = scores + mask
    probs = softmax(scores, axis=-1)
    ctx = probs @ v
    merged = _merge_heads(ctx)
    out = merged @ wo + bo
    cache = (q_in, kv_in, q, k, v, probs, merged, prefix, n_heads)
    return out, cache


def attention_bwd(dout, p, cache):
    q_in, kv_in, q, k, v, probs, merged, prefix, n_heads = cache
    names = _attention_names(prefix)
    wq, _, wk, _, wv, _, wo, _ = (p[n] for n in names)
    dh = q.shape[-1]

    grads = {}
    grads[names[6]] = merged.T @ dout            # wo
    grads[names[7]] = dout.sum(axis=0)           # bo
    dmerged = dout @ wo.T
    dctx = _split_heads(dmerged, n_heads)

    dprobs = dctx @ v.transpose(0, 2, 1)
    dv = probs.transpose(0, 2, 1) @ dctx
    dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
    dscores /= math.sqrt(dh)
    dq = dscores @ k
    dk = dscores.transpose(0, 2, 1) @ q

    dq_flat = _merge_heads(dq)
    dk_flat = _merge_heads(dk)
    dv_flat = _merge_heads(dv)

    grads[names[0]] = q_in.T @ dq_flat           # wq
    grads[names[1]] = dq_flat.sum(axis=0)        # bq
    grads[names[2]] = kv_in.T @ dk_flat          # wk
    grads[names[3]] = dk_flat.sum(axis=0)        # bk
    grads[names[4]] = kv_in.T @ dv_flat          # wv
    grads[names[5]] = dv_flat.sum(axis=0)        # bv

    dq_in = dq_flat @ wq.T
    dkv_in = dk_flat @ wk.T + dv_flat @ wv.T
    return dq_in, dkv_in, grads


def ffn_fwd(p, prefix, x):
    w1, b1, w2, b2 = (p[f"{prefix}.{n}"] for n in ("w1", "b1", "w2", "b2"))
    h = x @ w1 + b1
    hg, gc = gelu_fwd(h)
    out = hg @ w2 + b2
    return out, (x, hg, gc, prefix)


def ffn_bwd(dout, p, cache):
    x, hg, gc, prefix = cache
    w1, _, w2, _ = (p[f"{prefix}.{n}"] for n in ("w1", "b1", "w2", "b2"))
    grads = {
        f"{prefix}.w2": hg.T @ dout,
        f"{prefix}.b2": dout.sum(axis=0),
    }
    dhg = dout @ w2.T
    dh = gelu_bwd(dhg, gc)
    grads[f"{prefix}.w1"] = x.T @ dh
    grads[f"{prefix}.b1"] = dh.sum(axis=0)
    dx = dh @ w1.T
    return dx, grads


# ---------------------------------------------------------------------------
# Embedding, encoder and decoder stacks
# ---------------------------------------------------------------------------


def _embed_fwd(model: SeqModel, ids: np.ndarray):
    dims = model.dims
    if len(ids) > dims.max_seq_len:
        raise SequenceTooLong(f"{len(ids)} tokens exceeds max_seq_len {dims.max_seq_len}")
    scale = math.sqrt(dims.d_model)
    x = model.tensors["embed"][ids] * scale + model.pos_table[: len(ids)]
    return x, (ids, scale)


def _embed_bwd(dx, cache, grads):
    ids, scale = cache
    np.add.at(grads["embed"], ids, dx * scale)


def _block_ln_attn(p, ln_prefix, attn_prefix, n_heads, x, kv, causal):
    a, ln_cache = layer_norm_fwd(x, p[f"{ln_prefix}.g"], p[f"{ln_prefix}.b"])
    kv_in = a if kv is None else kv
    out, attn_cache = attention_fwd(p, attn_prefix, a, kv_in, n_heads, causal)
    return x + out, (ln_prefix, ln_cache, attn_cache, kv is None)


def _block_ln_attn_bwd(dy, p, cache):
    """Returns (dx, dkv_external, grads); dkv_external is None for self-attn."""
    ln_prefix, ln_cache, attn_cache, self_attn = cache
    dq_in, dkv_in, grads = attention_bwd(dy, p, attn_cache)
    if self_attn:
        da = dq_in + dkv_in
        dkv_ext = None
    else:
        da = dq_in
        dkv_ext = dkv_in
    dx_ln, dg, db = layer_norm_bwd(da, ln_cache)
    grads[f"{ln_prefix}.g"] = dg
    grads[f"{ln_prefix}.b"] = db
    return dy + dx_ln, dkv_ext, grads


def _block_ln_ffn(p, ln_prefix, ffn_prefix, x):
    a, ln_cache = layer_norm_fwd(x, p[f"{ln_prefix}.g"], p[f"{ln_prefix}.b"])
    out, ffn_cache = ffn_fwd(p, ffn_prefix, a)
    return x + out, (ln_prefix, ln_cache, ffn_cache)


def _block_ln_ffn_bwd(dy, p, cache):
    ln_prefix, ln_cache, ffn_cache = cache
    da, grads = ffn_bwd(dy, p, ffn_cache)
    dx_ln, dg, db = layer_norm_bwd(da, ln_cache)
    grads[f"{ln_prefix}.g"] = dg
    grads[f"{ln_prefix}.b"] = db
    return dy + dx_ln, grads


def encoder_fwd(model: SeqModel, ids):
    """Hidden states for a full token sequence, one vector per token."""
    ids = np.asarray(ids, dtype=np.int64)
    p = model.tensors
    x, emb_cache = _embed_fwd(model, ids)
    layer_caches = []
    for l in range(model.dims.n_layers):
        x, c1 = _block_ln_attn(p, f"enc{l}.ln1", f"enc{l}.attn", model.dims.n_heads, x, None, False)
        x, c2 = _block_ln_ffn(p, f"enc{l}.ln2", f"enc{l}.ffn", x)
        layer_caches.append((c1, c2))
    h, final_cache = layer_norm_fwd(x, p["enc_final.g"], p["enc_final.b"])
    return h, (emb_cache, layer_caches, final_cache)


def encoder_bwd(model: SeqModel, cache, dh, grads):
    p = model.tensors
    emb_cache, layer_caches, final_cache = cache
    dx, dg, db = layer_norm_bwd(dh, final_cache)
    grads["enc_final.g"] += dg
    grads["enc_final.b"] += db
    for c1, c2 in reversed(layer_caches):
        dx, g2 = _block_ln_ffn_bwd(dx, p, c2)
        accumulate(grads, g2)
        dx, _, g1 = _block_ln_attn_bwd(dx, p, c1)
        accumulate(grads, g1)
    _embed_bwd(dx, emb_cache, grads)


def decoder_fwd(model: SeqModel, h_x, y_in):
    """Decoder hidden states for input prefix ``y_in`` given encoder states."""
    y_in = np.asarray(y_in, dtype=np.int64)
    p = model.tensors
    y, emb_cache = _embed_fwd(model, y_in)
    layer_caches = []
    for l in range(model.dims.n_layers):
        y, c1 = _block_ln_attn(p, f"dec{l}.ln1", f"dec{l}.self", model.dims.n_heads, y, None, True)
        y, c2 = _block_ln_attn(p, f"dec{l}.ln2", f"dec{l}.cross", model.dims.n_heads, y, h_x, False)
        y, c3 = _block_ln_ffn(p, f"dec{l}.ln3", f"dec{l}.ffn", y)
        layer_caches.append((c1, c2, c3))
    h, final_cache = layer_norm_fwd(y, p["dec_final.g"], p["dec_final.b"])
    return h, (emb_cache, layer_caches, final_cache)


def decoder_bwd(model: SeqModel, cache, dh, grads):
    """Backward through the decoder; returns the gradient on ``h_x``."""
    p = model.tensors
    emb_cache, layer_caches, final_cache = cache
    dy, dg, db = layer_norm_bwd(dh, final_cache)
    grads["dec_final.g"] += dg
    grads["dec_final.b"] += db
    dh_x = None
    for c1, c2, c3 in reversed(layer_caches):
        dy, g3 = _block_ln_ffn_bwd(dy, p, c3)
        accumulate(grads, g3)
        dy, dkv, g2 = _block_ln_attn_bwd(dy, p, c2)
        accumulate(grads, g2)
        dh_x = dkv if dh_x is None else dh_x + dkv
        dy, _, g1 = _block_ln_attn_bwd(dy, p, c1)
        accumulate(grads, g1)
    _embed_bwd(dy, emb_cache, grads)
    return dh_x


def head_fwd(model: SeqModel, h):
    return h @ model.tensors["head.w"] + model.tensors["head.b"]


def head_bwd(model: SeqModel, h, dlogits, grads):
    grads["head.w"] += h.T @ dlogits
    grads["head.b"] += dlogits.sum(axis=0)
    return dlogits @ model.tensors["head.w"].T


# ---------------------------------------------------------------------------
# Forward-only entry points
# ---------------------------------------------------------------------------


def encode(model: SeqModel, ids) -> np.ndarray:
    h, _ = encoder_fwd(model, ids)
    return h


def decode_step(model: SeqModel, h_x, y_prefix) -> np.ndarray:
    """Distribution over the next token after the given decoder prefix."""
    y_prefix = np.asarray(y_prefix, dtype=np.int64)
    if y_prefix[0] != model.vocab.bos_id:
        raise ValueError("decoder prefix must begin with BOS")
    h, _ = decoder_fwd(model, h_x, y_prefix)
    return softmax(head_fwd(model, h[-1:]))[0]


def sequence_log_probs(model: SeqModel, h_x, y_ids) -> np.ndarray:
    """Teacher-forced per-step log probabilities of ``y_ids[1:]``.

    ``y_ids`` is a full BOS...EOS framed sequence; step ``t`` scores
    token ``y_ids[t+1]`` given the prefix ``y_ids[:t+1]``.
    """
    y_ids = np.asarray(y_ids, dtype=np.int64)
    h, _ = decoder_fwd(model, h_x, y_ids[:-1])
    logp = log_softmax(head_fwd(model, h))
    return logp[np.arange(len(y_ids) - 1), y_ids[1:]]


def mean_hidden(h: np.ndarray) -> np.ndarray:
    return h.mean(axis=0)


# ---------------------------------------------------------------------------
# Losses with gradients
# ---------------------------------------------------------------------------


def generation_loss_and_grads(model: SeqModel, x_ids, y_ids, grads=None):
    """Teacher-forced next-token cross entropy, summed over steps.

    Returns (loss, grads); when a ``grads`` dict is passed, gradients are
    accumulated into it (for mini-batch sums).
    """
    y_ids = np.asarray(y_ids, dtype=np.int64)
    if grads is None:
        grads = zero_grads(model)
    h_x, enc_cache = encoder_fwd(model, x_ids)
    h_y, dec_cache = decoder_fwd(model, h_x, y_ids[:-1])
    logits = head_fwd(model, h_y)
    logp = log_softmax(logits)
    steps = np.arange(len(y_ids) - 1)
    targets = y_ids[1:]
    loss = float(-logp[steps, targets].sum())

    dlogits = softmax(logits)
    dlogits[steps, targets] -= 1.0
    dh_y = head_bwd(model, h_y, dlogits, grads)
    dh_x = decoder_bwd(model, dec_cache, dh_y, grads)
    encoder_bwd(model, enc_cache, dh_x, grads)
    return loss, grads


def infonce_loss(sim_pos: float, sim_negs) -> float:
    """Contrastive loss: -log(e^pos / (e^pos + sum(e^neg))), stably."""
    sim_negs = list(sim_negs)
    if not sim_negs:
        raise EmptyNegatives("at least one negative similarity is required")
    logits = np.array([sim_pos] + sim_negs, dtype=np.float64)
    m = logits.max()
    lse = m + math.log(np.exp(logits - m).sum())
    return float(lse - sim_pos)


def similarity_from_states(h_x, h_y) -> float:
    """Cosine of averaged encoder states and averaged decoder states."""
    return cosine(mean_hidden(h_x), mean_hidden(h_y))


def contrastive_loss_and_grads(model: SeqModel, x_ids, pos_ids, neg_ids_list, grads=None):
    """InfoNCE over similarity scores of one anchor vs positive+negatives.

    The anchor representation is shared: encoder gradients accumulate the
    direct cosine term plus every candidate's cross-attention term.
    Returns (loss, grads, sims) with sims ordered positive first.
    """
    if not neg_ids_list:
        raise EmptyNegatives("contrastive instance carries no negatives")
    if grads is None:
        grads = zero_grads(model)

    h_x, enc_cache = encoder_fwd(model, x_ids)
    a = mean_hidden(h_x)

    cand_states = []
    sims = []
    for ids in [pos_ids] + list(neg_ids_list):
        ids = np.asarray(ids, dtype=np.int64)
        h_y, dec_cache = decoder_fwd(model, h_x, ids[:-1])
        b = mean_hidden(h_y)
        cand_states.append((h_y, dec_cache, b))
        sims.append(cosine(a, b))

    logits = np.array(sims, dtype=np.float64)
    m = logits.max()
    lse = m + math.log(np.exp(logits - m).sum())
    loss = float(lse - logits[0])

    dsims = softmax(logits)
    dsims[0] -= 1.0

    da_total = np.zeros_like(a)
    dh_x_total = np.zeros_like(h_x)
    for dsim, (h_y, dec_cache, b) in zip(dsims, cand_states):
        da, db = _cosine_grads(a, b)
        da_total += dsim * da
        dh_y = np.broadcast_to((dsim * db) / h_y.shape[0], h_y.shape)
        dh_x_total += decoder_bwd(model, dec_cache, dh_y, grads)

    dh_x_total += da_total / h_x.shape[0]
    encoder_bwd(model, enc_cache, dh_x_total, grads)
    return loss, grads, sims
