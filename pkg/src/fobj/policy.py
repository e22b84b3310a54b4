"""Seed and merge policy networks.

Both are small pre-LN single-head self-attention stacks over superpoint
feature tokens, with a learnable value token prepended for the state-value
estimate. The seed policy softmaxes one logit per superpoint; the merge
policy conditions on the current region (region feature added to every
neighbor row and appended as an extra attended token) and emits independent
sigmoid merge probabilities.

Tokens are canonicalized by lexicographic row sort before attention and the
outputs are mapped back, so every token-axis reduction runs in one fixed
order: permuting the input rows permutes the outputs bitwise-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .tensorkit import Tensor, concat, layer_norm, log_clamped, param, softmax

HIDDEN_DIM = 128
SEED_BLOCKS = 1
MERGE_BLOCKS = 3
FFN_EXPANSION = 4

CKPT_MAGIC = b"FOBP"
CKPT_VERSION = 1


@dataclass
class PolicyParams:
    """Ordered name -> tensor bag for one policy network."""

    names: list
    params: dict
    in_dim: int
    hidden_dim: int
    n_blocks: int

    def tensors(self):
        return [self.params[n] for n in self.names]

    def __getitem__(self, name):
        return self.params[name]

    def astype(self, dtype):
        bag = {n: param(t.data.astype(dtype)) for n, t in self.params.items()}
        return PolicyParams(names=list(self.names), params=bag, in_dim=self.in_dim,
                            hidden_dim=self.hidden_dim, n_blocks=self.n_blocks)


def _init_policy(in_dim: int, n_blocks: int, rng: np.random.Generator,
                 hidden_dim: int, dtype) -> PolicyParams:
    names, bag = [], {}

    def add(name, arr):
        names.append(name)
        bag[name] = param(arr.astype(dtype))

    def lin(name, a, b):
        scale = np.sqrt(2.0 / (a + b))
        add(name + ".w", rng.standard_normal((a, b)) * scale)
        add(name + ".b", np.zeros(b))

    h = hidden_dim
    lin("embed", in_dim, h)
    add("value_token", rng.standard_normal((1, h)) * 0.02)
    for i in range(n_blocks):
        p = f"block{i}."
        add(p + "ln1.g", np.ones(h))
        add(p + "ln1.b", np.zeros(h))
        for nm in ("q", "k", "v", "o"):
            lin(p + nm, h, h)
        add(p + "ln2.g", np.ones(h))
        add(p + "ln2.b", np.zeros(h))
        lin(p + "ff1", h, FFN_EXPANSION * h)
        lin(p + "ff2", FFN_EXPANSION * h, h)
    lin("head1", h, h)
    lin("head2", h, 1)
    lin("vhead1", h, h)
    lin("vhead2", h, 1)
    return PolicyParams(names=names, params=bag, in_dim=in_dim,
                        hidden_dim=hidden_dim, n_blocks=n_blocks)


def init_seed_policy(in_dim: int, rng: np.random.Generator,
                     hidden_dim: int = HIDDEN_DIM, dtype=np.float32) -> PolicyParams:
    return _init_policy(in_dim, SEED_BLOCKS, rng, hidden_dim, dtype)


def init_merge_policy(in_dim: int, rng: np.random.Generator,
                      hidden_dim: int = HIDDEN_DIM, dtype=np.float32) -> PolicyParams:
    return _init_policy(in_dim, MERGE_BLOCKS, rng, hidden_dim, dtype)


def _attention_block(x: Tensor, pp: PolicyParams, i: int) -> Tensor:
    p = f"block{i}."
    h = layer_norm(x, pp[p + "ln1.g"], pp[p + "ln1.b"])
    q = h @ pp[p + "q.w"] + pp[p + "q.b"]
    k = h @ pp[p + "k.w"] + pp[p + "k.b"]
    v = h @ pp[p + "v.w"] + pp[p + "v.b"]
    scores = (q @ k.T) * (1.0 / np.sqrt(pp.hidden_dim))
    x = x + softmax(scores, axis=-1) @ v @ pp[p + "o.w"] + pp[p + "o.b"]
    h2 = layer_norm(x, pp[p + "ln2.g"], pp[p + "ln2.b"])
    return x + (h2 @ pp[p + "ff1.w"] + pp[p + "ff1.b"]).tanh() @ pp[p + "ff2.w"] + pp[p + "ff2.b"]


def _canonical_order(rows: np.ndarray):
    """Lexicographic row order and its inverse; ties keep input order."""
    order = np.lexsort(rows.T[::-1]) if len(rows) else np.arange(0)
    inv = np.argsort(order, kind="stable")
    return order, inv


def _run_stack(tokens: Tensor, pp: PolicyParams) -> Tensor:
    for i in range(pp.n_blocks):
        tokens = _attention_block(tokens, pp, i)
    return tokens


def _head(tokens: Tensor, pp: PolicyParams, prefix: str) -> Tensor:
    h = (tokens @ pp[prefix + "1.w"] + pp[prefix + "1.b"]).tanh()
    return h @ pp[prefix + "2.w"] + pp[prefix + "2.b"]


def seed_forward(features: np.ndarray, pp: PolicyParams):
    """(K, D) superpoint features -> (softmax probabilities Tensor (K,),
    state value Tensor scalar)."""
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[1] != pp.in_dim:
        raise ValueError(f"expected (K, {pp.in_dim}) features, got {features.shape}")
    dtype = pp["embed.w"].dtype
    order, inv = _canonical_order(features)
    x = Tensor(features[order].astype(dtype))
    emb = x @ pp["embed.w"] + pp["embed.b"]
    tokens = _run_stack(concat([pp["value_token"], emb], axis=0), pp)
    logits = _head(tokens[1:], pp, "head").reshape(-1)
    probs = softmax(logits, axis=0)[inv]
    value = _head(tokens[0:1], pp, "vhead").reshape(())
    return probs, value


def merge_forward(region: np.ndarray, neighbors: np.ndarray, pp: PolicyParams):
    """Region feature (D,) + neighbor features (Q, D) -> (sigmoid merge
    probabilities Tensor (Q,), state value Tensor scalar). Q may be 0."""
    region = np.asarray(region).reshape(-1)
    neighbors = np.asarray(neighbors).reshape(-1, region.shape[0]) if np.size(neighbors) \
        else np.zeros((0, region.shape[0]))
    if region.shape[0] != pp.in_dim:
        raise ValueError(f"expected dim {pp.in_dim}, got {region.shape[0]}")
    dtype = pp["embed.w"].dtype
    fused = neighbors + region[None, :]
    order, inv = _canonical_order(fused)
    region_t = Tensor(region[None, :].astype(dtype)) @ pp["embed.w"] + pp["embed.b"]
    if len(fused):
        emb = Tensor(fused[order].astype(dtype)) @ pp["embed.w"] + pp["embed.b"]
        tokens = concat([pp["value_token"], region_t, emb], axis=0)
    else:
        tokens = concat([pp["value_token"], region_t], axis=0)
    tokens = _run_stack(tokens, pp)
    value = _head(tokens[0:1], pp, "vhead").reshape(())
    if len(fused):
        probs = _head(tokens[2:], pp, "head").reshape(-1).sigmoid()[inv]
    else:
        probs = Tensor(np.zeros(0, dtype=dtype))
    return probs, value


# ---- action sampling and log-probability recomputation ----

@dataclass
class ActionSample:
    indices: np.ndarray  # chosen index (seed: shape (1,)) or indices (merge)
    logp: float
    entropy: float
    value: float


def seed_distribution_stats(probs: Tensor, index: int):
    """Differentiable (log-prob of `index`, entropy) for a seed draw."""
    lp = log_clamped(probs)
    logp = lp[int(index)]
    entropy = -(probs * lp).sum()
    return logp, entropy


def merge_distribution_stats(probs: Tensor, chosen_mask: np.ndarray):
    """Differentiable (joint log-prob of the chosen subset, entropy) for
    independent per-neighbor draws."""
    dtype = probs.dtype
    if probs.shape[0] == 0:
        zero = Tensor(np.zeros((), dtype=dtype))
        return zero, zero
    m = Tensor(np.asarray(chosen_mask, dtype=dtype))
    lp = log_clamped(probs)
    lq = log_clamped(Tensor(np.ones(probs.shape[0], dtype=dtype)) - probs)
    logp = (m * lp + (1.0 - m) * lq).sum()
    entropy = -(probs * lp + (Tensor(np.ones(probs.shape[0], dtype=dtype)) - probs) * lq).sum()
    return logp, entropy


def sample_seed(probs: np.ndarray, value: float, rng: np.random.Generator) -> ActionSample:
    p = np.asarray(probs, dtype=np.float64)
    p = p / p.sum()
    i = int(rng.choice(len(p), p=p))
    lp = np.log(np.clip(p, 1e-12, 1.0))
    return ActionSample(indices=np.array([i]), logp=float(lp[i]),
                        entropy=float(-(p * lp).sum()), value=float(value))


def sample_merge(probs: np.ndarray, value: float, rng: np.random.Generator) -> ActionSample:
    p = np.asarray(probs, dtype=np.float64)
    if p.size == 0:
        return ActionSample(indices=np.zeros(0, dtype=np.int64), logp=0.0,
                            entropy=0.0, value=float(value))
    draws = rng.random(p.size)
    chosen = draws < p
    lp = np.log(np.clip(p, 1e-12, 1.0))
    lq = np.log(np.clip(1.0 - p, 1e-12, 1.0))
    logp = float(np.where(chosen, lp, lq).sum())
    entropy = float(-(p * lp + (1.0 - p) * lq).sum())
    return ActionSample(indices=np.nonzero(chosen)[0], logp=logp,
                        entropy=entropy, value=float(value))


# ---- checkpoint io ----

def save_policies(seed: PolicyParams, merge: PolicyParams, path: str) -> None:
    manifest = {}
    blobs = []
    for tag, pp in (("seed", seed), ("merge", merge)):
        manifest[tag] = {
            "in_dim": pp.in_dim, "hidden_dim": pp.hidden_dim,
            "n_blocks": pp.n_blocks,
            "layers": [[n, list(pp.params[n].data.shape)] for n in pp.names],
        }
        blobs.extend(pp.params[n].data.astype("<f4").tobytes() for n in pp.names)
    mbytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<II", CKPT_VERSION, len(mbytes)))
        f.write(mbytes)
        for b in blobs:
            f.write(b)


def load_policies(path: str):
    with open(path, "rb") as f:
        if f.read(4) != CKPT_MAGIC:
            raise ValueError("bad magic")
        version, mlen = struct.unpack("<II", f.read(8))
        if version != CKPT_VERSION:
            raise ValueError(f"unsupported version {version}")
        manifest = json.loads(f.read(mlen).decode("utf-8"))
        out = {}
        for tag in ("seed", "merge"):
            m = manifest[tag]
            names, bag = [], {}
            for name, shape in m["layers"]:
                count = int(np.prod(shape)) if shape else 1
                data = np.frombuffer(f.read(4 * count), dtype="<f4")
                names.append(name)
                bag[name] = param(data.reshape(shape).copy())
            out[tag] = PolicyParams(names=names, params=bag, in_dim=m["in_dim"],
                                    hidden_dim=m["hidden_dim"], n_blocks=m["n_blocks"])
    return out["seed"], out["merge"]
