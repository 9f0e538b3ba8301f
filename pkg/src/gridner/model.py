"""Word-pair grid scorer in plain numpy with hand-written gradients.

Pipeline for one sentence of n tokens (two special positions are prepended,
so every grid below is N x N with N = n + 2)::

    ids -> embedding (N, d) -> BiLSTM (N, 2h)
        -> biaffine grid  H_bi (N, N, d_bi) -> linear      -> Y_bi
        -> pair MLP grid -> conv -> H_co (N, N, d_co) -> MLP -> Y_co
    Y = Y_bi + Y_co

Everything is float64; backward() returns exact gradients for every array
in the parameter dict and accepts cotangents on Y and on H_bi.
"""
from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

CHECKPOINT_VERSION = 1
POS = 0
NEG = 1
N_SPECIAL = 2


class VocabularyError(KeyError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    c: int
    d_embed: int = 64
    d_context: int = 64
    d_bi: int = 128
    d_co: int = 64
    conv_kernel: int = 3
    seed: int = 0

    def __post_init__(self):
        for name in ("vocab_size", "c", "d_embed", "d_context", "d_bi", "d_co", "conv_kernel"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.conv_kernel % 2 == 0:
            raise ValueError("conv_kernel must be odd")
        if self.c < 3:
            raise ValueError("c counts NONE, NNW and at least one THW class")

    @property
    def pos_id(self) -> int:
        return self.vocab_size

    @property
    def neg_id(self) -> int:
        return self.vocab_size + 1


class Vocab:
    """Token -> id map; id 0 is reserved for unknown tokens."""

    UNK = "<unk>"

    def __init__(self, tokens: Sequence[str] = ()):
        self.itos = [self.UNK]
        self.stoi = {self.UNK: 0}
        for t in tokens:
            self.add(t)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self) -> int:
        return len(self.itos)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, 0) for t in tokens]

    @classmethod
    def build(cls, sentences) -> "Vocab":
        v = cls()
        for s in sentences:
            for t in s.tokens:
                v.add(t)
        return v


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Declared parameter order; checkpoints store arrays in this order."""
    d, h, D = cfg.d_embed, cfg.d_context, 2 * cfg.d_context
    k = cfg.conv_kernel
    shapes = {"embed": (cfg.vocab_size + N_SPECIAL, d)}
    for side in ("fw", "bw"):
        shapes[f"lstm_{side}_Wx"] = (d, 4 * h)
        shapes[f"lstm_{side}_Wh"] = (h, 4 * h)
        shapes[f"lstm_{side}_b"] = (4 * h,)
    shapes.update({
        "bi_U": (D, cfg.d_bi, D),
        "bi_Wl": (D, cfg.d_bi),
        "bi_Wr": (D, cfg.d_bi),
        "bi_b": (cfg.d_bi,),
        "pair_Wl": (D, cfg.d_co),
        "pair_Wr": (D, cfg.d_co),
        "pair_b": (cfg.d_co,),
        "conv_K": (k, k, cfg.d_co, cfg.d_co),
        "conv_b": (cfg.d_co,),
        "out_bi_W": (cfg.d_bi, cfg.c),
        "out_bi_b": (cfg.c,),
        "out_co_W1": (cfg.d_co, cfg.d_co),
        "out_co_b1": (cfg.d_co,),
        "out_co_W2": (cfg.d_co, cfg.c),
        "out_co_b2": (cfg.c,),
    })
    return shapes


def _fan_in(name: str, shape: tuple[int, ...]) -> int:
    if name == "bi_U":
        return shape[0] * shape[2]
    if name == "conv_K":
        return shape[0] * shape[1] * shape[2]
    if name == "embed":
        return shape[1]
    return shape[0]


def init_params(cfg: ModelConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(_fan_in(name, shape))
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


# --------------------------------------------------------------------------
# activations

_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x):
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x**3)))


def gelu_grad(x):
    t = np.tanh(_GELU_C * (x + 0.044715 * x**3))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


# --------------------------------------------------------------------------
# LSTM


def _lstm_forward(X, Wx, Wh, b):
    N, h = X.shape[0], Wh.shape[0]
    Hs = np.zeros((N, h))
    Cs = np.zeros((N, h))
    gates = np.zeros((N, 4 * h))
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    xz = X @ Wx + b
    for t in range(N):
        z = xz[t] + h_prev @ Wh
        i, f, o = sigmoid(z[:h]), sigmoid(z[h:2 * h]), sigmoid(z[3 * h:])
        g = np.tanh(z[2 * h:3 * h])
        c_prev = f * c_prev + i * g
        h_prev = o * np.tanh(c_prev)
        gates[t] = np.concatenate([i, f, g, o])
        Hs[t], Cs[t] = h_prev, c_prev
    return Hs, (X, Hs, Cs, gates)


def _lstm_backward(dHs, cache, Wx, Wh):
    X, Hs, Cs, gates = cache
    N, h = Hs.shape
    dz_all = np.zeros((N, 4 * h))
    dh_next = np.zeros(h)
    dc_next = np.zeros(h)
    for t in range(N - 1, -1, -1):
        i, f, g, o = gates[t, :h], gates[t, h:2 * h], gates[t, 2 * h:3 * h], gates[t, 3 * h:]
        c = Cs[t]
        c_prev = Cs[t - 1] if t else np.zeros(h)
        tc = np.tanh(c)
        dh = dHs[t] + dh_next
        dc = dc_next + dh * o * (1 - tc * tc)
        dz = np.concatenate([
            dc * g * i * (1 - i),
            dc * c_prev * f * (1 - f),
            dc * i * (1 - g * g),
            dh * tc * o * (1 - o),
        ])
        dz_all[t] = dz
        dh_next = dz @ Wh.T
        dc_next = dc * f
    h_prevs = np.vstack([np.zeros((1, h)), Hs[:-1]])
    dWx = X.T @ dz_all
    dWh = h_prevs.T @ dz_all
    db = dz_all.sum(axis=0)
    dX = dz_all @ Wx.T
    return dX, dWx, dWh, db


# --------------------------------------------------------------------------
# forward / backward


@dataclass
class ForwardTrace:
    ids: np.ndarray
    H_em: np.ndarray
    H_ctx: np.ndarray
    H_bi: np.ndarray
    H_co: np.ndarray
    Y_bi: np.ndarray
    Y_co: np.ndarray
    Y: np.ndarray
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.H_em.shape[0] - N_SPECIAL


def augment_ids(cfg: ModelConfig, token_ids: Sequence[int]) -> np.ndarray:
    ids = np.asarray(list(token_ids), dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        bad = ids[(ids < 0) | (ids >= cfg.vocab_size)]
        raise VocabularyError(f"token ids {bad.tolist()} outside vocabulary of size {cfg.vocab_size}")
    return np.concatenate([[cfg.pos_id, cfg.neg_id], ids])


def _shift(G, u, v, N):
    return G[u:u + N, v:v + N]


def forward(params: dict, cfg: ModelConfig, token_ids: Sequence[int]) -> ForwardTrace:
    ids = augment_ids(cfg, token_ids)
    N = ids.size
    H_em = params["embed"][ids]

    hf, cache_f = _lstm_forward(H_em, params["lstm_fw_Wx"], params["lstm_fw_Wh"], params["lstm_fw_b"])
    hb_rev, cache_b = _lstm_forward(H_em[::-1], params["lstm_bw_Wx"], params["lstm_bw_Wh"], params["lstm_bw_b"])
    X = np.concatenate([hf, hb_rev[::-1]], axis=1)

    # biaffine: x_i^T U x_j + Wl x_i + Wr x_j + b
    U = params["bi_U"]
    T = np.tensordot(X, U, axes=(1, 0))                       # (N, d_bi, D)
    H_bi = (T @ X.T).transpose(0, 2, 1)
    H_bi = H_bi + (X @ params["bi_Wl"])[:, None, :] + (X @ params["bi_Wr"])[None, :, :] + params["bi_b"]

    # pair MLP then same-padded convolution
    Z0 = (X @ params["pair_Wl"])[:, None, :] + (X @ params["pair_Wr"])[None, :, :] + params["pair_b"]
    G = gelu(Z0)
    K = params["conv_K"]
    k = K.shape[0]
    r = k // 2
    Gp = np.pad(G, ((r, r), (r, r), (0, 0)))
    Z1 = np.broadcast_to(params["conv_b"], G.shape).copy()
    for u in range(k):
        for v in range(k):
            Z1 += _shift(Gp, u, v, N) @ K[u, v]
    H_co = gelu(Z1)

    Y_bi = H_bi @ params["out_bi_W"] + params["out_bi_b"]
    A1 = H_co @ params["out_co_W1"] + params["out_co_b1"]
    M = gelu(A1)
    Y_co = M @ params["out_co_W2"] + params["out_co_b2"]
    Y = Y_bi + Y_co

    cache = dict(cache_f=cache_f, cache_b=cache_b, X=X, T=T, Z0=Z0, Gp=Gp, Z1=Z1, A1=A1, M=M)
    return ForwardTrace(ids, H_em, X, H_bi, H_co, Y_bi, Y_co, Y, cache)


def backward(params: dict, trace: ForwardTrace, dY: np.ndarray | None = None,
             dH_bi: np.ndarray | None = None) -> dict[str, np.ndarray]:
    if not trace.cache:
        raise ValueError("trace carries no forward cache")
    ch = trace.cache
    X, N = ch["X"], trace.ids.size
    g: dict[str, np.ndarray] = {}
    if dY is None:
        dY = np.zeros_like(trace.Y)
    dHbi = np.zeros_like(trace.H_bi) if dH_bi is None else np.array(dH_bi, dtype=float)

    # co-predictor heads; dY feeds both branches unchanged
    g["out_bi_W"] = np.tensordot(trace.H_bi, dY, axes=([0, 1], [0, 1]))
    g["out_bi_b"] = dY.sum(axis=(0, 1))
    dHbi = dHbi + dY @ params["out_bi_W"].T

    g["out_co_W2"] = np.tensordot(ch["M"], dY, axes=([0, 1], [0, 1]))
    g["out_co_b2"] = g["out_bi_b"].copy()
    dA1 = (dY @ params["out_co_W2"].T) * gelu_grad(ch["A1"])
    g["out_co_W1"] = np.tensordot(trace.H_co, dA1, axes=([0, 1], [0, 1]))
    g["out_co_b1"] = dA1.sum(axis=(0, 1))
    dZ1 = (dA1 @ params["out_co_W1"].T) * gelu_grad(ch["Z1"])

    # convolution
    K = params["conv_K"]
    k = K.shape[0]
    r = k // 2
    Gp = ch["Gp"]
    dK = np.zeros_like(K)
    dGp = np.zeros_like(Gp)
    for u in range(k):
        for v in range(k):
            dK[u, v] = np.tensordot(_shift(Gp, u, v, N), dZ1, axes=([0, 1], [0, 1]))
            dGp[u:u + N, v:v + N] += dZ1 @ K[u, v].T
    g["conv_K"] = dK
    g["conv_b"] = dZ1.sum(axis=(0, 1))
    dZ0 = dGp[r:r + N, r:r + N] * gelu_grad(ch["Z0"])
    g["pair_b"] = dZ0.sum(axis=(0, 1))
    row, col = dZ0.sum(axis=1), dZ0.sum(axis=0)
    g["pair_Wl"] = X.T @ row
    g["pair_Wr"] = X.T @ col
    dX = row @ params["pair_Wl"].T + col @ params["pair_Wr"].T

    # biaffine
    U = params["bi_U"]
    Dd = U.shape[0]
    A2 = dHbi.transpose(0, 2, 1) @ X                          # (N, d_bi, D)
    g["bi_U"] = np.tensordot(X, A2, axes=(0, 0))
    dX += A2.reshape(N, -1) @ U.reshape(Dd, -1).T
    dX += np.tensordot(dHbi, ch["T"], axes=([0, 2], [0, 1]))
    row, col = dHbi.sum(axis=1), dHbi.sum(axis=0)
    g["bi_Wl"] = X.T @ row
    g["bi_Wr"] = X.T @ col
    g["bi_b"] = dHbi.sum(axis=(0, 1))
    dX += row @ params["bi_Wl"].T + col @ params["bi_Wr"].T

    # BiLSTM
    h = params["lstm_fw_Wh"].shape[0]
    dEf, g["lstm_fw_Wx"], g["lstm_fw_Wh"], g["lstm_fw_b"] = _lstm_backward(
        dX[:, :h], ch["cache_f"], params["lstm_fw_Wx"], params["lstm_fw_Wh"])
    dEb, g["lstm_bw_Wx"], g["lstm_bw_Wh"], g["lstm_bw_b"] = _lstm_backward(
        dX[::-1, h:], ch["cache_b"], params["lstm_bw_Wx"], params["lstm_bw_Wh"])
    dE = dEf + dEb[::-1]
    dembed = np.zeros_like(params["embed"])
    np.add.at(dembed, trace.ids, dE)
    g["embed"] = dembed
    return {name: g[name] for name in params}


# --------------------------------------------------------------------------
# task loss


def task_loss(trace: ForwardTrace, gold_ids: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the n x n real-token cells.

    Returns the loss and its cotangent on the full augmented Y; special
    rows/columns receive zero gradient.
    """
    gold_ids = np.asarray(gold_ids)
    n = trace.n
    if gold_ids.shape != (n, n):
        raise ValueError(f"gold grid shape {gold_ids.shape} != ({n}, {n})")
    logits = trace.Y[N_SPECIAL:, N_SPECIAL:]
    logp = log_softmax(logits)
    picked = np.take_along_axis(logp, gold_ids[..., None], axis=-1)[..., 0]
    loss = -picked.mean()
    dlog = np.exp(logp)
    np.put_along_axis(dlog, gold_ids[..., None], np.take_along_axis(dlog, gold_ids[..., None], -1) - 1.0, -1)
    dY = np.zeros_like(trace.Y)
    dY[N_SPECIAL:, N_SPECIAL:] = dlog / (n * n)
    return float(loss), dY


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params: dict, cfg: ModelConfig, extra: dict | None = None) -> None:
    meta = {"version": CHECKPOINT_VERSION, "config": asdict(cfg),
            "order": list(param_shapes(cfg)), "extra": extra or {}}
    arrays = {f"p{i:02d}": params[name] for i, name in enumerate(meta["order"])}
    buf = io.BytesIO()
    np.savez(buf, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[dict, ModelConfig, dict]:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(bytes(z["__meta__"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {meta.get('version')}")
        cfg = ModelConfig(**meta["config"])
        shapes = param_shapes(cfg)
        if list(shapes) != meta["order"]:
            raise CheckpointError("parameter order in checkpoint does not match the model")
        params = {}
        for i, name in enumerate(meta["order"]):
            arr = z[f"p{i:02d}"]
            if arr.shape != shapes[name]:
                raise CheckpointError(f"{name}: shape {arr.shape} != expected {shapes[name]}")
            params[name] = arr.astype(np.float64)
    return params, cfg, meta.get("extra", {})
