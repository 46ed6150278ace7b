"""LSTM autoencoder implemented from scratch in numpy: cell forward, stacked
encoder/decoder forward, MSE loss, full backpropagation through time, Adam,
and a training loop with validation-based model selection.

Architecture (defaults): a dense layer N -> 64 with tanh, three encoder LSTM
layers of 64/32/16 units (the 16-unit hidden sequence is the latent embedding
Y), three decoder LSTM layers of 32/64/64 units, and a dense tanh head
64 -> N. Because the output head saturates at +-1, training data are rescaled
per session into [-0.9, 0.9] by an affine map that is inverted on output.

Gate packing order inside each parameter block is (input i, forget f, cell
candidate g, output o). Initial hidden and cell states are zero. Forget-gate
biases start at 1.0 for gradient flow; all other biases start at zero and
weights are seeded uniform(-1/sqrt(h), 1/sqrt(h)).

Everything here is deterministic given (data, config, seed): fixed session
order, no dropout, no stochastic batching. One optimizer step is taken per
session matrix (full-sequence BPTT, no truncation).
"""

from __future__ import annotations

import copy
import json
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit as sigmoid
from sklearn.base import BaseEstimator

from .core import DataMatrix, LatentEmbedding

DEFAULT_DENSE_UNITS = 64
DEFAULT_ENC_UNITS = (64, 32, 16)
DEFAULT_DEC_UNITS = (32, 64, 64)
DEFAULT_RESCALE = (-0.9, 0.9)


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, session: int):
        super().__init__(f"non-finite loss at epoch {epoch}, session index {session}")
        self.epoch = epoch
        self.session = session


@dataclass
class LstmLayerParams:
    """One LSTM layer: w_x (4h x d), w_h (4h x h), b (4h,)."""

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        h4, d = self.w_x.shape
        if h4 % 4 != 0:
            raise ValueError(f"w_x first dimension {h4} is not a multiple of 4")
        h = h4 // 4
        if self.w_h.shape != (h4, h):
            raise ValueError(f"w_h shape {self.w_h.shape} inconsistent with w_x {self.w_x.shape}")
        if self.b.shape != (h4,):
            raise ValueError(f"b shape {self.b.shape}, expected ({h4},)")

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_x.shape[1]


@dataclass
class DenseParams:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)


@dataclass
class LstmAeModel:
    """All weights of the encoder (dense + LSTM stack) and decoder."""

    enc_fc: DenseParams
    enc_lstm: list[LstmLayerParams]
    dec_lstm: list[LstmLayerParams]
    dec_fc: DenseParams
    rescale: tuple[float, float] = DEFAULT_RESCALE
    seed: int = 0

    @property
    def n_input(self) -> int:
        return self.enc_fc.w.shape[1]

    @property
    def n_latent(self) -> int:
        return self.enc_lstm[-1].hidden_size

    @property
    def dtype(self) -> np.dtype:
        return self.enc_fc.w.dtype

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter arrays keyed by a stable dotted path."""
        params: dict[str, np.ndarray] = {
            "enc_fc.w": self.enc_fc.w, "enc_fc.b": self.enc_fc.b,
        }
        for i, layer in enumerate(self.enc_lstm):
            params[f"enc_lstm.{i}.w_x"] = layer.w_x
            params[f"enc_lstm.{i}.w_h"] = layer.w_h
            params[f"enc_lstm.{i}.b"] = layer.b
        for i, layer in enumerate(self.dec_lstm):
            params[f"dec_lstm.{i}.w_x"] = layer.w_x
            params[f"dec_lstm.{i}.w_h"] = layer.w_h
            params[f"dec_lstm.{i}.b"] = layer.b
        params["dec_fc.w"] = self.dec_fc.w
        params["dec_fc.b"] = self.dec_fc.b
        return params

    def set_parameters(self, values: dict[str, np.ndarray]) -> None:
        live = self.parameters()
        if set(values) != set(live):
            raise ValueError("parameter name mismatch")
        for name, arr in live.items():
            arr[...] = values[name]

    def astype(self, dtype) -> "LstmAeModel":
        def cast(p):
            return type(p)(**{k: np.asarray(v, dtype=dtype) if isinstance(v, np.ndarray) else v
                              for k, v in p.__dict__.items()})
        clone = copy.deepcopy(self)
        clone.enc_fc = cast(clone.enc_fc)
        clone.dec_fc = cast(clone.dec_fc)
        clone.enc_lstm = [cast(l) for l in clone.enc_lstm]
        clone.dec_lstm = [cast(l) for l in clone.dec_lstm]
        return clone


def _init_lstm_layer(rng: np.random.Generator, d: int, h: int, dtype) -> LstmLayerParams:
    bound = 1.0 / np.sqrt(h)
    w_x = rng.uniform(-bound, bound, size=(4 * h, d)).astype(dtype)
    w_h = rng.uniform(-bound, bound, size=(4 * h, h)).astype(dtype)
    b = np.zeros(4 * h, dtype=dtype)
    b[h:2 * h] = 1.0  # forget gate
    return LstmLayerParams(w_x=w_x, w_h=w_h, b=b)


def _init_dense(rng: np.random.Generator, d_in: int, d_out: int, dtype) -> DenseParams:
    bound = 1.0 / np.sqrt(d_in)
    w = rng.uniform(-bound, bound, size=(d_out, d_in)).astype(dtype)
    return DenseParams(w=w, b=np.zeros(d_out, dtype=dtype))


def init_model(n_input: int,
               dense_units: int = DEFAULT_DENSE_UNITS,
               enc_units: tuple[int, ...] = DEFAULT_ENC_UNITS,
               dec_units: tuple[int, ...] = DEFAULT_DEC_UNITS,
               rescale: tuple[float, float] = DEFAULT_RESCALE,
               seed: int = 0,
               dtype=np.float64) -> LstmAeModel:
    """Build a seeded model; the bottleneck size is enc_units[-1]."""
    if n_input < 1 or dense_units < 1 or not enc_units or not dec_units:
        raise ValueError("all layer sizes must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xAE]))
    enc_fc = _init_dense(rng, n_input, dense_units, dtype)
    enc_lstm, d = [], dense_units
    for h in enc_units:
        enc_lstm.append(_init_lstm_layer(rng, d, h, dtype))
        d = h
    dec_lstm = []
    for h in dec_units:
        dec_lstm.append(_init_lstm_layer(rng, d, h, dtype))
        d = h
    dec_fc = _init_dense(rng, d, n_input, dtype)
    return LstmAeModel(enc_fc=enc_fc, enc_lstm=enc_lstm, dec_lstm=dec_lstm,
                       dec_fc=dec_fc, rescale=(float(rescale[0]), float(rescale[1])),
                       seed=int(seed))


def default_architecture(n_latent: int) -> tuple[int, tuple[int, ...], tuple[int, ...]]:
    """(dense_units, enc_units, dec_units) with the bottleneck swapped to n_latent."""
    return DEFAULT_DENSE_UNITS, (64, 32, int(n_latent)), DEFAULT_DEC_UNITS


def lstm_cell(x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
              p: LstmLayerParams) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM step: returns (h_t, c_t)."""
    h = p.hidden_size
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    if x_t.shape != (p.input_size,):
        raise ValueError(f"x_t shape {x_t.shape}, expected ({p.input_size},)")
    if h_prev.shape != (h,) or c_prev.shape != (h,):
        raise ValueError(f"state shapes {h_prev.shape}/{c_prev.shape}, expected ({h},)")
    z = p.w_x @ x_t + p.w_h @ h_prev + p.b
    i = sigmoid(z[:h])
    f = sigmoid(z[h:2 * h])
    g = np.tanh(z[2 * h:3 * h])
    o = sigmoid(z[3 * h:])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    if not (np.all(np.isfinite(h_t)) and np.all(np.isfinite(c_t))):
        raise FloatingPointError("non-finite LSTM cell activation")
    return h_t, c_t


def _layer_forward(x_seq: np.ndarray, p: LstmLayerParams, layer_name: str):
    """Run one LSTM layer over a (T, d) sequence. Returns (H, cache)."""
    t_len = x_seq.shape[0]
    h = p.hidden_size
    zx = x_seq @ p.w_x.T + p.b  # input projection for all steps at once
    wh_t = np.ascontiguousarray(p.w_h.T)
    gi = np.empty((t_len, h), dtype=x_seq.dtype)
    gf = np.empty_like(gi)
    gg = np.empty_like(gi)
    go = np.empty_like(gi)
    cs = np.empty_like(gi)
    tc = np.empty_like(gi)
    hs = np.empty_like(gi)
    h_t = np.zeros(h, dtype=x_seq.dtype)
    c_t = np.zeros(h, dtype=x_seq.dtype)
    for t in range(t_len):
        z = zx[t] + h_t @ wh_t
        i = sigmoid(z[:h])
        f = sigmoid(z[h:2 * h])
        g = np.tanh(z[2 * h:3 * h])
        o = sigmoid(z[3 * h:])
        c_t = f * c_t + i * g
        tch = np.tanh(c_t)
        h_t = o * tch
        gi[t] = i; gf[t] = f; gg[t] = g; go[t] = o
        cs[t] = c_t; tc[t] = tch; hs[t] = h_t
    if not np.all(np.isfinite(hs)):
        bad_t = int(np.argwhere(~np.isfinite(hs).all(axis=1))[0, 0])
        raise FloatingPointError(f"non-finite activation in {layer_name} at step {bad_t}")
    cache = {"x": x_seq, "i": gi, "f": gf, "g": gg, "o": go, "c": cs, "tanh_c": tc, "h": hs}
    return hs, cache


def _layer_backward(cache: dict, p: LstmLayerParams, d_h: np.ndarray):
    """BPTT through one layer. Returns (dX, dWx, dWh, db)."""
    gi, gf, gg, go = cache["i"], cache["f"], cache["g"], cache["o"]
    cs, tc, hs, x_seq = cache["c"], cache["tanh_c"], cache["h"], cache["x"]
    t_len, h = hs.shape
    dz = np.empty((t_len, 4 * h), dtype=hs.dtype)
    dh_next = np.zeros(h, dtype=hs.dtype)
    dc_next = np.zeros(h, dtype=hs.dtype)
    w_h = p.w_h
    for t in range(t_len - 1, -1, -1):
        dh = d_h[t] + dh_next
        do = dh * tc[t]
        dc = dc_next + dh * go[t] * (1.0 - tc[t] ** 2)
        di = dc * gg[t]
        dg = dc * gi[t]
        if t > 0:
            df = dc * cs[t - 1]
        else:
            df = np.zeros(h, dtype=hs.dtype)
        dc_next = dc * gf[t]
        dz_t = dz[t]
        dz_t[:h] = di * gi[t] * (1.0 - gi[t])
        dz_t[h:2 * h] = df * gf[t] * (1.0 - gf[t])
        dz_t[2 * h:3 * h] = dg * (1.0 - gg[t] ** 2)
        dz_t[3 * h:] = do * go[t] * (1.0 - go[t])
        dh_next = dz_t @ w_h
    d_wx = dz.T @ x_seq
    d_wh = dz[1:].T @ hs[:-1] if t_len > 1 else np.zeros_like(p.w_h)
    d_b = dz.sum(axis=0)
    d_x = dz @ p.w_x
    return d_x, d_wx, d_wh, d_b


def forward(x, model: LstmAeModel):
    """Full forward pass.

    Returns (x_hat, y, cache): the reconstruction (T x N), the latent
    embedding (T x C, the hidden sequence of the last encoder layer), and
    the cache consumed by :func:`backward`. No input rescaling happens
    here; train/transform wrappers own that.
    """
    x = _as_model_input(x, model)
    a_pre = x @ model.enc_fc.w.T + model.enc_fc.b
    a = np.tanh(a_pre)
    caches = []
    seq = a
    for li, layer in enumerate(model.enc_lstm):
        seq, cache = _layer_forward(seq, layer, f"enc_lstm.{li}")
        caches.append(cache)
    y = seq
    for li, layer in enumerate(model.dec_lstm):
        seq, cache = _layer_forward(seq, layer, f"dec_lstm.{li}")
        caches.append(cache)
    out_pre = seq @ model.dec_fc.w.T + model.dec_fc.b
    x_hat = np.tanh(out_pre)
    cache = {"x": x, "enc_fc_out": a, "layers": caches, "dec_in": seq,
             "x_hat": x_hat, "n_enc": len(model.enc_lstm), "model": model}
    return x_hat, y, cache


def encode(m, model: LstmAeModel) -> LatentEmbedding:
    """Latent embedding only (decoder skipped); identical to forward's Y."""
    x = _as_model_input(m, model)
    a = np.tanh(x @ model.enc_fc.w.T + model.enc_fc.b)
    seq = a
    for li, layer in enumerate(model.enc_lstm):
        seq, _ = _layer_forward(seq, layer, f"enc_lstm.{li}")
    return LatentEmbedding(values=np.asarray(seq, dtype=np.float64))


def _as_model_input(m, model: LstmAeModel) -> np.ndarray:
    x = m.values if isinstance(m, DataMatrix) else np.asarray(m)
    if x.ndim != 2:
        raise ValueError(f"input must be 2-D, got shape {x.shape}")
    if x.shape[1] != model.n_input:
        raise ValueError(f"input has {x.shape[1]} pixels, model expects {model.n_input}")
    return np.asarray(x, dtype=model.dtype)


def mse_loss(x_hat: np.ndarray, x: np.ndarray) -> float:
    x_hat = np.asarray(x_hat)
    x = np.asarray(x)
    if x_hat.shape != x.shape:
        raise ValueError(f"shape mismatch {x_hat.shape} vs {x.shape}")
    diff = x_hat - x
    return float(np.mean(diff * diff))


def backward(cache: dict, x) -> dict[str, np.ndarray]:
    """Exact gradients of mse_loss(forward(x), x_target) for every parameter.

    ``cache`` must come from :func:`forward` on the same model; ``x`` is the
    regression target (normally the forward input itself).
    """
    x = np.asarray(x, dtype=cache["x"].dtype)
    x_hat = cache["x_hat"]
    if x.shape != x_hat.shape:
        raise ValueError(f"target shape {x.shape} vs reconstruction {x_hat.shape}")
    grads: dict[str, np.ndarray] = {}
    d_xhat = (2.0 / x.size) * (x_hat - x)
    d_pre = d_xhat * (1.0 - x_hat**2)
    grads["dec_fc.w"] = d_pre.T @ cache["dec_in"]
    grads["dec_fc.b"] = d_pre.sum(axis=0)
    return _backprop_stacks(cache, grads, d_pre)


def _backprop_stacks(cache, grads, d_seq):
    layers_cache = cache["layers"]
    n_enc = cache["n_enc"]
    model = cache["model"]
    d_h = d_seq @ model.dec_fc.w
    for li in range(len(model.dec_lstm) - 1, -1, -1):
        lc = layers_cache[n_enc + li]
        d_h, d_wx, d_wh, d_b = _layer_backward(lc, model.dec_lstm[li], d_h)
        grads[f"dec_lstm.{li}.w_x"] = d_wx
        grads[f"dec_lstm.{li}.w_h"] = d_wh
        grads[f"dec_lstm.{li}.b"] = d_b
    for li in range(n_enc - 1, -1, -1):
        lc = layers_cache[li]
        d_h, d_wx, d_wh, d_b = _layer_backward(lc, model.enc_lstm[li], d_h)
        grads[f"enc_lstm.{li}.w_x"] = d_wx
        grads[f"enc_lstm.{li}.w_h"] = d_wh
        grads[f"enc_lstm.{li}.b"] = d_b
    a = cache["enc_fc_out"]
    d_a_pre = d_h * (1.0 - a**2)
    grads["enc_fc.w"] = d_a_pre.T @ cache["x"]
    grads["enc_fc.b"] = d_a_pre.sum(axis=0)
    return grads


@dataclass
class OptimizerState:
    """Adam moments and step counter; shapes mirror the parameter dict."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_adam(params: dict[str, np.ndarray], lr: float = 1e-3) -> OptimizerState:
    state = OptimizerState(lr=lr)
    state.m = {k: np.zeros_like(p) for k, p in params.items()}
    state.v = {k: np.zeros_like(p) for k, p in params.items()}
    return state


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: OptimizerState) -> OptimizerState:
    """Standard bias-corrected Adam update, applied to ``params`` in place."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state


def session_scale_params(x: np.ndarray, lo: float = DEFAULT_RESCALE[0],
                         hi: float = DEFAULT_RESCALE[1]) -> tuple[float, float]:
    """Affine (a, b) mapping the session's value range onto [lo, hi]."""
    xmin = float(np.min(x))
    xmax = float(np.max(x))
    if xmax == xmin:
        return 1.0, -xmin  # constant session: pin it to zero
    a = (hi - lo) / (xmax - xmin)
    return a, lo - a * xmin


@dataclass
class TrainReport:
    train_mse: list[float]
    val_mse: list[float]
    best_epoch: int
    wall_time_s: float


def train(train_sessions, val_sessions, model: LstmAeModel,
          epochs: int = 200, lr: float = 1e-3) -> tuple[LstmAeModel, TrainReport]:
    """Train with one full-sequence Adam step per session matrix per epoch.

    Sessions are rescaled per session into the model's rescale interval
    before optimization (losses are reported in that scaled space). The
    returned model carries the parameter snapshot with the lowest
    validation MSE.
    """
    if not train_sessions or not val_sessions:
        raise ValueError("need at least one train and one val session")
    lo, hi = model.rescale
    dtype = model.dtype

    def prepare(sessions):
        out = []
        for s in sessions:
            x = _as_model_input(s, model)
            a, b = session_scale_params(x, lo, hi)
            out.append(np.asarray(a * x + b, dtype=dtype))
        return out

    tr = prepare(train_sessions)
    va = prepare(val_sessions)
    params = model.parameters()
    state = init_adam(params, lr=lr)
    train_curve: list[float] = []
    val_curve: list[float] = []
    best_epoch = -1
    best_val = np.inf
    best_params: dict[str, np.ndarray] | None = None
    t0 = time.perf_counter()
    for epoch in range(epochs):
        losses = []
        for si, x in enumerate(tr):
            x_hat, _, cache = forward(x, model)
            loss = mse_loss(x_hat, x)
            if not np.isfinite(loss):
                raise DivergenceError(epoch, si)
            losses.append(loss)
            grads = backward(cache, x)
            adam_step(params, grads, state)
        train_curve.append(float(np.mean(losses)))
        v_losses = []
        for x in va:
            x_hat, _, _ = forward(x, model)
            v_losses.append(mse_loss(x_hat, x))
        val = float(np.mean(v_losses))
        if not np.isfinite(val):
            raise DivergenceError(epoch, -1)
        val_curve.append(val)
        if val < best_val:
            best_val = val
            best_epoch = epoch
            best_params = {k: p.copy() for k, p in params.items()}
    if best_params is not None:
        model.set_parameters(best_params)
    report = TrainReport(train_mse=train_curve, val_mse=val_curve,
                         best_epoch=best_epoch,
                         wall_time_s=time.perf_counter() - t0)
    return model, report


MODEL_MAGIC = b"FBL1"
MODEL_VERSION = 1


def save_model(model: LstmAeModel, path, best_epoch: int = -1) -> None:
    """Checkpoint: magic FBL1, version, JSON meta, shape table + float64 params."""
    meta = {
        "n_input": model.n_input,
        "dense_units": model.enc_fc.w.shape[0],
        "enc_units": [l.hidden_size for l in model.enc_lstm],
        "dec_units": [l.hidden_size for l in model.dec_lstm],
        "rescale": [model.rescale[0], model.rescale[1]],
        "seed": model.seed,
        "best_epoch": int(best_epoch),
    }
    meta_blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    params = model.parameters()
    chunks = [MODEL_MAGIC, struct.pack("<II", MODEL_VERSION, len(meta_blob)), meta_blob,
              struct.pack("<I", len(params))]
    for name, arr in params.items():
        name_b = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    from .io import atomic_write_bytes
    atomic_write_bytes(path, b"".join(chunks))


def load_model(path) -> tuple[LstmAeModel, int]:
    """Load a checkpoint; returns (model, best_epoch)."""
    from .io import BadMagicError, FileFormatError
    blob = Path(path).read_bytes()
    if blob[:4] != MODEL_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}, expected {MODEL_MAGIC!r}")
    version, meta_len = struct.unpack("<II", blob[4:12])
    if version != MODEL_VERSION:
        raise FileFormatError(f"{path}: unsupported model version {version}")
    off = 12
    meta = json.loads(blob[off:off + meta_len].decode("utf-8"))
    off += meta_len
    (n_arrays,) = struct.unpack("<I", blob[off:off + 4])
    off += 4
    model = init_model(
        n_input=meta["n_input"], dense_units=meta["dense_units"],
        enc_units=tuple(meta["enc_units"]), dec_units=tuple(meta["dec_units"]),
        rescale=tuple(meta["rescale"]), seed=meta["seed"], dtype=np.float64,
    )
    values: dict[str, np.ndarray] = {}
    for _ in range(n_arrays):
        (name_len,) = struct.unpack("<H", blob[off:off + 2])
        off += 2
        name = blob[off:off + name_len].decode("utf-8")
        off += name_len
        (ndim,) = struct.unpack("<B", blob[off:off + 1])
        off += 1
        shape = struct.unpack(f"<{ndim}I", blob[off:off + 4 * ndim])
        off += 4 * ndim
        count = int(np.prod(shape)) if shape else 1
        values[name] = np.frombuffer(blob[off:off + 8 * count], dtype="<f8").reshape(shape).copy()
        off += 8 * count
    if off != len(blob):
        raise FileFormatError(f"{path}: {len(blob) - off} trailing bytes")
    model.set_parameters(values)
    return model, int(meta["best_epoch"])


class LstmAutoencoder(BaseEstimator):
    """sklearn-style wrapper: fit on a list of sessions, transform to latents.

    ``transform``/``reconstruct`` apply the same per-session affine rescale
    used during training, so a fitted estimator can be dropped into the
    regression stage directly.
    """

    def __init__(self, n_latent=16, dense_units=DEFAULT_DENSE_UNITS,
                 enc_units=None, dec_units=None, epochs=200,
                 learning_rate=1e-3, rescale_low=DEFAULT_RESCALE[0],
                 rescale_high=DEFAULT_RESCALE[1], precision="float64",
                 random_state=0):
        self.n_latent = n_latent
        self.dense_units = dense_units
        self.enc_units = enc_units
        self.dec_units = dec_units
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.rescale_low = rescale_low
        self.rescale_high = rescale_high
        self.precision = precision
        self.random_state = random_state

    def _build(self, n_input: int) -> LstmAeModel:
        enc = tuple(self.enc_units) if self.enc_units is not None \
            else (64, 32, int(self.n_latent))
        dec = tuple(self.dec_units) if self.dec_units is not None else DEFAULT_DEC_UNITS
        if enc[-1] != int(self.n_latent):
            raise ValueError(f"enc_units[-1]={enc[-1]} must equal n_latent={self.n_latent}")
        return init_model(n_input=n_input, dense_units=self.dense_units,
                          enc_units=enc, dec_units=dec,
                          rescale=(self.rescale_low, self.rescale_high),
                          seed=self.random_state, dtype=np.dtype(self.precision))

    def fit(self, X, y=None, validation=None):
        """X: list of sessions (DataMatrix or T x N arrays) sharing N."""
        sessions = list(X)
        if not sessions:
            raise ValueError("need at least one training session")
        n = (sessions[0].values if isinstance(sessions[0], DataMatrix)
             else np.asarray(sessions[0])).shape[1]
        model = self._build(n)
        val = list(validation) if validation is not None else sessions
        self.model_, self.report_ = train(sessions, val, model,
                                          epochs=self.epochs, lr=self.learning_rate)
        return self

    def transform(self, X) -> np.ndarray:
        """Latent time courses (T x C) of one session, rescaled as in training."""
        x = _as_model_input(X, self.model_)
        a, b = session_scale_params(x, *self.model_.rescale)
        return encode(a * x + b, self.model_).values

    def reconstruct(self, X) -> np.ndarray:
        """Session reconstruction mapped back to the input's units."""
        x = _as_model_input(X, self.model_)
        a, b = session_scale_params(x, *self.model_.rescale)
        x_hat, _, _ = forward(a * x + b, self.model_)
        return (np.asarray(x_hat, dtype=np.float64) - b) / a
