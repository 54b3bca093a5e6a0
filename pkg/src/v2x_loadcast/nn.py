"""From-scratch recurrent forecaster: LSTM/GRU cell, linear head, BPTT.

One recurrent layer of H cells reads a window of M samples and a single
linear unit (no activation) maps the final hidden state to the predicted
call count. Gate equations, with sigmoid s and elementwise products:

LSTM (gate blocks i, f, g, o in the stacked weight matrices):
    i = s(x W_xi + h' W_hi + b_i)        f = s(x W_xf + h' W_hf + b_f)
    g = tanh(x W_xg + h' W_hg + b_g)     o = s(x W_xo + h' W_ho + b_o)
    c = f * c' + i * g                   h = o * tanh(c)

GRU (blocks r, z, n; a single bias per block, reset gate applied to the
recurrent part of the candidate):
    r = s(x W_xr + h' W_hr + b_r)        z = s(x W_xz + h' W_hz + b_z)
    n = tanh(x W_xn + r * (h' W_hn) + b_n)
    h = z * h' + (1 - z) * n

`backward` returns exact analytic gradients of the batch-mean MSE with
respect to every parameter; everything runs in float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeMismatch

GATE_BLOCKS = {"lstm": 4, "gru": 3}
CHECKPOINT_FORMAT = "v2x-loadcast-model"
CHECKPOINT_VERSION = 1


@dataclass
class ModelParameters:
    """All weights of the recurrent cell plus the linear head."""

    cell: str
    w_x: np.ndarray  # (D, blocks*H) input weights, gate blocks side by side
    w_h: np.ndarray  # (H, blocks*H) recurrent weights
    b: np.ndarray  # (blocks*H,)
    w_out: np.ndarray  # (H, T_out) linear head
    b_out: np.ndarray  # (T_out,)

    def __post_init__(self):
        if self.cell not in GATE_BLOCKS:
            raise ShapeMismatch(f"unknown cell kind {self.cell!r}")
        blocks = GATE_BLOCKS[self.cell]
        d, gh = self.w_x.shape
        h = self.w_h.shape[0]
        if gh != blocks * h or self.w_h.shape != (h, blocks * h):
            raise ShapeMismatch(f"w_x {self.w_x.shape} / w_h {self.w_h.shape} inconsistent")
        if self.b.shape != (blocks * h,):
            raise ShapeMismatch(f"bias shape {self.b.shape} != ({blocks * h},)")
        if self.w_out.shape[0] != h or self.w_out.ndim != 2:
            raise ShapeMismatch(f"head shape {self.w_out.shape} does not map H={h}")
        if self.b_out.shape != (self.w_out.shape[1],):
            raise ShapeMismatch(f"head bias shape {self.b_out.shape}")
        for name, tensor in self.tensors().items():
            if not np.all(np.isfinite(tensor)):
                raise ShapeMismatch(f"non-finite values in parameter {name}")

    @property
    def input_size(self) -> int:
        return self.w_x.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[0]

    @property
    def out_size(self) -> int:
        return self.w_out.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        """Live views of every parameter tensor, keyed by name."""
        return {
            "w_x": self.w_x,
            "w_h": self.w_h,
            "b": self.b,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }

    def copy(self) -> "ModelParameters":
        return replace(
            self,
            w_x=self.w_x.copy(),
            w_h=self.w_h.copy(),
            b=self.b.copy(),
            w_out=self.w_out.copy(),
            b_out=self.b_out.copy(),
        )


def init_parameters(
    cell: str,
    input_size: int,
    hidden_size: int,
    rng: np.random.Generator,
    out_size: int = 1,
) -> ModelParameters:
    """Uniform init in [-1/sqrt(H), 1/sqrt(H)]; LSTM forget bias starts at +1."""
    if cell not in GATE_BLOCKS:
        raise ShapeMismatch(f"unknown cell kind {cell!r}")
    blocks = GATE_BLOCKS[cell]
    h = hidden_size
    scale = 1.0 / np.sqrt(h)
    w_x = rng.uniform(-scale, scale, (input_size, blocks * h))
    w_h = rng.uniform(-scale, scale, (h, blocks * h))
    b = np.zeros(blocks * h)
    if cell == "lstm":
        b[h : 2 * h] = 1.0
    w_out = rng.uniform(-scale, scale, (h, out_size))
    b_out = np.zeros(out_size)
    return ModelParameters(cell, w_x, w_h, b, w_out, b_out)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class ForwardTrace:
    """Per-timestep activations retained for backpropagation through time."""

    inputs: np.ndarray  # (B, M, D)
    preds: np.ndarray  # (B, T_out)
    h_prev: np.ndarray  # (M, B, H) hidden state entering each step
    h_last: np.ndarray  # (B, H)
    # LSTM fields
    i: np.ndarray | None = None
    f: np.ndarray | None = None
    g: np.ndarray | None = None
    o: np.ndarray | None = None
    c: np.ndarray | None = None  # (M, B, H) cell state leaving each step
    tanh_c: np.ndarray | None = None
    # GRU fields
    r: np.ndarray | None = None
    z: np.ndarray | None = None
    n: np.ndarray | None = None
    hh_n: np.ndarray | None = None  # h_prev @ W_hn, needed for the reset-gate gradient

    def __len__(self) -> int:
        return self.h_prev.shape[0]


def _as_batch(inputs: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 2:
        x = x[None, :, :]
    if x.ndim != 3 or x.shape[2] != d or x.shape[1] < 1:
        raise ShapeMismatch(f"inputs {x.shape} incompatible with input size {d}")
    return x


def forward(params: ModelParameters, inputs: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    """Run the window through the cell; returns predictions (B, T_out) and the trace."""
    x = _as_batch(inputs, params.input_size)
    bsz, m, _ = x.shape
    h_size = params.hidden_size
    zx = x @ params.w_x + params.b  # (B, M, blocks*H)
    h = np.zeros((bsz, h_size))

    h_prev = np.empty((m, bsz, h_size))
    if params.cell == "lstm":
        i_t = np.empty((m, bsz, h_size))
        f_t = np.empty_like(i_t)
        g_t = np.empty_like(i_t)
        o_t = np.empty_like(i_t)
        c_t = np.empty_like(i_t)
        tanh_c_t = np.empty_like(i_t)
        c = np.zeros((bsz, h_size))
        for t in range(m):
            h_prev[t] = h
            zz = zx[:, t, :] + h @ params.w_h
            i = _sigmoid(zz[:, :h_size])
            f = _sigmoid(zz[:, h_size : 2 * h_size])
            g = np.tanh(zz[:, 2 * h_size : 3 * h_size])
            o = _sigmoid(zz[:, 3 * h_size :])
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            i_t[t], f_t[t], g_t[t], o_t[t] = i, f, g, o
            c_t[t], tanh_c_t[t] = c, tc
        preds = h @ params.w_out + params.b_out
        trace = ForwardTrace(
            x, preds, h_prev, h, i=i_t, f=f_t, g=g_t, o=o_t, c=c_t, tanh_c=tanh_c_t
        )
    else:
        r_t = np.empty((m, bsz, h_size))
        z_t = np.empty_like(r_t)
        n_t = np.empty_like(r_t)
        hh_n_t = np.empty_like(r_t)
        for t in range(m):
            h_prev[t] = h
            hh = h @ params.w_h  # (B, 3H)
            r = _sigmoid(zx[:, t, :h_size] + hh[:, :h_size])
            z = _sigmoid(zx[:, t, h_size : 2 * h_size] + hh[:, h_size : 2 * h_size])
            hh_n = hh[:, 2 * h_size :]
            n = np.tanh(zx[:, t, 2 * h_size :] + r * hh_n)
            h = z * h + (1.0 - z) * n
            r_t[t], z_t[t], n_t[t], hh_n_t[t] = r, z, n, hh_n
        preds = h @ params.w_out + params.b_out
        trace = ForwardTrace(x, preds, h_prev, h, r=r_t, z=z_t, n=n_t, hh_n=hh_n_t)
    return preds, trace


def predict(params: ModelParameters, inputs: np.ndarray) -> np.ndarray:
    return forward(params, inputs)[0]


def backward(
    params: ModelParameters, trace: ForwardTrace, targets: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact gradients of mean((pred - target)^2) over the batch.

    The trace must come from `forward` on the same parameters.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    if targets.shape != trace.preds.shape:
        raise ShapeMismatch(f"targets {targets.shape} vs predictions {trace.preds.shape}")

    x = trace.inputs
    bsz, m, _ = x.shape
    h_size = params.hidden_size
    d_pred = 2.0 * (trace.preds - targets) / targets.size  # (B, T_out)

    g_w_out = trace.h_last.T @ d_pred
    g_b_out = d_pred.sum(axis=0)
    dh = d_pred @ params.w_out.T  # (B, H)

    g_w_x = np.zeros_like(params.w_x)
    g_w_h = np.zeros_like(params.w_h)
    g_b = np.zeros_like(params.b)

    if params.cell == "lstm":
        dc = np.zeros((bsz, h_size))
        for t in range(m - 1, -1, -1):
            i, f, g, o = trace.i[t], trace.f[t], trace.g[t], trace.o[t]
            tc = trace.tanh_c[t]
            c_prev = trace.c[t - 1] if t > 0 else np.zeros((bsz, h_size))
            da_o = (dh * tc) * o * (1.0 - o)
            dc = dc + dh * o * (1.0 - tc * tc)
            da_f = (dc * c_prev) * f * (1.0 - f)
            da_i = (dc * g) * i * (1.0 - i)
            da_g = (dc * i) * (1.0 - g * g)
            da = np.concatenate([da_i, da_f, da_g, da_o], axis=1)  # (B, 4H)
            g_w_x += x[:, t, :].T @ da
            g_w_h += trace.h_prev[t].T @ da
            g_b += da.sum(axis=0)
            dh = da @ params.w_h.T
            dc = dc * f
    else:
        for t in range(m - 1, -1, -1):
            r, z, n, hh_n = trace.r[t], trace.z[t], trace.n[t], trace.hh_n[t]
            h_prev = trace.h_prev[t]
            dz = dh * (h_prev - n)
            da_z = dz * z * (1.0 - z)
            dn = dh * (1.0 - z)
            da_n = dn * (1.0 - n * n)
            dr = da_n * hh_n
            da_r = dr * r * (1.0 - r)
            da = np.concatenate([da_r, da_z, da_n], axis=1)  # (B, 3H)
            g_w_x += x[:, t, :].T @ da
            g_b += da.sum(axis=0)
            # Recurrent weights see h_prev directly for r and z, gated for n.
            g_w_h[:, : 2 * h_size] += h_prev.T @ da[:, : 2 * h_size]
            g_w_h[:, 2 * h_size :] += h_prev.T @ (da_n * r)
            dh = (
                dh * z
                + da_r @ params.w_h[:, :h_size].T
                + da_z @ params.w_h[:, h_size : 2 * h_size].T
                + (da_n * r) @ params.w_h[:, 2 * h_size :].T
            )

    return {"w_x": g_w_x, "w_h": g_w_h, "b": g_b, "w_out": g_w_out, "b_out": g_b_out}


def save_checkpoint(params: ModelParameters, path: str) -> None:
    """Versioned JSON checkpoint: named tensors with shape headers."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "cell": params.cell,
        "input_size": params.input_size,
        "hidden_size": params.hidden_size,
        "out_size": params.out_size,
        "tensors": {
            name: {"shape": list(tensor.shape), "data": tensor.ravel().tolist()}
            for name, tensor in params.tensors().items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path: str) -> ModelParameters:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} checkpoint: {path}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    tensors = {}
    for name, spec in payload["tensors"].items():
        tensors[name] = np.array(spec["data"], dtype=np.float64).reshape(spec["shape"])
    return ModelParameters(payload["cell"], **tensors)
