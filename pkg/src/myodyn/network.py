"""Bidirectional-GRU sequence regressor built on the autodiff tape.

Architecture: two BiGRU layers (per-direction hidden state, features are the
concatenation of both directions), two fully connected layers with rectifier
activations and inverted dropout, and a linear head that emits one activation
and one force per muscle at every window step. Force head outputs are in
units of each muscle's max isometric force and scaled to newtons by a fixed
per-muscle vector, so every head activation stays O(1).

All forward functions take a dict of tape Vars (one per parameter matrix) and
are pure given (params, input, rng draw).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DimensionError

GATES = ("z", "r", "h")
DIRECTIONS = ("f", "b")


@dataclass(frozen=True)
class NetworkConfig:
    n_muscles: int
    input_size: int = 3
    hidden_size: int = 64
    fc_size: int = 128
    dropout: float = 0.3
    force_scale: tuple = ()   # per-muscle newton scaling of the force head

    def __post_init__(self):
        scale = self.force_scale or (1.0,) * self.n_muscles
        if len(scale) != self.n_muscles:
            raise DimensionError(
                f"force_scale has {len(scale)} entries for {self.n_muscles} muscles")
        object.__setattr__(self, "force_scale", tuple(float(s) for s in scale))


def param_shapes(cfg: NetworkConfig) -> dict:
    """Shapes of every trainable array, keyed by a flat name."""
    shapes = {}
    for layer, in_size in ((1, cfg.input_size), (2, 2 * cfg.hidden_size)):
        for d in DIRECTIONS:
            for g in GATES:
                shapes[f"gru{layer}{d}_W{g}"] = (in_size, cfg.hidden_size)
                shapes[f"gru{layer}{d}_U{g}"] = (cfg.hidden_size, cfg.hidden_size)
                shapes[f"gru{layer}{d}_b{g}"] = (cfg.hidden_size,)
    feat = 2 * cfg.hidden_size
    shapes["fc1_W"] = (feat, cfg.fc_size)
    shapes["fc1_b"] = (cfg.fc_size,)
    shapes["fc2_W"] = (cfg.fc_size, cfg.fc_size)
    shapes["fc2_b"] = (cfg.fc_size,)
    shapes["head_W"] = (cfg.fc_size, 2 * cfg.n_muscles)
    shapes["head_b"] = (2 * cfg.n_muscles,)
    return shapes


def init_params(seed: int, cfg: NetworkConfig) -> dict:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.

    The head weight matrix starts at zero instead: untrained predictions are
    then exactly zero, so the newton-scale force-consistency term starts
    balanced instead of flooding the optimizer's second-moment estimate with
    a transient it would take thousands of iterations to forget.

    Parameters are drawn in sorted name order, so the result is a pure
    function of (seed, cfg).
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in sorted(param_shapes(cfg).items()):
        if name.rsplit("_", 1)[-1].startswith("b") or name == "head_W":
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def gru_cell_step(cell: dict, x_t, h_prev):
    """One GRU step: returns h_t for input x_t (B, in) and state h_prev (B, H).

    cell maps 'Wz','Uz','bz',... to tape Vars.
    """
    z = ad.sigmoid(ad.matmul(x_t, cell["Wz"]) + ad.matmul(h_prev, cell["Uz"]) + cell["bz"])
    r = ad.sigmoid(ad.matmul(x_t, cell["Wr"]) + ad.matmul(h_prev, cell["Ur"]) + cell["br"])
    h_tilde = ad.tanh(ad.matmul(x_t, cell["Wh"]) + ad.matmul(ad.mul(r, h_prev), cell["Uh"])
                      + cell["bh"])
    one_minus_z = 1.0 - z
    return ad.add(ad.mul(one_minus_z, h_prev), ad.mul(z, h_tilde))


def _cell_view(pvars: dict, layer: int, direction: str) -> dict:
    prefix = f"gru{layer}{direction}_"
    return {k[len(prefix):]: v for k, v in pvars.items() if k.startswith(prefix)}


def _direction_pass(cell: dict, steps: list, tape, hidden: int, reverse: bool) -> list:
    """One direction of one layer, numerically matching gru_cell_step.

    The update and reset gates share fused matmuls (their weight matrices are
    concatenated once per pass); per output column the summation order is the
    same as in the reference cell.
    """
    h_n = hidden
    w_all = ad.concat([cell["Wz"], cell["Wr"], cell["Wh"]], axis=1)  # (in, 3H)
    u_zr = ad.concat([cell["Uz"], cell["Ur"]], axis=1)               # (H, 2H)
    b_zr = ad.concat([cell["bz"], cell["br"]], axis=0)
    batch = steps[0].value.shape[0]
    h = tape.constant(np.zeros((batch, h_n)))
    order = range(len(steps) - 1, -1, -1) if reverse else range(len(steps))
    out: list = [None] * len(steps)
    for t in order:
        xp = ad.matmul(steps[t], w_all)
        zr = ad.sigmoid(ad.add(ad.add(ad.slice_axis(xp, 1, 0, 2 * h_n),
                                      ad.matmul(h, u_zr)), b_zr))
        z = ad.slice_axis(zr, 1, 0, h_n)
        r = ad.slice_axis(zr, 1, h_n, 2 * h_n)
        cand = ad.tanh(ad.add(ad.add(ad.slice_axis(xp, 1, 2 * h_n, 3 * h_n),
                                     ad.matmul(ad.mul(r, h), cell["Uh"])),
                              cell["bh"]))
        h = ad.add(ad.mul(1.0 - z, h), ad.mul(z, cand))
        out[t] = h
    return out


def bigru_forward(pvars: dict, steps: list, cfg: NetworkConfig) -> list:
    """Two stacked bidirectional layers over a window.

    steps is a list of per-timestep Vars (B, input_size); returns per-timestep
    feature Vars (B, 2*hidden). Initial hidden states are zero in both
    directions; the backward direction is a forward pass over the reversed
    sequence with its own parameters.
    """
    tape = steps[0].tape
    for layer in (1, 2):
        fwd = _direction_pass(_cell_view(pvars, layer, "f"), steps, tape,
                              cfg.hidden_size, reverse=False)
        bwd = _direction_pass(_cell_view(pvars, layer, "b"), steps, tape,
                              cfg.hidden_size, reverse=True)
        steps = [ad.concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
    return steps


def network_forward(pvars: dict, inputs: np.ndarray, cfg: NetworkConfig,
                    mode: str = "eval", rng=None):
    """Full forward pass over a batch of windows.

    inputs: (B, T, channels) already normalized. Returns (a_hat, f_hat) tape
    Vars of shape (T*B, n_muscles) in step-major row order; f_hat is in
    newtons. Train mode applies inverted dropout after each FC layer (rng
    required); eval mode is deterministic.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode '{mode}'")
    if mode == "train" and cfg.dropout > 0.0 and rng is None:
        raise ValueError("train mode with dropout needs an rng")
    batch, steps_n, channels = inputs.shape
    if channels != cfg.input_size:
        raise DimensionError(f"expected {cfg.input_size} input channels, got {channels}")
    tape = next(iter(pvars.values())).tape
    steps = [tape.constant(np.ascontiguousarray(inputs[:, t, :])) for t in range(steps_n)]
    features = bigru_forward(pvars, steps, cfg)
    flat = ad.concat(features, axis=0)  # (T*B, 2*hidden), step-major

    x = ad.relu(ad.matmul(flat, pvars["fc1_W"]) + pvars["fc1_b"])
    x = _dropout(x, cfg.dropout, mode, rng, tape)
    x = ad.relu(ad.matmul(x, pvars["fc2_W"]) + pvars["fc2_b"])
    x = _dropout(x, cfg.dropout, mode, rng, tape)
    out = ad.matmul(x, pvars["head_W"]) + pvars["head_b"]

    n = cfg.n_muscles
    a_hat = ad.slice_axis(out, axis=1, start=0, stop=n)
    f_hat = ad.mul(ad.slice_axis(out, axis=1, start=n, stop=2 * n),
                   tape.constant(np.asarray(cfg.force_scale)))
    return a_hat, f_hat


def _dropout(x, rate: float, mode: str, rng, tape):
    if mode != "train" or rate <= 0.0:
        return x
    keep = (rng.random(x.value.shape) >= rate) / (1.0 - rate)
    return ad.mul(x, tape.constant(keep))


def predict(params: dict, inputs: np.ndarray, cfg: NetworkConfig):
    """Eval-mode convenience wrapper returning numpy (B, T, N) arrays."""
    tape = ad.Tape()
    pvars = {k: tape.constant(v) for k, v in params.items()}
    a_hat, f_hat = network_forward(pvars, inputs, cfg, mode="eval")
    batch, steps_n = inputs.shape[0], inputs.shape[1]
    a = a_hat.value.reshape(steps_n, batch, cfg.n_muscles).transpose(1, 0, 2)
    f = f_hat.value.reshape(steps_n, batch, cfg.n_muscles).transpose(1, 0, 2)
    return a, f
