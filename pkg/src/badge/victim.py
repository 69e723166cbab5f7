"""Victim classifiers: plain numpy forward, backward, and SGD training.

Three architectures are supported:

  linear  flatten -> dense
  mlp     flatten -> dense(hidden) -> relu -> dense
  cnn     conv3x3(c->8) -> relu -> maxpool2x2 -> conv3x3(8->16) -> relu
          -> flatten -> dense

Each model normalizes pixels internally with per-channel statistics
taken from its training split, so callers (and attacks) always work in
raw 8-bit pixel space.
"""

from dataclasses import dataclass

import numpy as np

from . import binio
from .data import batches
from .errors import (ConsistencyError, DimensionError, FormatError,
                     ParameterError, TrainingError)
from .rng import ROLE_INIT, keyed_rng

ARCHS = ("linear", "mlp", "cnn")
MODEL_MAGIC = b"BVM1"

_PARAM_ORDER = {
    "linear": ("W", "b"),
    "mlp": ("W1", "b1", "W2", "b2"),
    "cnn": ("K1", "c1", "K2", "c2", "W", "b"),
}


@dataclass
class VictimModel:
    arch: str
    input_shape: tuple
    n_classes: int
    params: dict
    norm_mean: np.ndarray
    norm_std: np.ndarray

    @property
    def input_dim(self):
        c, h, w = self.input_shape
        return c * h * w


def _cnn_flat_dim(input_shape):
    c, h, w = input_shape
    h1, w1 = h - 2, w - 2                      # conv1, valid padding
    hp, wp = h1 // 2, w1 // 2                  # maxpool 2x2
    h2, w2 = hp - 2, wp - 2                    # conv2
    if h2 < 1 or w2 < 1:
        raise ParameterError("cnn needs images of at least 8x8, got %dx%d" % (h, w))
    return 16 * h2 * w2


def init_params(arch, input_shape, n_classes, hidden, seed):
    c, h, w = input_shape
    dim = c * h * w
    rng = keyed_rng(ROLE_INIT, seed)

    def dense(n_in, n_out):
        return rng.standard_normal((n_in, n_out)) / np.sqrt(n_in)

    if arch == "linear":
        return {"W": dense(dim, n_classes), "b": np.zeros(n_classes)}
    if arch == "mlp":
        return {
            "W1": dense(dim, hidden), "b1": np.zeros(hidden),
            "W2": dense(hidden, n_classes), "b2": np.zeros(n_classes),
        }
    if arch == "cnn":
        flat = _cnn_flat_dim(input_shape)
        return {
            "K1": rng.standard_normal((8, c, 3, 3)) / np.sqrt(9 * c),
            "c1": np.zeros(8),
            "K2": rng.standard_normal((16, 8, 3, 3)) / np.sqrt(9 * 8),
            "c2": np.zeros(16),
            "W": dense(flat, n_classes), "b": np.zeros(n_classes),
        }
    raise ParameterError("unknown arch %r" % (arch,))


def _conv_forward(x, kern, bias):
    """Valid 3x3 convolution. x (n,c,h,w), kern (k,c,3,3) -> (n,k,h-2,w-2)."""
    win = np.lib.stride_tricks.sliding_window_view(x, (3, 3), axis=(2, 3))
    n, c, oh, ow = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh, ow, c * 9)
    out = cols @ kern.reshape(kern.shape[0], -1).T + bias
    return out.transpose(0, 3, 1, 2), cols


def _conv_backward(dout, cols, kern, x_shape):
    """Gradients of a valid 3x3 conv. dout (n,k,oh,ow) -> (dx, dkern, dbias)."""
    n, k, oh, ow = dout.shape
    dflat = dout.transpose(0, 2, 3, 1).reshape(-1, k)
    dkern = (dflat.T @ cols.reshape(-1, cols.shape[-1])).reshape(kern.shape)
    dbias = dflat.sum(axis=0)
    dcols = (dflat @ kern.reshape(k, -1)).reshape(n, oh, ow, x_shape[1], 3, 3)
    dx = np.zeros(x_shape)
    for i in range(3):
        for j in range(3):
            dx[:, :, i:i + oh, j:j + ow] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx, dkern, dbias


def _pool_forward(x):
    """2x2 max pooling, stride 2; odd trailing rows/cols are dropped."""
    n, k, h, w = x.shape
    hp, wp = h // 2, w // 2
    win = x[:, :, : 2 * hp, : 2 * wp].reshape(n, k, hp, 2, wp, 2)
    flat = win.transpose(0, 1, 2, 4, 3, 5).reshape(n, k, hp, wp, 4)
    idx = flat.argmax(axis=-1)                 # ties go to the first max
    return flat.max(axis=-1), (idx, x.shape)


def _pool_backward(dout, cache):
    idx, x_shape = cache
    n, k, h, w = x_shape
    hp, wp = h // 2, w // 2
    dflat = np.zeros((n, k, hp, wp, 4))
    np.put_along_axis(dflat, idx[..., None], dout[..., None], axis=-1)
    dwin = dflat.reshape(n, k, hp, wp, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros(x_shape)
    dx[:, :, : 2 * hp, : 2 * wp] = dwin.reshape(n, k, 2 * hp, 2 * wp)
    return dx


def _normalize(model, pixels):
    n = pixels.shape[0]
    x = pixels.reshape((n,) + tuple(model.input_shape))
    mean = model.norm_mean[None, :, None, None]
    std = model.norm_std[None, :, None, None]
    return (x - mean) / std


def _forward_cache(model, pixels):
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2:
        raise DimensionError("pixels must be 2-D, got %d-D" % pixels.ndim)
    if pixels.shape[1] != model.input_dim:
        raise DimensionError(
            "pixels have dim %d, model expects %d" % (pixels.shape[1], model.input_dim)
        )
    p = model.params
    x = _normalize(model, pixels)
    n = x.shape[0]
    if model.arch == "linear":
        flat = x.reshape(n, -1)
        return flat @ p["W"] + p["b"], {"flat": flat}
    if model.arch == "mlp":
        flat = x.reshape(n, -1)
        pre = flat @ p["W1"] + p["b1"]
        hid = np.maximum(pre, 0.0)
        return hid @ p["W2"] + p["b2"], {"flat": flat, "pre": pre, "hid": hid}
    a1, cols1 = _conv_forward(x, p["K1"], p["c1"])
    r1 = np.maximum(a1, 0.0)
    pooled, pcache = _pool_forward(r1)
    a2, cols2 = _conv_forward(pooled, p["K2"], p["c2"])
    r2 = np.maximum(a2, 0.0)
    flat = r2.reshape(n, -1)
    logits = flat @ p["W"] + p["b"]
    return logits, {
        "x": x, "a1": a1, "cols1": cols1, "pcache": pcache, "pooled": pooled,
        "a2": a2, "cols2": cols2, "flat": flat,
    }


def forward(model, pixels) -> np.ndarray:
    """Logits for a batch of raw-pixel rows, shape (n, n_classes)."""
    return _forward_cache(model, pixels)[0]


def _softmax_ce(logits, labels):
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    n = logits.shape[0]
    loss = float(np.mean(lse - shifted[np.arange(n), labels]))
    probs = np.exp(shifted) / np.exp(lse)[:, None]
    dlogits = probs
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def loss_and_grads(model, pixels, labels):
    """Mean cross-entropy and analytic gradients for every parameter."""
    logits, cache = _forward_cache(model, pixels)
    loss, dlogits = _softmax_ce(logits, np.asarray(labels))
    p = model.params
    if model.arch == "linear":
        grads = {"W": cache["flat"].T @ dlogits, "b": dlogits.sum(axis=0)}
        return loss, grads
    if model.arch == "mlp":
        dhid = dlogits @ p["W2"].T
        dpre = dhid * (cache["pre"] > 0)
        grads = {
            "W1": cache["flat"].T @ dpre, "b1": dpre.sum(axis=0),
            "W2": cache["hid"].T @ dlogits, "b2": dlogits.sum(axis=0),
        }
        return loss, grads
    n = pixels.shape[0]
    dflat = dlogits @ p["W"].T
    dr2 = dflat.reshape(cache["a2"].shape)
    da2 = dr2 * (cache["a2"] > 0)
    dpooled, dK2, dc2 = _conv_backward(da2, cache["cols2"], p["K2"], cache["pooled"].shape)
    dr1 = _pool_backward(dpooled, cache["pcache"])
    da1 = dr1 * (cache["a1"] > 0)
    _, dK1, dc1 = _conv_backward(da1, cache["cols1"], p["K1"], cache["x"].shape)
    grads = {
        "K1": dK1, "c1": dc1, "K2": dK2, "c2": dc2,
        "W": cache["flat"].T @ dlogits, "b": dlogits.sum(axis=0),
    }
    return loss, grads


def train_victim(arch, data, epochs, lr, seed, batch_size=64, hidden=64) -> VictimModel:
    """Train a fresh model with plain mini-batch SGD on cross-entropy."""
    if arch not in ARCHS:
        raise ParameterError("unknown arch %r" % (arch,))
    if epochs < 1 or lr <= 0 or hidden < 1:
        raise ParameterError("epochs, lr, and hidden must be positive")

    imgs = data.train.pixels.reshape((-1,) + tuple(data.train.shape))
    mean = imgs.mean(axis=(0, 2, 3))
    std = imgs.std(axis=(0, 2, 3))
    std[std == 0] = 1.0

    model = VictimModel(
        arch=arch,
        input_shape=tuple(data.train.shape),
        n_classes=data.n_classes,
        params=init_params(arch, data.train.shape, data.n_classes, hidden, seed),
        norm_mean=mean,
        norm_std=std,
    )
    for epoch in range(epochs):
        for mb in batches(data.train, batch_size, seed, epoch):
            loss, grads = loss_and_grads(model, mb.pixels, mb.labels)
            if not np.isfinite(loss):
                raise TrainingError("non-finite loss at epoch %d" % epoch)
            for name, g in grads.items():
                model.params[name] -= lr * g
    return model


def decide(logits) -> np.ndarray:
    """Top-1 decisions as one-hot rows; ties go to the lowest class index."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise DimensionError("logits must be 2-D, got %d-D" % logits.ndim)
    out = np.zeros_like(logits)
    out[np.arange(logits.shape[0]), logits.argmax(axis=1)] = 1.0
    return out


def score(logits) -> np.ndarray:
    """Softmax probability rows, computed with max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise DimensionError("logits must be 2-D, got %d-D" % logits.ndim)
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def accuracy(model, batch) -> float:
    return float(np.mean(forward(model, batch.pixels).argmax(axis=1) == batch.labels))


def save_model(path, model: VictimModel) -> None:
    header = {
        "arch": model.arch,
        "input_shape": list(model.input_shape),
        "n_classes": int(model.n_classes),
    }
    arrays = {name: model.params[name] for name in _PARAM_ORDER[model.arch]}
    arrays["norm_mean"] = model.norm_mean
    arrays["norm_std"] = model.norm_std
    binio.write_blob(path, MODEL_MAGIC, header, arrays)


def load_model(path) -> VictimModel:
    header, arrays = binio.read_blob(path, MODEL_MAGIC)
    arch = header.get("arch")
    if arch not in ARCHS:
        raise FormatError("unknown arch %r in model file" % (arch,))
    shape = tuple(header["input_shape"])
    n_classes = int(header["n_classes"])
    if len(shape) != 3 or any(s < 1 for s in shape) or n_classes < 2:
        raise ConsistencyError("bad input_shape %r / n_classes %d" % (shape, n_classes))
    missing = [n for n in _PARAM_ORDER[arch] + ("norm_mean", "norm_std")
               if n not in arrays]
    if missing:
        raise ConsistencyError("model file lacks arrays: %s" % ", ".join(missing))
    params = {name: arrays[name] for name in _PARAM_ORDER[arch]}
    model = VictimModel(arch, shape, n_classes, params,
                        arrays["norm_mean"], arrays["norm_std"])
    last = params["b"] if "b" in params else params["b2"]
    if last.shape[0] != n_classes:
        raise ConsistencyError(
            "output layer has %d units for %d classes" % (last.shape[0], n_classes)
        )
    if model.norm_mean.shape != (shape[0],) or model.norm_std.shape != (shape[0],):
        raise ConsistencyError("normalization stats do not match channel count")
    return model


class QueryOracle:
    """Black-box query interface over a victim model.

    `query` returns one-hot decision rows (mode "decision") or softmax
    rows (mode "score") and counts every queried image.  Attack code
    must only ever touch the oracle, never the model behind it.
    """

    def __init__(self, model: VictimModel, mode="decision"):
        if mode not in ("decision", "score"):
            raise ParameterError("mode must be 'decision' or 'score', got %r" % (mode,))
        self._model = model
        self.mode = mode
        self.query_count = 0

    @property
    def n_classes(self):
        return self._model.n_classes

    @property
    def input_dim(self):
        return self._model.input_dim

    @property
    def image_shape(self):
        return tuple(self._model.input_shape)

    def query(self, pixels) -> np.ndarray:
        logits = forward(self._model, pixels)
        self.query_count += pixels.shape[0]
        return decide(logits) if self.mode == "decision" else score(logits)

    def probe_view(self, mode=None) -> "QueryOracle":
        """Same model behind a fresh, independently counted oracle."""
        return QueryOracle(self._model, mode or self.mode)
