"""Deterministic float64 numeric core: LSTM cell, dense layers, losses, Adam.

Dense algebra rides on numpy; every backward pass is hand-derived and
verifiable against central finite differences (``finite_difference_check``).
All operations are pure except ``adam_step``, which updates the passed
``ParamSet`` and ``AdamState`` in place.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from .errors import ContractError, DimensionError, NumericError, ParameterError

LSTM_GATES = ("i", "f", "g", "o")

_CELL_CACHE_KEYS = ("x", "h_prev", "c_prev", "i", "f", "g", "o", "c", "tanh_c")


def as_matrix(a, rows=None, cols=None, name="matrix") -> np.ndarray:
    """Validate a 2-D finite float64 array, optionally pinning its shape."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name}: expected a 2-D matrix, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise DimensionError(f"{name}: expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionError(f"{name}: expected {cols} cols, got {m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{name}: contains non-finite entries")
    return m


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form is stable for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class ParamSet:
    """Named float64 tensors with an immutable name->shape map.

    Exposes a flat-index view (stable coordinate numbering over the
    concatenation of tensors in insertion order) for per-parameter
    bookkeeping by the optimizer, EWC/SI importances, and gradient checks.
    """

    def __init__(self, tensors: dict[str, np.ndarray]):
        self._data: dict[str, np.ndarray] = {}
        for name, value in tensors.items():
            arr = np.array(value, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"parameter {name!r} contains non-finite entries")
            self._data[name] = arr
        self._names = tuple(self._data)
        offsets = []
        pos = 0
        for name in self._names:
            offsets.append(pos)
            pos += self._data[name].size
        self._offsets = offsets
        self._size = pos

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def size(self) -> int:
        return self._size

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: arr.shape for name, arr in self._data.items()}

    def __contains__(self, name: str) -> bool:
        return name in self._data

    def __iter__(self):
        return iter(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._data[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        if name not in self._data:
            raise ContractError(f"unknown parameter {name!r}; shape map is immutable")
        arr = np.asarray(value, dtype=np.float64)
        if arr.shape != self._data[name].shape:
            raise DimensionError(
                f"parameter {name!r}: expected shape {self._data[name].shape}, got {arr.shape}"
            )
        self._data[name] = arr.copy()

    def items(self):
        return self._data.items()

    def clone(self) -> "ParamSet":
        return type(self)({name: arr for name, arr in self._data.items()})

    def zeros_like(self) -> "GradSet":
        return GradSet({name: np.zeros_like(arr) for name, arr in self._data.items()})

    def same_shapes(self, other: "ParamSet") -> bool:
        return self.shapes() == other.shapes()

    def add_scaled(self, other: "ParamSet", scale: float = 1.0) -> None:
        """In-place ``self += scale * other`` over all tensors."""
        if not self.same_shapes(other):
            raise ContractError("shape maps differ; cannot accumulate")
        for name in self._names:
            self._data[name] += scale * other._data[name]

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self._data[name].ravel() for name in self._names]) \
            if self._names else np.zeros(0)

    def set_from_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self._size,):
            raise DimensionError(f"flat view has length {self._size}, got {vec.shape}")
        for name, off in zip(self._names, self._offsets):
            arr = self._data[name]
            arr[...] = vec[off:off + arr.size].reshape(arr.shape)

    def _locate(self, index: int) -> tuple[str, int]:
        if not 0 <= index < self._size:
            raise IndexError(f"flat index {index} out of range [0, {self._size})")
        pos = bisect_right(self._offsets, index) - 1
        name = self._names[pos]
        return name, index - self._offsets[pos]

    def get_flat(self, index: int) -> float:
        name, local = self._locate(index)
        return float(self._data[name].flat[local])

    def set_flat(self, index: int, value: float) -> None:
        name, local = self._locate(index)
        self._data[name].flat[local] = value

    def first_nonfinite(self) -> str | None:
        """Name of the first tensor holding a non-finite entry, or None."""
        for name, arr in self._data.items():
            if not np.all(np.isfinite(arr)):
                return name
        return None

    def allclose(self, other: "ParamSet", atol: float = 0.0, rtol: float = 0.0) -> bool:
        return self.same_shapes(other) and all(
            np.allclose(self._data[n], other._data[n], atol=atol, rtol=rtol)
            for n in self._names
        )

    def equal(self, other: "ParamSet") -> bool:
        """Exact elementwise equality across all tensors."""
        return self.same_shapes(other) and all(
            np.array_equal(self._data[n], other._data[n]) for n in self._names
        )


class GradSet(ParamSet):
    """Per-parameter gradient values, shape-compatible with a ParamSet."""


class AdamState:
    """First/second-moment accumulators plus step counter for Adam."""

    def __init__(self, params: ParamSet, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ParameterError("Adam betas must lie in [0, 1)")
        if eps <= 0.0:
            raise ParameterError("Adam epsilon must be positive")
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.step_count = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def clone(self) -> "AdamState":
        out = AdamState.__new__(AdamState)
        out.m = self.m.clone()
        out.v = self.v.clone()
        out.step_count = self.step_count
        out.beta1 = self.beta1
        out.beta2 = self.beta2
        out.eps = self.eps
        return out


def adam_step(params: ParamSet, grads: GradSet, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    if not params.same_shapes(grads):
        raise ContractError("gradient shape map does not match parameters")
    bad = grads.first_nonfinite()
    if bad is not None:
        raise NumericError(f"non-finite gradient for parameter {bad!r}")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for name in params:
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params[name] = params[name] - lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)


# ---------------------------------------------------------------------------
# LSTM cell
# ---------------------------------------------------------------------------


def _cell_params(params: ParamSet, input_dim: int, hidden: int):
    tensors = {}
    for gate in LSTM_GATES:
        for kind, shape in (("W", (input_dim, hidden)), ("U", (hidden, hidden)),
                            ("b", (hidden,))):
            name = f"{kind}_{gate}"
            if name not in params:
                raise ContractError(f"missing LSTM parameter {name!r}")
            arr = params[name]
            if arr.shape != shape:
                raise DimensionError(
                    f"LSTM parameter {name!r}: expected shape {shape}, got {arr.shape}"
                )
            tensors[name] = arr
    return tensors


def lstm_cell_forward(x_t, h_prev, c_prev, params: ParamSet):
    """One LSTM step.

    Gates: i/f/o sigmoid, candidate g tanh; c = f*c_prev + i*g, h = o*tanh(c).
    Returns (h, c, cache) where the cache stores the activations needed by
    ``lstm_cell_backward``.
    """
    x = as_matrix(x_t, name="x_t")
    B = x.shape[0]
    h_prev = as_matrix(h_prev, rows=B, name="h_prev")
    H = h_prev.shape[1]
    c_prev = as_matrix(c_prev, rows=B, cols=H, name="c_prev")
    p = _cell_params(params, x.shape[1], H)

    a_i = x @ p["W_i"] + h_prev @ p["U_i"] + p["b_i"]
    a_f = x @ p["W_f"] + h_prev @ p["U_f"] + p["b_f"]
    a_g = x @ p["W_g"] + h_prev @ p["U_g"] + p["b_g"]
    a_o = x @ p["W_o"] + h_prev @ p["U_o"] + p["b_o"]
    i = _sigmoid(a_i)
    f = _sigmoid(a_f)
    g = np.tanh(a_g)
    o = _sigmoid(a_o)
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = {"x": x, "h_prev": h_prev, "c_prev": c_prev,
             "i": i, "f": f, "g": g, "o": o, "c": c, "tanh_c": tanh_c}
    return h, c, cache


def lstm_cell_backward(d_h, d_c, cache, params: ParamSet, into: GradSet | None = None):
    """Backward of one LSTM step.

    Accumulates the parameter gradients into ``into`` (created if None) and
    returns (grads, d_x, d_h_prev, d_c_prev).
    """
    if not isinstance(cache, dict) or any(k not in cache for k in _CELL_CACHE_KEYS):
        raise ContractError("cache was not produced by lstm_cell_forward")
    x, h_prev = cache["x"], cache["h_prev"]
    B, H = h_prev.shape
    d_h = as_matrix(d_h, rows=B, cols=H, name="d_h")
    d_c = as_matrix(d_c, rows=B, cols=H, name="d_c")
    p = _cell_params(params, x.shape[1], H)
    if into is None:
        into = GradSet({name: np.zeros_like(arr) for name, arr in p.items()})
    for name in p:
        if name not in into:
            raise ContractError(f"gradient accumulator missing {name!r}")

    i, f, g, o = cache["i"], cache["f"], cache["g"], cache["o"]
    tanh_c = cache["tanh_c"]
    d_o = d_h * tanh_c
    d_c_total = d_c + d_h * o * (1.0 - tanh_c * tanh_c)
    d_f = d_c_total * cache["c_prev"]
    d_i = d_c_total * g
    d_g = d_c_total * i
    d_c_prev = d_c_total * f

    d_a = {
        "i": d_i * i * (1.0 - i),
        "f": d_f * f * (1.0 - f),
        "g": d_g * (1.0 - g * g),
        "o": d_o * o * (1.0 - o),
    }
    d_x = np.zeros_like(x)
    d_h_prev = np.zeros_like(h_prev)
    for gate in LSTM_GATES:
        da = d_a[gate]
        into[f"W_{gate}"] += x.T @ da
        into[f"U_{gate}"] += h_prev.T @ da
        into[f"b_{gate}"] += da.sum(axis=0)
        d_x += da @ p[f"W_{gate}"].T
        d_h_prev += da @ p[f"U_{gate}"].T
    return into, d_x, d_h_prev, d_c_prev


# ---------------------------------------------------------------------------
# Dense layer
# ---------------------------------------------------------------------------


def dense_forward(x, W, b, activation: str = "none"):
    """Affine map ``x @ W + b`` with optional ReLU. Returns (y, cache)."""
    if activation not in ("relu", "none"):
        raise ParameterError(f"unknown activation {activation!r}")
    x = as_matrix(x, name="x")
    W = as_matrix(W, rows=x.shape[1], name="W")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (W.shape[1],):
        raise DimensionError(f"b: expected shape ({W.shape[1]},), got {b.shape}")
    pre = x @ W + b
    y = np.maximum(pre, 0.0) if activation == "relu" else pre
    return y, {"x": x, "W": W, "pre": pre, "activation": activation}


def dense_backward(d_y, cache):
    """Backward of dense_forward. Returns (dW, db, d_x). ReLU' at 0 is 0."""
    x, W, pre = cache["x"], cache["W"], cache["pre"]
    d_y = as_matrix(d_y, rows=x.shape[0], cols=W.shape[1], name="d_y")
    d_pre = d_y * (pre > 0.0) if cache["activation"] == "relu" else d_y
    dW = x.T @ d_pre
    db = d_pre.sum(axis=0)
    d_x = d_pre @ W.T
    return dW, db, d_x


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch with a stable log-sum-exp.

    Returns (mean_loss, d_logits) with d_logits = (softmax - onehot) / B.
    """
    z = as_matrix(logits, name="logits")
    y = np.asarray(labels)
    B, C = z.shape
    if y.shape != (B,):
        raise DimensionError(f"labels: expected shape ({B},), got {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= C):
        raise ParameterError(f"labels must lie in [0, {C})")
    y = y.astype(np.intp)
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - lse
    loss = float(-log_p[np.arange(B), y].mean())
    d = np.exp(log_p)
    d[np.arange(B), y] -= 1.0
    d /= B
    return loss, d


def softmax_probs(logits) -> np.ndarray:
    """Row-wise softmax with a stable shift."""
    z = as_matrix(logits, name="logits")
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def distillation_loss(student_logits, teacher_logits, temperature: float):
    """Temperature-scaled KL(teacher || student), times tau^2, mean over batch.

    The tau^2 factor keeps gradient magnitudes comparable across temperatures.
    Gradients flow to the student logits only:
    d_student = tau * (softmax(s/tau) - softmax(t/tau)) / B.
    """
    if temperature <= 0.0:
        raise ParameterError("temperature must be positive")
    s = as_matrix(student_logits, name="student_logits")
    t = as_matrix(teacher_logits, rows=s.shape[0], cols=s.shape[1],
                  name="teacher_logits")
    tau = float(temperature)
    B = s.shape[0]

    def _log_softmax(z):
        shifted = z - z.max(axis=1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    log_q = _log_softmax(s / tau)
    log_p = _log_softmax(t / tau)
    p = np.exp(log_p)
    kl = (p * (log_p - log_q)).sum(axis=1)
    loss = float(tau * tau * kl.mean())
    d_student = tau * (np.exp(log_q) - p) / B
    return loss, d_student


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def finite_difference_check(loss_fn, params: ParamSet, step: float = 1e-5,
                            samples: int = 50, seed: int = 0,
                            floor: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    ``loss_fn(params) -> (loss, GradSet)`` must be deterministic. ``samples``
    coordinates are drawn without replacement from the flat view. The relative
    error uses the finite difference as reference with an absolute ``floor``
    in the denominator so near-zero derivatives do not amplify roundoff noise.
    """
    if step <= 0.0:
        raise ParameterError("step must be positive")
    _, analytic = loss_fn(params)
    if not params.same_shapes(analytic):
        raise ContractError("loss_fn returned gradients with a different shape map")
    rng = np.random.default_rng(seed)
    n = min(int(samples), params.size)
    coords = rng.choice(params.size, size=n, replace=False)
    worst = 0.0
    for idx in coords:
        idx = int(idx)
        original = params.get_flat(idx)
        params.set_flat(idx, original + step)
        loss_plus, _ = loss_fn(params)
        params.set_flat(idx, original - step)
        loss_minus, _ = loss_fn(params)
        params.set_flat(idx, original)
        fd = (loss_plus - loss_minus) / (2.0 * step)
        a = analytic.get_flat(idx)
        rel = abs(a - fd) / max(abs(fd), floor)
        worst = max(worst, rel)
    return worst
