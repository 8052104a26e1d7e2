"""Small reverse-mode autodiff over float64 numpy arrays.

Operations record themselves on the active :class:`Tape` (if any); without
a tape they only compute values, which is what decoding uses::

    with Tape() as tape:
        loss = softmax_cross_entropy(affine(W, x, b), gold)
        tape.backward(loss)
    sgd_step(params, learning_rate=0.1, clip_norm=5.0)
"""
from __future__ import annotations

import contextvars
import json
import struct
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

_ACTIVE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("active_tape", default=None)


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad")

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


class Parameter(Tensor):
    __slots__ = ("name", "trainable")

    def __init__(self, name: str, value, trainable: bool = True):
        super().__init__(value, requires_grad=trainable)
        self.name = name
        self.trainable = trainable


class Tape:
    """Ordered record of backward closures for one computation."""

    def __init__(self):
        self.records: list[Callable[[], None]] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.reset(self._token)

    def backward(self, loss: Tensor) -> None:
        if loss.value.size != 1:
            raise ShapeError("backward needs a scalar loss")
        if not loss.requires_grad:
            return
        loss.grad = np.ones_like(loss.value)
        for record in reversed(self.records):
            record()
        self.records.clear()


def _acc(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _record(inputs: Sequence[Tensor], out: Tensor | Sequence[Tensor], backward: Callable[[], None]) -> None:
    tape = _ACTIVE.get()
    if tape is None or not any(t.requires_grad for t in inputs):
        return
    for o in out if isinstance(out, (list, tuple)) else (out,):
        o.requires_grad = True
    tape.records.append(backward)


def constant(value) -> Tensor:
    return Tensor(value)


# ---------------------------------------------------------------------------
# operations


def affine(W: Tensor, x: Tensor, b: Tensor | None = None) -> Tensor:
    """``W @ x + b`` for a matrix ``W`` and vector ``x``."""
    if W.value.ndim != 2 or x.value.ndim != 1 or W.shape[1] != x.shape[0]:
        raise ShapeError(f"affine: W{W.shape} incompatible with x{x.shape}")
    if b is not None and b.shape != (W.shape[0],):
        raise ShapeError(f"affine: bias {b.shape} does not match W{W.shape}")
    val = W.value @ x.value
    if b is not None:
        val = val + b.value
    out = Tensor(val)
    inputs = (W, x) if b is None else (W, x, b)

    def backward():
        g = out.grad
        if g is None:
            return
        if W.requires_grad:
            _acc(W, np.outer(g, x.value))
        if x.requires_grad:
            _acc(x, W.value.T @ g)
        if b is not None:
            _acc(b, g)

    _record(inputs, out, backward)
    return out


def concat(xs: Sequence[Tensor]) -> Tensor:
    for x in xs:
        if x.value.ndim != 1:
            raise ShapeError(f"concat: expected vectors, got shape {x.shape}")
    out = Tensor(np.concatenate([x.value for x in xs]))
    sizes = [x.shape[0] for x in xs]

    def backward():
        g = out.grad
        if g is None:
            return
        start = 0
        for x, n in zip(xs, sizes):
            _acc(x, g[start:start + n])
            start += n

    _record(xs, out, backward)
    return out


def _unary(x: Tensor, fwd, deriv) -> Tensor:
    out = Tensor(fwd(x.value))

    def backward():
        if out.grad is not None:
            _acc(x, out.grad * deriv(x.value, out.value))

    _record((x,), out, backward)
    return out


def relu(x: Tensor) -> Tensor:
    return _unary(x, lambda v: np.maximum(v, 0.0), lambda v, y: (v > 0).astype(np.float64))


def tanh(x: Tensor) -> Tensor:
    return _unary(x, np.tanh, lambda v, y: 1.0 - y * y)


def _sigmoid(v: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def sigmoid(x: Tensor) -> Tensor:
    return _unary(x, _sigmoid, lambda v, y: y * (1.0 - y))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: {a.shape} vs {b.shape}")
    out = Tensor(a.value + b.value)

    def backward():
        if out.grad is not None:
            _acc(a, out.grad)
            _acc(b, out.grad)

    _record((a, b), out, backward)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: {a.shape} vs {b.shape}")
    out = Tensor(a.value * b.value)

    def backward():
        if out.grad is not None:
            _acc(a, out.grad * b.value)
            _acc(b, out.grad * a.value)

    _record((a, b), out, backward)
    return out


def total(xs: Sequence[Tensor]) -> Tensor:
    """Sum of scalar tensors."""
    out = Tensor(sum((x.value for x in xs), np.float64(0.0)))

    def backward():
        if out.grad is not None:
            for x in xs:
                _acc(x, out.grad)

    _record(xs, out, backward)
    return out


def pick_row(table: Tensor, index: int | Sequence[int]) -> Tensor:
    """Row ``index`` of a matrix (or entries of a vector); a sequence of
    indices gathers several rows."""
    idx = np.asarray(index)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(f"pick_row: index {index} out of range for {table.shape}")
    out = Tensor(table.value[idx])

    def backward():
        if out.grad is None or not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.value)
        np.add.at(table.grad, idx, out.grad)

    _record((table,), out, backward)
    return out


def lstm_step(W: Tensor, b: Tensor, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM step; ``W`` maps ``[x; h]`` to the stacked gates (i, f, o, g)."""
    hid = h.shape[0]
    if W.shape != (4 * hid, x.shape[0] + hid) or b.shape != (4 * hid,) or c.shape != (hid,):
        raise ShapeError(f"lstm_step: W{W.shape} b{b.shape} x{x.shape} h{h.shape} c{c.shape}")
    xh = np.concatenate([x.value, h.value])
    z = W.value @ xh + b.value
    i = _sigmoid(z[:hid])
    f = _sigmoid(z[hid:2 * hid])
    o = _sigmoid(z[2 * hid:3 * hid])
    g = np.tanh(z[3 * hid:])
    c_new = f * c.value + i * g
    tc = np.tanh(c_new)
    h_out = Tensor(o * tc)
    c_out = Tensor(c_new)

    def backward():
        gh = h_out.grad if h_out.grad is not None else 0.0
        gc = c_out.grad if c_out.grad is not None else 0.0
        if h_out.grad is None and c_out.grad is None:
            return
        gc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            gc * g * i * (1.0 - i),
            gc * c.value * f * (1.0 - f),
            gh * tc * o * (1.0 - o),
            gc * i * (1.0 - g * g),
        ])
        if W.requires_grad:
            _acc(W, np.outer(dz, xh))
        _acc(b, dz)
        if x.requires_grad or h.requires_grad:
            dxh = W.value.T @ dz
            _acc(x, dxh[:x.shape[0]])
            _acc(h, dxh[x.shape[0]:])
        _acc(c, gc * f)

    _record((W, b, x, h, c), (h_out, c_out), backward)
    return h_out, c_out


def _masked_log_softmax(logits: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    z = logits.astype(np.float64, copy=True)
    if mask is not None:
        z = np.where(mask, z, -np.inf)
    top = np.max(z)
    shifted = z - top
    return shifted - np.log(np.sum(np.exp(shifted)))


def softmax(logits: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Probabilities; masked positions are exactly 0."""
    if mask is not None and not np.any(mask):
        raise ValueError("softmax over an empty mask")
    return np.exp(_masked_log_softmax(np.asarray(logits), mask))


def softmax_cross_entropy(logits: Tensor, gold: int, mask: np.ndarray | None = None) -> Tensor:
    """``-log p(gold)`` under a softmax restricted to ``mask``."""
    if logits.value.ndim != 1:
        raise ShapeError(f"softmax_cross_entropy: logits must be a vector, got {logits.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != logits.shape:
            raise ShapeError(f"softmax_cross_entropy: mask {mask.shape} vs logits {logits.shape}")
        if not mask[gold]:
            raise ValueError("gold index is masked out")
    logp = _masked_log_softmax(logits.value, mask)
    out = Tensor(-logp[gold])

    def backward():
        if out.grad is None:
            return
        g = np.exp(logp)
        g[gold] -= 1.0
        if mask is not None:
            g[~mask] = 0.0
        _acc(logits, out.grad * g)

    _record((logits,), out, backward)
    return out


# ---------------------------------------------------------------------------
# parameters, optimization, checking


class ParameterCollection:
    """Named parameters with Glorot-uniform initialization."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.params: dict[str, Parameter] = {}

    def add(self, name: str, shape: tuple[int, ...], init: str = "glorot", trainable: bool = True, value=None) -> Parameter:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        if value is not None:
            arr = np.array(value, dtype=np.float64)
            if arr.shape != tuple(shape):
                raise ShapeError(f"{name}: value shape {arr.shape} != {shape}")
        elif init == "zeros":
            arr = np.zeros(shape)
        else:
            fan_out = shape[0]
            fan_in = shape[1] if len(shape) > 1 else 1
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            arr = self.rng.uniform(-bound, bound, size=shape)
        p = Parameter(name, arr, trainable)
        self.params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self.params[name]

    def __iter__(self):
        return iter(self.params.values())

    def __len__(self) -> int:
        return len(self.params)

    def trainable(self) -> list[Parameter]:
        return [p for p in self.params.values() if p.trainable]


def sgd_step(params: Iterable[Parameter], learning_rate: float, clip_norm: float | None = None) -> list[Parameter]:
    """Clip the global gradient norm, step against the gradient, zero grads."""
    params = list(params)
    grads = [p.grad for p in params if p.trainable and p.grad is not None]
    scale = 1.0
    if clip_norm:
        norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
        if norm > clip_norm:
            scale = clip_norm / norm
    for p in params:
        if p.trainable and p.grad is not None and learning_rate != 0.0:
            p.value -= (learning_rate * scale) * p.grad
        p.grad = None
    return params


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


def gradient_check(f: Callable[[], Tensor], params: Sequence[Parameter], eps: float = 1e-5) -> float:
    """Max over all parameter entries of
    ``|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)`` with central differences."""
    zero_grad(params)
    with Tape() as tape:
        loss = f()
        tape.backward(loss)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.value) for p in params]
    zero_grad(params)
    worst = 0.0
    for p, g_ad in zip(params, analytic):
        flat = p.value.reshape(-1)
        g_flat = g_ad.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + eps
            up = float(f().value)
            flat[k] = old - eps
            down = float(f().value)
            flat[k] = old
            g_fd = (up - down) / (2 * eps)
            err = abs(g_flat[k] - g_fd) / max(1.0, abs(g_flat[k]), abs(g_fd))
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# checkpoints

FORMAT_VERSION = 1
_MAGIC = b"STACKAMR-PARAMS"


def save_params(path: str | Path, params: Iterable[Parameter], header: dict) -> None:
    """Header line (format version + config echo) then one record per
    parameter: ``name``, shape, trainable flag, raw little-endian float64."""
    chunks = [_MAGIC + b" %d\n" % FORMAT_VERSION]
    chunks.append(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
    for p in params:
        data = p.value.astype("<f8").tobytes()
        shape = ",".join(str(d) for d in p.shape)
        chunks.append(f"{p.name}\t{shape}\t{int(p.trainable)}\t{len(data)}\n".encode("utf-8"))
        chunks.append(data)
    Path(path).write_bytes(b"".join(chunks))


def load_params(path: str | Path) -> tuple[dict, dict[str, tuple[np.ndarray, bool]]]:
    raw = Path(path).read_bytes()
    pos = raw.index(b"\n") + 1
    magic, version = raw[:pos - 1].split(b" ")
    if magic != _MAGIC or int(version) != FORMAT_VERSION:
        raise ValueError(f"{path}: not a parameter file of format {FORMAT_VERSION}")
    end = raw.index(b"\n", pos)
    header = json.loads(raw[pos:end].decode("utf-8"))
    pos = end + 1
    out: dict[str, tuple[np.ndarray, bool]] = {}
    while pos < len(raw):
        end = raw.index(b"\n", pos)
        name, shape_s, trainable, nbytes = raw[pos:end].decode("utf-8").split("\t")
        pos = end + 1
        shape = tuple(int(d) for d in shape_s.split(",")) if shape_s else ()
        n = int(nbytes)
        arr = np.frombuffer(raw[pos:pos + n], dtype="<f8").reshape(shape).astype(np.float64)
        pos += n
        out[name] = (arr, trainable == "1")
    return header, out
