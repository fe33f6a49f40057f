"""Dense float64 tensors with reverse-mode differentiation on a gradient tape.

The engine is intentionally small: row-major float64 arrays, a fixed set of
primitives, and a tape that records enough to replay the chain rule backward.
Elementwise primitives refuse broadcasting (a plain scalar is the only
exception) so shape bugs surface at the call site.  The explicitly-named
``add_rowvec`` / ``mul_rowvec`` primitives cover the per-feature affine maps
that layers need without reintroducing silent broadcasting.

The tape tracks which tensors can influence a trainable parameter and the
backward pass skips every other gradient; feeding a large constant (say, a
normalized adjacency) through matmul therefore costs nothing extra at
backprop time.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ContractError, DimensionError, DomainError, NumericError

Scalar = Union[int, float]

# Set to False to skip the finiteness check that every primitive runs on its
# result.  Desk-scale runs keep it on; it is the runtime teeth behind the
# "finite in, finite out" invariant.
FINITE_CHECKS = True


class Tensor:
    """Immutable dense float64 array with a trainable flag.

    The wrapped numpy array is marked read-only; ops always produce fresh
    tensors.  Identity (not value) is what the tape tracks, so tensors can be
    used as dict keys.
    """

    __slots__ = ("data", "trainable")

    def __init__(self, data, trainable: bool = False):
        arr = np.array(data, dtype=np.float64, order="C")
        arr.flags.writeable = False
        self.data = arr
        self.trainable = trainable

    @classmethod
    def _wrap(cls, arr: np.ndarray, trainable: bool = False) -> "Tensor":
        # Internal fast path: takes ownership of arr, no copy.
        t = object.__new__(cls)
        arr = np.asarray(arr, dtype=np.float64, order="C")
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        t.data = arr
        t.trainable = trainable
        return t

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        flag = ", trainable" if self.trainable else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # Operator sugar; everything routes through the module primitives so the
    # tape sees every op.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(scale(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


_tls = threading.local()


def _tape_stack() -> list:
    stack = getattr(_tls, "stack", None)
    if stack is None:
        stack = []
        _tls.stack = stack
    return stack


def active_tape() -> Optional["GradTape"]:
    stack = _tape_stack()
    return stack[-1] if stack else None


class GradTape:
    """Ordered record of primitive ops, confined to one thread.

    Use as a context manager around a forward pass, then hand to
    :func:`backward` together with the scalar loss.  ``reset`` clears the
    record so one tape object can be reused across optimizer steps.
    """

    def __init__(self):
        self._records: list = []  # (out, inputs, back_fn, needs)
        self._produced: set = set()  # id() of every output
        self._needs: set = set()  # id() of outputs that can reach a trainable

    def __enter__(self) -> "GradTape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack().pop()
        assert popped is self, "tape stack corrupted"
        return False

    def __len__(self) -> int:
        return len(self._records)

    def reset(self) -> None:
        self._records.clear()
        self._produced.clear()
        self._needs.clear()


def _record(out: Tensor, inputs: Sequence[Tensor], back: Callable) -> None:
    tape = active_tape()
    if tape is None:
        return
    needs = tuple(t.trainable or id(t) in tape._needs for t in inputs)
    if any(needs):
        tape._needs.add(id(out))
    tape._records.append((out, tuple(inputs), back, needs))
    tape._produced.add(id(out))


def _finalize(arr: np.ndarray, op: str) -> Tensor:
    if FINITE_CHECKS and not np.isfinite(arr).all():
        raise NumericError(f"{op} produced non-finite values")
    return Tensor._wrap(arr)


def _as_tensor_or_scalar(x) -> Union[Tensor, float]:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return float(x)
    raise TypeError(f"expected Tensor or scalar, got {type(x).__name__}")


def backward(tape: GradTape, loss: Tensor) -> dict:
    """Walk the tape in reverse and return {trainable tensor: gradient array}.

    The loss must be a scalar produced under this tape.  Gradients have the
    same shape as their tensor; a trainable tensor that never entered the
    recorded graph simply has no entry.
    """
    if loss.shape != ():
        raise ContractError(f"loss must be scalar, got shape {loss.shape}")
    if id(loss) not in tape._produced:
        raise ContractError("loss was not produced under this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones(())}
    trainable: dict[int, Tensor] = {}
    for out, inputs, back, needs in reversed(tape._records):
        if not any(needs):
            continue
        g = grads.get(id(out))
        if g is None:
            continue
        for inp, gi in zip(inputs, back(g, needs)):
            if gi is None:
                continue
            key = id(inp)
            acc = grads.get(key)
            grads[key] = gi if acc is None else acc + gi
            if inp.trainable:
                trainable[key] = inp
    return {t: grads[key] for key, t in trainable.items()}


# ---------------------------------------------------------------------------
# Primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product.

    Supported rank combinations: 2Dx2D, 3Dx2D (shared right factor applied per
    batch row), 2Dx3D (shared left factor, used for one adjacency against a
    batch of node features), and 3Dx3D with equal batch extents.
    """
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        ok = ad.shape[1] == bd.shape[0]
    elif ad.ndim == 3 and bd.ndim == 2:
        ok = ad.shape[2] == bd.shape[0]
    elif ad.ndim == 2 and bd.ndim == 3:
        ok = ad.shape[1] == bd.shape[1]
    elif ad.ndim == 3 and bd.ndim == 3:
        ok = ad.shape[0] == bd.shape[0] and ad.shape[2] == bd.shape[1]
    else:
        raise DimensionError(f"matmul ranks unsupported: {ad.shape} @ {bd.shape}")
    if not ok:
        raise DimensionError(f"matmul shape mismatch: {ad.shape} @ {bd.shape}")

    out = _finalize(np.matmul(ad, bd), "matmul")

    def back(g, needs):
        ga = gb = None
        if needs[0]:
            ga = np.matmul(g, np.swapaxes(bd, -1, -2))
            if ad.ndim == 2 and ga.ndim == 3:
                ga = ga.sum(axis=0)
        if needs[1]:
            gb = np.matmul(np.swapaxes(ad, -1, -2), g)
            if bd.ndim == 2 and gb.ndim == 3:
                gb = gb.sum(axis=0)
        return ga, gb

    _record(out, (a, b), back)
    return out


def _binary_shapes(a: Tensor, b) -> None:
    if isinstance(b, Tensor) and b.shape != () and b.shape != a.shape:
        raise DimensionError(f"elementwise shapes differ: {a.shape} vs {b.shape}")


def add(a: Tensor, b) -> Tensor:
    b = _as_tensor_or_scalar(b)
    _binary_shapes(a, b)
    if isinstance(b, Tensor):
        out = _finalize(a.data + b.data, "add")

        def back(g, needs):
            gb = None
            if needs[1]:
                gb = g if b.shape == a.shape else np.asarray(g.sum())
            return (g if needs[0] else None), gb

        _record(out, (a, b), back)
    else:
        out = _finalize(a.data + b, "add")
        _record(out, (a,), lambda g, needs: (g,))
    return out


def sub(a: Tensor, b) -> Tensor:
    b = _as_tensor_or_scalar(b)
    _binary_shapes(a, b)
    if isinstance(b, Tensor):
        out = _finalize(a.data - b.data, "sub")

        def back(g, needs):
            gb = None
            if needs[1]:
                gb = -g if b.shape == a.shape else np.asarray(-g.sum())
            return (g if needs[0] else None), gb

        _record(out, (a, b), back)
    else:
        out = _finalize(a.data - b, "sub")
        _record(out, (a,), lambda g, needs: (g,))
    return out


def mul(a: Tensor, b) -> Tensor:
    b = _as_tensor_or_scalar(b)
    _binary_shapes(a, b)
    if isinstance(b, Tensor):
        out = _finalize(a.data * b.data, "mul")

        def back(g, needs):
            ga = gb = None
            if needs[0]:
                ga = g * b.data
            if needs[1]:
                gb = g * a.data
                if b.shape != a.shape:  # scalar tensor
                    gb = np.asarray(gb.sum())
            return ga, gb

        _record(out, (a, b), back)
    else:
        out = _finalize(a.data * b, "mul")
        _record(out, (a,), lambda g, needs: (g * b,))
    return out


def scale(a: Tensor, s: Scalar) -> Tensor:
    s = float(s)
    out = _finalize(a.data * s, "scale")
    _record(out, (a,), lambda g, needs: (g * s,))
    return out


def log(a: Tensor) -> Tensor:
    if (a.data <= 0.0).any():
        raise DomainError("log of non-positive value")
    out = _finalize(np.log(a.data), "log")
    _record(out, (a,), lambda g, needs: (g / a.data,))
    return out


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = _finalize(np.exp(a.data), "exp")
    _record(out, (a,), lambda g, needs: (g * out.data,))
    return out


def max0(a: Tensor) -> Tensor:
    """Elementwise max(x, 0), i.e. ReLU."""
    out = _finalize(np.maximum(a.data, 0.0), "max0")
    mask = a.data > 0.0
    _record(out, (a,), lambda g, needs: (g * mask,))
    return out


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes only strictly inside."""
    out = _finalize(np.clip(a.data, lo, hi), "clip")
    mask = (a.data > lo) & (a.data < hi)
    _record(out, (a,), lambda g, needs: (g * mask,))
    return out


def powf(a: Tensor, p: float) -> Tensor:
    """Elementwise power with fixed exponent; base must be positive unless p
    is a non-negative integer."""
    p = float(p)
    if not (p >= 0.0 and p.is_integer()) and (a.data <= 0.0).any():
        raise DomainError(f"powf exponent {p} needs a strictly positive base")
    out = _finalize(np.power(a.data, p), "powf")
    _record(out, (a,), lambda g, needs: (g * p * np.power(a.data, p - 1.0),))
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    out = _finalize(y, "sigmoid")
    _record(out, (a,), lambda g, needs: (g * out.data * (1.0 - out.data),))
    return out


def add_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """Add a length-F vector to every trailing row of x (explicit bias-style
    broadcast over the leading axes)."""
    if v.ndim != 1 or x.ndim < 2 or x.shape[-1] != v.shape[0]:
        raise DimensionError(f"add_rowvec shapes: {x.shape} + {v.shape}")
    out = _finalize(x.data + v.data, "add_rowvec")
    lead = tuple(range(x.ndim - 1))

    def back(g, needs):
        return (g if needs[0] else None), (g.sum(axis=lead) if needs[1] else None)

    _record(out, (x, v), back)
    return out


def mul_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """Scale every trailing row of x by a length-F vector."""
    if v.ndim != 1 or x.ndim < 2 or x.shape[-1] != v.shape[0]:
        raise DimensionError(f"mul_rowvec shapes: {x.shape} * {v.shape}")
    out = _finalize(x.data * v.data, "mul_rowvec")
    lead = tuple(range(x.ndim - 1))

    def back(g, needs):
        ga = g * v.data if needs[0] else None
        gb = (g * x.data).sum(axis=lead) if needs[1] else None
        return ga, gb

    _record(out, (x, v), back)
    return out


def prelu(x: Tensor, alpha: Tensor) -> Tensor:
    """x where positive, alpha*x elsewhere; alpha is per-channel over the
    trailing axis."""
    if alpha.ndim != 1 or x.shape[-1] != alpha.shape[0]:
        raise DimensionError(f"prelu alpha shape {alpha.shape} vs x {x.shape}")
    neg = x.data <= 0.0
    out = _finalize(np.where(neg, alpha.data * x.data, x.data), "prelu")
    lead = tuple(range(x.ndim - 1))

    def back(g, needs):
        gx = g * np.where(neg, alpha.data, 1.0) if needs[0] else None
        galpha = ((g * np.where(neg, x.data, 0.0)).sum(axis=lead)
                  if needs[1] else None)
        return gx, galpha

    _record(out, (x, alpha), back)
    return out


def _norm_axis(axis: int, rank: int) -> int:
    if not -rank <= axis < rank:
        raise DimensionError(f"axis {axis} out of range for rank {rank}")
    return axis % rank


def reduce_sum(a: Tensor, axis: Optional[int] = None) -> Tensor:
    # gradient arrays below may be broadcast views; backward never mutates
    # gradients in place, so sharing the buffer is safe
    if axis is None:
        out = _finalize(np.asarray(a.data.sum()), "reduce_sum")
        shape = a.shape
        _record(out, (a,), lambda g, needs: (np.broadcast_to(g, shape),))
        return out
    ax = _norm_axis(axis, a.ndim)
    out = _finalize(a.data.sum(axis=ax), "reduce_sum")
    shape = a.shape
    _record(out, (a,),
            lambda g, needs: (np.broadcast_to(np.expand_dims(g, ax), shape),))
    return out


def reduce_mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    if axis is None:
        n = a.size
        out = _finalize(np.asarray(a.data.mean()), "reduce_mean")
        shape = a.shape
        _record(out, (a,), lambda g, needs: (np.broadcast_to(g / n, shape),))
        return out
    ax = _norm_axis(axis, a.ndim)
    n = a.shape[ax]
    out = _finalize(a.data.mean(axis=ax), "reduce_mean")
    shape = a.shape
    _record(out, (a,),
            lambda g, needs: (np.broadcast_to(np.expand_dims(g / n, ax), shape),))
    return out


def reduce_max(a: Tensor, axis: Optional[int] = None) -> Tensor:
    """Max along an axis; gradient routes to the first occurrence on ties."""
    if axis is None:
        idx = int(a.data.argmax())
        out = _finalize(np.asarray(a.data.max()), "reduce_max")
        shape = a.shape

        def back_flat(g, needs):
            ga = np.zeros(shape)
            ga.flat[idx] = g
            return (ga,)

        _record(out, (a,), back_flat)
        return out
    ax = _norm_axis(axis, a.ndim)
    idx = a.data.argmax(axis=ax)
    out = _finalize(a.data.max(axis=ax), "reduce_max")
    shape = a.shape

    def back(g, needs):
        ga = np.zeros(shape)
        np.put_along_axis(ga, np.expand_dims(idx, ax), np.expand_dims(g, ax), axis=ax)
        return (ga,)

    _record(out, (a,), back)
    return out
