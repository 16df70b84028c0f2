"""Scalar reverse-mode automatic differentiation.

Every ``DiffScalar`` is recorded on a :class:`Tape` in creation order, so the
tape is already topologically sorted and the backward pass is a single reverse
sweep.  Methods are named after numpy ufuncs (``sin``, ``tanh``, ``arctan`` ...)
so that object arrays of ``DiffScalar`` work with ``np.sin(arr)`` etc.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DiffScalar",
    "Tape",
    "lift",
    "gradient",
    "value",
    "tanh",
    "sigmoid",
    "exp",
    "log",
    "atan",
    "sin",
    "cos",
    "sqrt",
    "smooth_min",
    "smooth_max",
]


class Tape:
    """Ordered record of nodes created from one set of lifted variables."""

    __slots__ = ("nodes", "n_vars")

    def __init__(self) -> None:
        self.nodes: list[DiffScalar] = []
        self.n_vars = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def release(self) -> None:
        """Drop the node list so the graph is freed by reference counting."""
        self.nodes = []


class DiffScalar:
    __slots__ = ("value", "tape", "index", "parents", "var_index")

    def __init__(self, value: float, tape: Tape, parents: tuple = (), var_index: int = -1):
        self.value = float(value)
        self.tape = tape
        self.parents = parents  # tuple of (node index, local partial)
        self.var_index = var_index
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    def __repr__(self) -> str:
        return f"DiffScalar({self.value!r})"

    def __float__(self) -> float:
        return self.value

    # construction helpers
    def _unary(self, val: float, partial: float) -> DiffScalar:
        return DiffScalar(val, self.tape, ((self.index, partial),))

    def _binary(self, other, val: float, d_self: float, d_other: float) -> DiffScalar:
        if isinstance(other, DiffScalar):
            if other.tape is not self.tape:
                raise ValueError("operands belong to different tapes")
            return DiffScalar(val, self.tape, ((self.index, d_self), (other.index, d_other)))
        return DiffScalar(val, self.tape, ((self.index, d_self),))

    # arithmetic
    def __add__(self, other):
        o = _val(other)
        return self._binary(other, self.value + o, 1.0, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        o = _val(other)
        return self._binary(other, self.value - o, 1.0, -1.0)

    def __rsub__(self, other):
        return self._unary(float(other) - self.value, -1.0)

    def __mul__(self, other):
        o = _val(other)
        return self._binary(other, self.value * o, o, self.value)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _val(other)
        if o == 0.0:
            raise ZeroDivisionError("div: zero denominator")
        return self._binary(other, self.value / o, 1.0 / o, -self.value / (o * o))

    def __rtruediv__(self, other):
        if self.value == 0.0:
            raise ZeroDivisionError("div: zero denominator")
        num = float(other)
        return self._unary(num / self.value, -num / (self.value * self.value))

    def __neg__(self):
        return self._unary(-self.value, -1.0)

    def __pos__(self):
        return self

    def __abs__(self):
        return self._unary(abs(self.value), 1.0 if self.value >= 0.0 else -1.0)

    def __pow__(self, p):
        if isinstance(p, DiffScalar):
            raise TypeError("pow: exponent must be a constant")
        p = float(p)
        return self._unary(self.value**p, p * self.value ** (p - 1.0))

    # comparisons act on values; they drive branch selection, never gradients
    def __lt__(self, other):
        return self.value < _val(other)

    def __le__(self, other):
        return self.value <= _val(other)

    def __gt__(self, other):
        return self.value > _val(other)

    def __ge__(self, other):
        return self.value >= _val(other)

    # elementary functions (numpy ufunc method names)
    def tanh(self):
        t = math.tanh(self.value)
        return self._unary(t, 1.0 - t * t)

    def sigmoid(self):
        s = _sigmoid(self.value)
        return self._unary(s, s * (1.0 - s))

    def exp(self):
        e = math.exp(self.value)
        return self._unary(e, e)

    def log(self):
        if self.value <= 0.0:
            raise ValueError("log: argument must be positive")
        return self._unary(math.log(self.value), 1.0 / self.value)

    def arctan(self):
        return self._unary(math.atan(self.value), 1.0 / (1.0 + self.value * self.value))

    def sin(self):
        return self._unary(math.sin(self.value), math.cos(self.value))

    def cos(self):
        return self._unary(math.cos(self.value), -math.sin(self.value))

    def tan(self):
        t = math.tan(self.value)
        return self._unary(t, 1.0 + t * t)

    def sqrt(self):
        if self.value < 0.0:
            raise ValueError("sqrt: argument must be non-negative")
        r = math.sqrt(self.value)
        # derivative at 0 is taken as 0 (only reached at exact contact points)
        return self._unary(r, 0.5 / r if r > 0.0 else 0.0)


def _val(x) -> float:
    return x.value if isinstance(x, DiffScalar) else float(x)


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def value(x):
    """Strip gradient information: DiffScalar -> float, object array -> float array."""
    if isinstance(x, DiffScalar):
        return x.value
    if isinstance(x, np.ndarray) and x.dtype == object:
        return np.vectorize(_val, otypes=[float])(x)
    return x


def lift(values: Iterable[float], tape: Tape | None = None) -> np.ndarray:
    """Turn ``values`` into independent differentiation variables.

    Returns an object array (same shape as the input) of ``DiffScalar``.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("lift: nothing to lift")
    tape = tape if tape is not None else Tape()
    out = np.empty(arr.shape, dtype=object)
    flat = out.reshape(-1)
    for i, v in enumerate(arr.reshape(-1)):
        flat[i] = DiffScalar(v, tape, (), var_index=tape.n_vars)
        tape.n_vars += 1
    return out


def gradient(output, size: int | None = None) -> np.ndarray:
    """Gradient of ``output`` with respect to every lifted variable of its tape.

    A constant output (plain number) yields a zero vector of length ``size``.
    """
    if not isinstance(output, DiffScalar):
        if size is None:
            raise ValueError("gradient: constant output needs an explicit size")
        return np.zeros(size)
    tape = output.tape
    n = tape.n_vars if size is None else size
    adj = [0.0] * (output.index + 1)
    adj[output.index] = 1.0
    grad = np.zeros(n)
    nodes = tape.nodes
    for i in range(output.index, -1, -1):
        a = adj[i]
        if a == 0.0:
            continue
        node = nodes[i]
        if node.var_index >= 0:
            grad[node.var_index] += a
        for j, d in node.parents:
            adj[j] += a * d
    return grad


def _dispatch(name: str, fallback):
    def op(x):
        if isinstance(x, DiffScalar):
            return getattr(x, name)()
        if isinstance(x, np.ndarray) and x.dtype == object:
            return np.vectorize(lambda e: op(e), otypes=[object])(x)
        return fallback(x)

    op.__name__ = name
    return op


def _np_sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def _np_log(x):
    if np.any(np.asarray(x) <= 0):
        raise ValueError("log: argument must be positive")
    return np.log(x)


tanh = _dispatch("tanh", np.tanh)
sigmoid = _dispatch("sigmoid", _np_sigmoid)
exp = _dispatch("exp", np.exp)
log = _dispatch("log", _np_log)
atan = _dispatch("arctan", np.arctan)
sin = _dispatch("sin", np.sin)
cos = _dispatch("cos", np.cos)
sqrt = _dispatch("sqrt", np.sqrt)


def _lse_min(values: Sequence[float], temperature: float) -> tuple[float, list[float]]:
    m = min(values)
    ws = [math.exp(-(v - m) / temperature) for v in values]
    s = 0.0
    for w in ws:
        s += w
    return m - temperature * math.log(s), [w / s for w in ws]


def smooth_min(xs: Sequence, temperature: float):
    """``-t * log(sum(exp(-x_i / t)))``, evaluated stably; lower bound on ``min(xs)``."""
    if temperature <= 0.0:
        raise ValueError("smooth_min: temperature must be positive")
    xs = list(xs)
    if not xs:
        raise ValueError("smooth_min: empty argument list")
    vals = [_val(x) for x in xs]
    out, weights = _lse_min(vals, temperature)
    tape = next((x.tape for x in xs if isinstance(x, DiffScalar)), None)
    if tape is None:
        return out
    parents = tuple(
        (x.index, w) for x, w in zip(xs, weights) if isinstance(x, DiffScalar)
    )
    return DiffScalar(out, tape, parents)


def smooth_max(xs: Sequence, temperature: float):
    """``t * log(sum(exp(x_i / t)))``; upper bound on ``max(xs)``."""
    if temperature <= 0.0:
        raise ValueError("smooth_max: temperature must be positive")
    xs = list(xs)
    if not xs:
        raise ValueError("smooth_max: empty argument list")
    vals = [-_val(x) for x in xs]
    out, weights = _lse_min(vals, temperature)
    tape = next((x.tape for x in xs if isinstance(x, DiffScalar)), None)
    if tape is None:
        return -out
    parents = tuple(
        (x.index, w) for x, w in zip(xs, weights) if isinstance(x, DiffScalar)
    )
    return DiffScalar(-out, tape, parents)
