"""Reverse-mode automatic differentiation over f64 scalars and dense matrices.

Operations evaluate eagerly and append one node per result to a Tape; each
node stores its input ids and a local vector-Jacobian product. backward()
makes a single reverse sweep over the tape, so the gradient of a scalar root
with respect to every leaf costs one extra pass over the recorded graph.

Values are plain numpy float64 arrays (0-d arrays for scalars). Elementwise
binary ops follow numpy broadcasting; the adjoint of a broadcast input is
summed back to its original shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError

ASIN_CLIP = 1.0 - 1e-12  # asin inputs are clamped to +-ASIN_CLIP; the local
# derivative is taken at the clamped value (subgradient at the domain edge)


def _as_value(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Var:
    """A value recorded on a tape. Shape is fixed at creation."""

    __slots__ = ("tape", "node_id", "value")

    def __init__(self, tape: "Tape", node_id: int, value: np.ndarray):
        self.tape = tape
        self.node_id = node_id
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(id={self.node_id}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(self.tape.constant(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(self.tape.constant(other), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


class Tape:
    """Append-only op record; node ids are topological by construction."""

    def __init__(self):
        self._inputs: list[tuple[int, ...]] = []
        self._vjps: list = []
        self._values: list[np.ndarray] = []

    def __len__(self):
        return len(self._vjps)

    def _append(self, value: np.ndarray, inputs: tuple[int, ...], vjp) -> Var:
        nid = len(self._vjps)
        self._inputs.append(inputs)
        self._vjps.append(vjp)
        self._values.append(value)
        return Var(self, nid, value)

    def leaf(self, value) -> Var:
        """Record an input variable; backward() reports its gradient."""
        return self._append(_as_value(value), (), None)

    def constant(self, value) -> Var:
        """Record a value that is held fixed; structurally the same as a leaf."""
        return self.leaf(value)


def _lift(tape: Tape, x) -> Var:
    if isinstance(x, Var):
        if x.tape is not tape:
            raise ContractError("operands recorded on different tapes")
        return x
    return tape.constant(x)


def _pair(a, b) -> tuple[Var, Var]:
    if isinstance(a, Var):
        return a, _lift(a.tape, b)
    if isinstance(b, Var):
        return _lift(b.tape, a), b
    raise ContractError("at least one operand must be a Var")


def _broadcast_error(a: np.ndarray, b: np.ndarray) -> DimensionError:
    return DimensionError(f"incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum an adjoint back down to the shape of a broadcast operand."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementary operations


def add(a, b) -> Var:
    a, b = _pair(a, b)
    av, bv = a.value, b.value
    try:
        out = av + bv
    except ValueError:
        raise _broadcast_error(av, bv) from None

    def vjp(g):
        return _unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)

    return a.tape._append(out, (a.node_id, b.node_id), vjp)


def sub(a, b) -> Var:
    a, b = _pair(a, b)
    av, bv = a.value, b.value
    try:
        out = av - bv
    except ValueError:
        raise _broadcast_error(av, bv) from None

    def vjp(g):
        return _unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)

    return a.tape._append(out, (a.node_id, b.node_id), vjp)


def mul(a, b) -> Var:
    a, b = _pair(a, b)
    av, bv = a.value, b.value
    try:
        out = av * bv
    except ValueError:
        raise _broadcast_error(av, bv) from None

    def vjp(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return a.tape._append(out, (a.node_id, b.node_id), vjp)


def div(a, b) -> Var:
    a, b = _pair(a, b)
    av, bv = a.value, b.value
    try:
        out = av / bv
    except ValueError:
        raise _broadcast_error(av, bv) from None

    def vjp(g):
        return (_unbroadcast(g / bv, av.shape),
                _unbroadcast(-g * av / (bv * bv), bv.shape))

    return a.tape._append(out, (a.node_id, b.node_id), vjp)


def matmul(a, b) -> Var:
    a, b = _pair(a, b)
    av, bv = a.value, b.value
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise DimensionError(f"matmul shapes {av.shape} and {bv.shape}")

    def vjp(g):
        return g @ bv.T, av.T @ g

    return a.tape._append(av @ bv, (a.node_id, b.node_id), vjp)


def sum_(a: Var, axis=None) -> Var:
    av = a.value
    out = av.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, av.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), av.shape).copy(),)

    return a.tape._append(out, (a.node_id,), vjp)


def mean(a: Var, axis=None) -> Var:
    av = a.value
    n = av.size if axis is None else av.shape[axis]
    out = av.mean(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / n, av.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis) / n, av.shape).copy(),)

    return a.tape._append(out, (a.node_id,), vjp)


def square(a: Var) -> Var:
    av = a.value

    def vjp(g):
        return (g * (2.0 * av),)

    return a.tape._append(av * av, (a.node_id,), vjp)


def exp(a: Var) -> Var:
    out = np.exp(a.value)

    def vjp(g):
        return (g * out,)

    return a.tape._append(out, (a.node_id,), vjp)


def sqrt(a: Var) -> Var:
    out = np.sqrt(a.value)

    def vjp(g):
        return (g * (0.5 / out),)

    return a.tape._append(out, (a.node_id,), vjp)


def sin(a: Var) -> Var:
    av = a.value

    def vjp(g):
        return (g * np.cos(av),)

    return a.tape._append(np.sin(av), (a.node_id,), vjp)


def cos(a: Var) -> Var:
    av = a.value

    def vjp(g):
        return (-g * np.sin(av),)

    return a.tape._append(np.cos(av), (a.node_id,), vjp)


def asin(a: Var) -> Var:
    clipped = np.clip(a.value, -ASIN_CLIP, ASIN_CLIP)

    def vjp(g):
        return (g / np.sqrt(1.0 - clipped * clipped),)

    return a.tape._append(np.arcsin(clipped), (a.node_id,), vjp)


def tanh(a: Var) -> Var:
    out = np.tanh(a.value)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return a.tape._append(out, (a.node_id,), vjp)


def sigmoid(a: Var) -> Var:
    av = a.value
    pos = av >= 0.0
    e = np.exp(np.where(pos, -av, av))  # exp(-|x|), overflow-safe
    out = np.where(pos, 1.0 / (1.0 + e), e / (1.0 + e))

    def vjp(g):
        return (g * out * (1.0 - out),)

    return a.tape._append(out, (a.node_id,), vjp)


def relu(a: Var) -> Var:
    av = a.value

    def vjp(g):
        return (g * (av > 0.0),)

    return a.tape._append(np.maximum(av, 0.0), (a.node_id,), vjp)


def max_with_const(a: Var, c: float) -> Var:
    # subgradient at the tie a == c is 0
    av = a.value

    def vjp(g):
        return (g * (av > c),)

    return a.tape._append(np.maximum(av, c), (a.node_id,), vjp)


def concat(parts, axis: int = 0) -> Var:
    parts = list(parts)
    if not parts or not isinstance(parts[0], Var):
        raise ContractError("concat expects a non-empty sequence of Vars")
    tape = parts[0].tape
    parts = [_lift(tape, p) for p in parts]
    values = [p.value for p in parts]
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        slicer = [slice(None)] * g.ndim
        out = []
        for i in range(len(values)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            out.append(g[tuple(slicer)])
        return tuple(out)

    return tape._append(np.concatenate(values, axis=axis),
                        tuple(p.node_id for p in parts), vjp)


def slice_axis(a: Var, axis: int, start: int, stop: int) -> Var:
    av = a.value
    slicer = [slice(None)] * av.ndim
    slicer[axis] = slice(start, stop)
    slicer = tuple(slicer)

    def vjp(g):
        full = np.zeros_like(av)
        full[slicer] = g
        return (full,)

    return a.tape._append(av[slicer], (a.node_id,), vjp)


# ---------------------------------------------------------------------------
# reverse sweep


class GradientMap:
    """Gradients of one backward() sweep, queryable per leaf."""

    def __init__(self, tape: Tape, adjoints: dict):
        self._tape = tape
        self._adjoints = adjoints

    def wrt(self, var: Var) -> np.ndarray:
        """Gradient for `var`; exact zeros when it is unreachable from the root."""
        g = self._adjoints.get(var.node_id)
        if g is None:
            return np.zeros_like(var.value)
        return g


def backward(root: Var) -> GradientMap:
    """Accumulate adjoints of a scalar root back to every reachable node."""
    if root.value.size != 1:
        raise ContractError(f"backward root must be scalar, got shape {root.value.shape}")
    tape = root.tape
    adjoints: dict[int, np.ndarray] = {root.node_id: np.ones_like(root.value)}
    kept: dict[int, np.ndarray] = {}
    for nid in range(root.node_id, -1, -1):
        g = adjoints.pop(nid, None)
        if g is None:
            continue
        vjp = tape._vjps[nid]
        if vjp is None:
            kept[nid] = g  # leaf or constant: keep its gradient
            continue
        for inp, gi in zip(tape._inputs[nid], vjp(g)):
            prev = adjoints.get(inp)
            adjoints[inp] = gi if prev is None else prev + gi
    return GradientMap(tape, kept)


# ---------------------------------------------------------------------------
# finite-difference checking


@dataclass
class GradCheckReport:
    max_rel_err: float
    worst_leaf: int
    worst_coord: tuple
    ok: bool
    message: str = ""


def grad_check(fn, point, h: float = 1e-6, tol: float = 1e-4) -> GradCheckReport:
    """Compare backward() gradients of fn against central finite differences.

    fn(tape, leaves) must return a scalar Var built from the given leaves.
    point is a sequence of arrays; the relative error per coordinate is
    |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
    """
    point = [_as_value(p) for p in point]

    def value_at(values) -> float:
        tape = Tape()
        leaves = [tape.leaf(v) for v in values]
        return float(fn(tape, leaves).value)

    tape = Tape()
    leaves = [tape.leaf(v) for v in point]
    root = fn(tape, leaves)
    if root.value.size != 1:
        raise ContractError("grad_check target must be scalar-valued")
    grads = backward(root)
    ad = [grads.wrt(leaf) for leaf in leaves]
    if not np.isfinite(root.value) or any(not np.isfinite(g).all() for g in ad):
        return GradCheckReport(np.inf, -1, (), False, "non-finite value or gradient")

    max_err, worst_leaf, worst_coord = 0.0, -1, ()
    for k, p in enumerate(point):
        for idx in np.ndindex(p.shape if p.shape else (1,)):
            coord = idx if p.shape else ()
            plus = [q.copy() for q in point]
            minus = [q.copy() for q in point]
            plus[k][coord] += h
            minus[k][coord] -= h
            fd = (value_at(plus) - value_at(minus)) / (2.0 * h)
            if not np.isfinite(fd):
                return GradCheckReport(np.inf, k, coord, False, "non-finite finite difference")
            g = float(ad[k][coord])
            err = abs(g - fd) / max(1.0, abs(g), abs(fd))
            if err > max_err:
                max_err, worst_leaf, worst_coord = err, k, coord
    return GradCheckReport(max_err, worst_leaf, worst_coord, max_err <= tol)
