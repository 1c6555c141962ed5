"""Tape-based reverse-mode differentiation over 2-D float64 arrays.

Every value on the tape is a 2-D array (scalars are 1x1).  Nodes are
recorded in creation order, which is a valid topological order, so the
backward pass is a single reverse sweep.  Each primitive stores its local
vector-Jacobian products as closures.

Gradients w.r.t. exponential-grading bases are obtained by writing
``base**q`` as ``exp(q * ln(base))`` on the tape, so the grade derivative
is exactly ``base**q * ln(base)``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, NonFinite, NotScalarRoot


class Node:
    """One recorded value plus the local backward rules to its parents."""

    __slots__ = ("value", "parents", "vjps", "grad")

    def __init__(self, value: np.ndarray, parents=(), vjps=()):
        self.value = value
        self.parents = parents
        self.vjps = vjps
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    # Operator sugar covers the common arithmetic; everything else is a
    # module-level function.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


class Tape:
    """Recording context: ordered node list plus named parameter leaves.

    Single-threaded during recording and backward; independent tapes may
    run concurrently.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, Node] = {}

    def record(self, node: Node) -> Node:
        self.nodes.append(node)
        return node

    def param(self, name: str, value) -> Node:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        node = self.record(Node(_as2d(value)))
        self.params[name] = node
        return node

    def constant(self, value) -> Node:
        return self.record(Node(_as2d(value)))

    def backward(self, root: Node) -> dict[str, np.ndarray]:
        """Gradients of a scalar root w.r.t. all registered leaves.

        Unused leaves get zero gradients, so every registered leaf has a
        populated adjoint afterwards.
        """
        if root.value.shape != (1, 1):
            raise NotScalarRoot(f"root has shape {root.value.shape}")
        for node in self.nodes:
            node.grad = None
        root.grad = np.ones((1, 1))
        for node in reversed(self.nodes):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in zip(node.parents, node.vjps):
                contrib = vjp(g)
                if parent.grad is None:
                    parent.grad = contrib.copy()
                else:
                    parent.grad += contrib
        out = {}
        for name, leaf in self.params.items():
            out[name] = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
        return out


_ACTIVE: list[Tape] = []


def _tape() -> Tape:
    if not _ACTIVE:
        raise RuntimeError("no active tape; wrap computation in `with recording(tape):`")
    return _ACTIVE[-1]


class recording:
    """Context manager activating a tape for the ops below."""

    def __init__(self, tape: Tape):
        self.tape = tape

    def __enter__(self) -> Tape:
        _ACTIVE.append(self.tape)
        return self.tape

    def __exit__(self, *exc):
        _ACTIVE.pop()
        return False


def _as2d(value) -> np.ndarray:
    a = np.asarray(value, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    elif a.ndim != 2:
        raise DimensionMismatch(f"tape values must be scalar/1-D/2-D, got {a.ndim}-D")
    return a


def wrap(x) -> Node:
    """Lift a plain array (or pass a Node through) onto the active tape."""
    if isinstance(x, Node):
        return x
    return _tape().constant(x)


def _rec(value, parents, vjps) -> Node:
    return _tape().record(Node(value, tuple(parents), tuple(vjps)))


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Node:
    a, b = wrap(a), wrap(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"add: {a.shape} vs {b.shape}")
    return _rec(a.value + b.value, (a, b), (lambda g: g, lambda g: g))


def sub(a, b) -> Node:
    a, b = wrap(a), wrap(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"sub: {a.shape} vs {b.shape}")
    return _rec(a.value - b.value, (a, b), (lambda g: g, lambda g: -g))


def mul(a, b) -> Node:
    """Elementwise product of same-shape nodes."""
    a, b = wrap(a), wrap(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"mul: {a.shape} vs {b.shape}")
    av, bv = a.value, b.value
    return _rec(av * bv, (a, b), (lambda g: g * bv, lambda g: g * av))


def scale(a, c: float) -> Node:
    a = wrap(a)
    c = float(c)
    return _rec(a.value * c, (a,), (lambda g: g * c,))


def scale_by(a, s) -> Node:
    """Multiply by a 1x1 scalar node (broadcast over all entries)."""
    a, s = wrap(a), wrap(s)
    if s.shape != (1, 1):
        raise DimensionMismatch(f"scale_by expects 1x1 scalar, got {s.shape}")
    av, sv = a.value, s.value
    return _rec(
        av * sv,
        (a, s),
        (lambda g: g * sv, lambda g: np.array([[np.sum(g * av)]])),
    )


def add_rowvec(x, b) -> Node:
    """x + b with b a 1xd row broadcast over the rows of x."""
    x, b = wrap(x), wrap(b)
    if b.shape != (1, x.shape[1]):
        raise DimensionMismatch(f"add_rowvec: {x.shape} vs {b.shape}")
    return _rec(
        x.value + b.value,
        (x, b),
        (lambda g: g, lambda g: g.sum(axis=0, keepdims=True)),
    )


def scale_cols(x, w) -> Node:
    """Scale column j of x by w[0, j]; w may itself be a node (learnable)."""
    x, w = wrap(x), wrap(w)
    if w.shape != (1, x.shape[1]):
        raise DimensionMismatch(f"scale_cols: {x.shape} vs {w.shape}")
    xv, wv = x.value, w.value
    return _rec(
        xv * wv,
        (x, w),
        (lambda g: g * wv, lambda g: (g * xv).sum(axis=0, keepdims=True)),
    )


def matmul(a, b) -> Node:
    a, b = wrap(a), wrap(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"matmul: {a.shape} x {b.shape}")
    av, bv = a.value, b.value
    return _rec(av @ bv, (a, b), (lambda g: g @ bv.T, lambda g: av.T @ g))


def transpose(a) -> Node:
    a = wrap(a)
    return _rec(a.value.T.copy(), (a,), (lambda g: g.T,))


def relu(a) -> Node:
    a = wrap(a)
    mask = a.value > 0
    return _rec(np.where(mask, a.value, 0.0), (a,), (lambda g: g * mask,))


def exp(a) -> Node:
    a = wrap(a)
    ev = np.exp(a.value)
    return _rec(ev, (a,), (lambda g: g * ev,))


def log(a) -> Node:
    a = wrap(a)
    av = a.value
    with np.errstate(invalid="ignore", divide="ignore"):  # NaN flows to NonFinite checks
        lv = np.log(av)
    return _rec(lv, (a,), (lambda g: g / av,))


def sigmoid(a) -> Node:
    a = wrap(a)
    s = 1.0 / (1.0 + np.exp(-a.value))
    return _rec(s, (a,), (lambda g: g * s * (1.0 - s),))


def absolute(a) -> Node:
    a = wrap(a)
    sgn = np.sign(a.value)
    return _rec(np.abs(a.value), (a,), (lambda g: g * sgn,))


def clip_low(a, lo: float) -> Node:
    """max(a, lo); gradient passes only through unclipped entries."""
    a = wrap(a)
    mask = a.value >= lo
    return _rec(np.maximum(a.value, lo), (a,), (lambda g: g * mask,))


def sum_all(a) -> Node:
    a = wrap(a)
    shape = a.shape
    return _rec(
        np.array([[a.value.sum()]]),
        (a,),
        (lambda g: np.full(shape, g[0, 0]),),
    )


def softmax_rows(x) -> Node:
    """Row softmax with per-row max subtraction (matches tensor.softmax_rows)."""
    x = wrap(x)
    shifted = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (g * p).sum(axis=1, keepdims=True)
        return p * (g - dot)

    return _rec(p, (x,), (vjp,))


def normalize_rows(x) -> Node:
    """Scale each row to unit Euclidean norm; zero rows are an error."""
    from .errors import ZeroAfterGrading

    x = wrap(x)
    norms = np.linalg.norm(x.value, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroAfterGrading("cannot normalize a zero row")
    y = x.value / norms

    def vjp(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        return (g - y * dot) / norms

    return _rec(y, (x,), (vjp,))


def layer_norm_rows(x, gamma, beta, eps: float) -> Node:
    """Row-wise (z - mean)/sqrt(var + eps) * gamma + beta."""
    x, gamma, beta = wrap(x), wrap(gamma), wrap(beta)
    d = x.shape[1]
    if gamma.shape != (1, d) or beta.shape != (1, d):
        raise DimensionMismatch("layer_norm_rows: gamma/beta must be 1xd")
    mu = x.value.mean(axis=1, keepdims=True)
    var = ((x.value - mu) ** 2).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.value - mu) * inv
    gv = gamma.value

    def vjp_x(g):
        gh = g * gv
        return (gh - gh.mean(axis=1, keepdims=True)
                - xhat * (gh * xhat).mean(axis=1, keepdims=True)) * inv

    return _rec(
        xhat * gv + beta.value,
        (x, gamma, beta),
        (
            vjp_x,
            lambda g: (g * xhat).sum(axis=0, keepdims=True),
            lambda g: g.sum(axis=0, keepdims=True),
        ),
    )


def embedding_rows(table, ids: Sequence[int]) -> Node:
    """Gather rows of an embedding table; backward scatter-adds."""
    table = wrap(table)
    idx = np.asarray(ids, dtype=np.int64)
    shape = table.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return out

    return _rec(table.value[idx], (table,), (vjp,))


def hstack(parts: Sequence[Node]) -> Node:
    parts = [wrap(p) for p in parts]
    widths = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)
    vjps = [
        (lambda a, b: (lambda g: g[:, a:b]))(offsets[i], offsets[i + 1])
        for i in range(len(parts))
    ]
    return _rec(np.hstack([p.value for p in parts]), tuple(parts), tuple(vjps))


def graded_relu_op(x, grades, sign_preserving: bool = False) -> Node:
    """Componentwise |x|**(1/q), optionally gated to positive inputs.

    grades is a constant 1xd row (q_i > 0) broadcast over rows of x.
    Subgradient at 0 is 0.
    """
    x = wrap(x)
    q = _as2d(grades)
    inv_q = np.broadcast_to(1.0 / q, x.shape)
    ax = np.abs(x.value)
    nonzero = ax > 0
    safe = np.where(nonzero, ax, 1.0)  # keeps 0**negative out of the pow
    powed = np.where(nonzero, safe**inv_q, 0.0)
    slope = np.where(nonzero, inv_q * safe ** (inv_q - 1.0), 0.0)
    if sign_preserving:
        pos = x.value > 0
        val = np.where(pos, powed, 0.0)
        deriv = np.where(pos, slope, 0.0)
    else:
        val = powed
        deriv = slope * np.sign(x.value)
    return _rec(val, (x,), (lambda g: g * deriv,))


def exp_activation_op(x, grades) -> Node:
    """Componentwise exp(x/q) - 1 with constant grades q_i > 0."""
    x = wrap(x)
    q = _as2d(grades)
    e = np.exp(x.value / q)
    return _rec(e - 1.0, (x,), (lambda g: g * e / q,))


def pow_base(base: float, q) -> Node:
    """base**q as exp(q * ln base); grade derivative is base**q * ln(base)."""
    if base <= 0:
        raise ValueError("pow_base requires a positive base")
    return exp(scale(wrap(q), float(np.log(base))))


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(
    f: Callable[[dict[str, Node]], Node],
    point: dict[str, np.ndarray],
    h: float = 1e-5,
    sample: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error between tape gradients and central differences.

    `f` builds a scalar node from named parameter nodes.  The caller must
    keep the point away from activation kinks.  When `sample` is given,
    only that many randomly chosen coordinates per parameter are probed
    (all coordinates of parameters with <= sample entries are checked).
    """
    point = {k: _as2d(v) for k, v in point.items()}
    tape = Tape()
    with recording(tape):
        nodes = {k: tape.param(k, v) for k, v in point.items()}
        root = f(nodes)
    grads = tape.backward(root)

    def eval_at(p):
        t = Tape()
        with recording(t):
            val = f({k: t.constant(v) for k, v in p.items()}).value[0, 0]
        if not np.isfinite(val):
            raise NonFinite("function value is not finite at probe point")
        return val

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, arr in point.items():
        flat_ids = np.arange(arr.size)
        if sample is not None and arr.size > sample:
            flat_ids = rng.choice(arr.size, size=sample, replace=False)
        for fid in flat_ids:
            i, j = divmod(int(fid), arr.shape[1])
            probe = {k: v.copy() for k, v in point.items()}
            probe[name][i, j] = arr[i, j] + h
            f_plus = eval_at(probe)
            probe[name][i, j] = arr[i, j] - h
            f_minus = eval_at(probe)
            central = (f_plus - f_minus) / (2.0 * h)
            analytic = grads[name][i, j]
            rel = abs(analytic - central) / (abs(central) + 1e-8)
            worst = max(worst, rel)
    return worst
