"""Differentiable primitives.

Every function accepts plain numpy arrays or :class:`Var`. With no Var
operand it is exactly the numpy computation, so code written against this
module evaluates bitwise-identically with and without a tape.

Piecewise primitives use the right-hand branch's derivative at breakpoints.
"""

import numpy as np

from .tape import Var


def _v(x):
    return x.value if isinstance(x, Var) else x


def _tape(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    return None


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    g = np.asarray(g)
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _unary(x, out, dfn, op):
    tape = _tape(x)
    if tape is None:
        return out
    return tape.push(out, ((x, dfn),), op)


# ---------------------------------------------------------------- arithmetic


def add(a, b):
    av, bv = _v(a), _v(b)
    out = av + bv
    tape = _tape(a, b)
    if tape is None:
        return out
    sa, sb = np.shape(av), np.shape(bv)
    return tape.push(
        out,
        ((a, lambda g: _unbroadcast(g, sa)), (b, lambda g: _unbroadcast(g, sb))),
        "add",
    )


def sub(a, b):
    av, bv = _v(a), _v(b)
    out = av - bv
    tape = _tape(a, b)
    if tape is None:
        return out
    sa, sb = np.shape(av), np.shape(bv)
    return tape.push(
        out,
        ((a, lambda g: _unbroadcast(g, sa)), (b, lambda g: -_unbroadcast(g, sb))),
        "sub",
    )


def mul(a, b):
    av, bv = _v(a), _v(b)
    out = av * bv
    tape = _tape(a, b)
    if tape is None:
        return out
    sa, sb = np.shape(av), np.shape(bv)
    return tape.push(
        out,
        ((a, lambda g: _unbroadcast(g * bv, sa)), (b, lambda g: _unbroadcast(g * av, sb))),
        "mul",
    )


def div(a, b):
    av, bv = _v(a), _v(b)
    out = av / bv
    tape = _tape(a, b)
    if tape is None:
        return out
    sa, sb = np.shape(av), np.shape(bv)
    return tape.push(
        out,
        (
            (a, lambda g: _unbroadcast(g / bv, sa)),
            (b, lambda g: _unbroadcast(-g * out / bv, sb)),
        ),
        "div",
    )


def neg(x):
    return _unary(x, -_v(x), lambda g: -g, "neg")


def power(x, p):
    """``x ** p`` for a constant exponent."""
    xv = _v(x)
    out = xv**p
    return _unary(x, out, lambda g: g * p * xv ** (p - 1), "pow")


def square(x):
    xv = _v(x)
    return _unary(x, xv * xv, lambda g: 2.0 * g * xv, "square")


# ---------------------------------------------------------------- elementwise


def exp(x):
    out = np.exp(_v(x))
    return _unary(x, out, lambda g: g * out, "exp")


def log(x):
    xv = _v(x)
    return _unary(x, np.log(xv), lambda g: g / xv, "log")


def sqrt(x):
    out = np.sqrt(_v(x))
    return _unary(x, out, lambda g: 0.5 * g / out, "sqrt")


def sin(x):
    xv = _v(x)
    return _unary(x, np.sin(xv), lambda g: g * np.cos(xv), "sin")


def cos(x):
    xv = _v(x)
    return _unary(x, np.cos(xv), lambda g: -g * np.sin(xv), "cos")


def tanh(x):
    out = np.tanh(_v(x))
    return _unary(x, out, lambda g: g * (1.0 - out * out), "tanh")


def elu(x):
    xv = _v(x)
    pos = xv > 0
    neg_part = np.expm1(np.minimum(xv, 0.0))
    out = np.where(pos, xv, neg_part)
    return _unary(x, out, lambda g: g * np.where(pos, 1.0, neg_part + 1.0), "elu")


def softplus(x):
    xv = _v(x)
    out = np.log1p(np.exp(-np.abs(xv))) + np.maximum(xv, 0.0)
    return _unary(x, out, lambda g: g / (1.0 + np.exp(-xv)), "softplus")


def abs(x):  # noqa: A001 - mirrors numpy naming
    xv = _v(x)
    return _unary(x, np.abs(xv), lambda g: g * np.where(xv >= 0, 1.0, -1.0), "abs")


def maximum(a, b):
    av, bv = _v(a), _v(b)
    out = np.maximum(av, bv)
    tape = _tape(a, b)
    if tape is None:
        return out
    take_a = av >= bv
    sa, sb = np.shape(av), np.shape(bv)
    return tape.push(
        out,
        (
            (a, lambda g: _unbroadcast(np.where(take_a, g, 0.0), sa)),
            (b, lambda g: _unbroadcast(np.where(take_a, 0.0, g), sb)),
        ),
        "max",
    )


def minimum(a, b):
    av, bv = _v(a), _v(b)
    out = np.minimum(av, bv)
    tape = _tape(a, b)
    if tape is None:
        return out
    take_a = av < bv
    sa, sb = np.shape(av), np.shape(bv)
    return tape.push(
        out,
        (
            (a, lambda g: _unbroadcast(np.where(take_a, g, 0.0), sa)),
            (b, lambda g: _unbroadcast(np.where(take_a, 0.0, g), sb)),
        ),
        "min",
    )


def clip(x, lo, hi):
    """Clamp to ``[lo, hi]`` with constant bounds."""
    xv = _v(x)
    out = np.clip(xv, lo, hi)
    inside = (xv >= lo) & (xv < hi)
    return _unary(x, out, lambda g: np.where(inside, g, 0.0), "clamp")


def where(cond, a, b):
    """Select by a constant boolean mask."""
    cond = np.asarray(cond, dtype=bool)
    av, bv = _v(a), _v(b)
    out = np.where(cond, av, bv)
    tape = _tape(a, b)
    if tape is None:
        return out
    sa, sb = np.shape(av), np.shape(bv)
    return tape.push(
        out,
        (
            (a, lambda g: _unbroadcast(np.where(cond, g, 0.0), sa)),
            (b, lambda g: _unbroadcast(np.where(cond, 0.0, g), sb)),
        ),
        "where",
    )


def soft_heaviside(x, nu):
    """Piecewise-linear saturation: -1, 2x/nu on ``|x| <= nu/2``, +1."""
    xv = _v(x)
    half = 0.5 * nu
    out = np.where(xv > half, 1.0, np.where(xv < -half, -1.0, 2.0 * xv / nu))
    slope = np.where((xv >= -half) & (xv < half), 2.0 / nu, 0.0)
    return _unary(x, out, lambda g: g * slope, "piecewise")


# ---------------------------------------------------------------- reductions / linear algebra


def _expand_reduced(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        axes = tuple(a % len(shape) for a in axes)
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def sum(x, axis=None, keepdims=False):  # noqa: A001
    xv = _v(x)
    out = np.sum(xv, axis=axis, keepdims=keepdims)
    shape = np.shape(xv)
    return _unary(x, out, lambda g: _expand_reduced(g, shape, axis, keepdims), "sum")


def mean(x, axis=None, keepdims=False):
    xv = _v(x)
    n = np.size(xv) if axis is None else np.prod([np.shape(xv)[a] for a in np.atleast_1d(axis)])
    return div(sum(x, axis=axis, keepdims=keepdims), float(n))


def dot(a, b):
    """Inner product over the last axis (batched)."""
    av, bv = _v(a), _v(b)
    out = np.sum(av * bv, axis=-1)
    tape = _tape(a, b)
    if tape is None:
        return out
    sa, sb = np.shape(av), np.shape(bv)
    return tape.push(
        out,
        (
            (a, lambda g: _unbroadcast(np.expand_dims(g, -1) * bv, sa)),
            (b, lambda g: _unbroadcast(np.expand_dims(g, -1) * av, sb)),
        ),
        "dot",
    )


def matvec(A, x):
    """``A @ x`` over the last axes, with batch broadcasting."""
    Av, xv = _v(A), _v(x)
    out = np.matmul(Av, xv[..., None])[..., 0]
    tape = _tape(A, x)
    if tape is None:
        return out
    sA, sx = np.shape(Av), np.shape(xv)
    return tape.push(
        out,
        (
            (A, lambda g: _unbroadcast(g[..., :, None] * xv[..., None, :], sA)),
            (x, lambda g: _unbroadcast(np.matmul(np.swapaxes(Av, -1, -2), g[..., None])[..., 0], sx)),
        ),
        "matvec",
    )


def matmul(a, b):
    av, bv = _v(a), _v(b)
    out = np.matmul(av, bv)
    tape = _tape(a, b)
    if tape is None:
        return out
    a1, b1 = np.ndim(av) == 1, np.ndim(bv) == 1
    A = av[None, :] if a1 else av
    B = bv[:, None] if b1 else bv
    sa, sb = np.shape(av), np.shape(bv)

    def lift(g):
        if a1 and b1:
            return np.reshape(g, (1, 1))
        if a1:
            return g[..., None, :]
        if b1:
            return g[..., :, None]
        return g

    def grad_a(g):
        ga = np.matmul(lift(g), np.swapaxes(B, -1, -2))
        if a1:
            ga = ga[..., 0, :]
        return _unbroadcast(ga, sa)

    def grad_b(g):
        gb = np.matmul(np.swapaxes(A, -1, -2), lift(g))
        if b1:
            gb = gb[..., 0]
        return _unbroadcast(gb, sb)

    return tape.push(out, ((a, grad_a), (b, grad_b)), "matmul")


def solve(A, b):
    """Solve ``A x = b`` for vector right-hand sides ``b`` of shape (..., n)."""
    Av, bv = _v(A), _v(b)
    out = np.linalg.solve(Av, bv[..., None])[..., 0]
    tape = _tape(A, b)
    if tape is None:
        return out
    sA, sb = np.shape(Av), np.shape(bv)
    AT = np.swapaxes(Av, -1, -2)

    def adj(g):
        return np.linalg.solve(AT, g[..., None])[..., 0]

    return tape.push(
        out,
        (
            (A, lambda g: _unbroadcast(-adj(g)[..., :, None] * out[..., None, :], sA)),
            (b, lambda g: _unbroadcast(adj(g), sb)),
        ),
        "solve",
    )


def norm(x, axis=-1):
    return sqrt(sum(square(x), axis=axis))


# ---------------------------------------------------------------- structure


def _basic_key(key):
    items = key if isinstance(key, tuple) else (key,)
    return all(k is None or k is Ellipsis or isinstance(k, (int, np.integer, slice)) for k in items)


def getitem(x, key):
    xv = _v(x)
    out = xv[key]
    tape = _tape(x)
    if tape is None:
        return out
    shape = np.shape(xv)
    basic = _basic_key(key)

    def vjp(g):
        z = np.zeros(shape)
        if basic:
            z[key] = g
        else:
            np.add.at(z, key, g)
        return z

    return tape.push(out, ((x, vjp),), "getitem")


def reshape(x, shape):
    xv = _v(x)
    old = np.shape(xv)
    return _unary(x, np.reshape(xv, shape), lambda g: np.reshape(g, old), "reshape")


def swapaxes(x, a1, a2):
    return _unary(x, np.swapaxes(_v(x), a1, a2), lambda g: np.swapaxes(g, a1, a2), "swapaxes")


def expand_dims(x, axis):
    xv = _v(x)
    old = np.shape(xv)
    return _unary(x, np.expand_dims(xv, axis), lambda g: np.reshape(g, old), "expand_dims")


def broadcast_to(x, shape):
    xv = _v(x)
    old = np.shape(xv)
    return _unary(x, np.broadcast_to(xv, shape), lambda g: _unbroadcast(g, old), "broadcast")


def stack(xs, axis=0):
    vals = [_v(x) for x in xs]
    out = np.stack(vals, axis=axis)
    tape = _tape(*xs)
    if tape is None:
        return out
    parents = []
    for i, x in enumerate(xs):
        shape = np.shape(vals[i])
        parents.append((x, lambda g, i=i, shape=shape: _unbroadcast(np.take(g, i, axis=axis), shape)))
    return tape.push(out, tuple(parents), "stack")


def concatenate(xs, axis=-1):
    vals = [_v(x) for x in xs]
    out = np.concatenate(vals, axis=axis)
    tape = _tape(*xs)
    if tape is None:
        return out
    ax = axis % out.ndim
    bounds = np.cumsum([0] + [np.shape(v)[ax] for v in vals])
    parents = []
    for i, x in enumerate(xs):
        lo, hi = int(bounds[i]), int(bounds[i + 1])
        idx = (slice(None),) * ax + (slice(lo, hi),)
        parents.append((x, lambda g, idx=idx: g[idx]))
    return tape.push(out, tuple(parents), "concat")


def stop_gradient(x):
    """Forward-transparent, gradient-blocking: returns the value as a constant."""
    return _v(x)
