"""Append-only tape and the ``Var`` handle that records onto it.

Nodes hold numpy arrays (0-d for scalars), so one node can carry a whole
batch of lanes or Monte-Carlo samples. Every node stores, per operand, a
closure mapping the node's cotangent to that operand's cotangent.
"""

import math

import numpy as np

from ..errors import ArityError, NumericalOverflow


class Tape:
    """Recorded computation graph for reverse-mode differentiation.

    Operands always precede their consumers (nodes are appended as they are
    computed), so a backward pass is a single reverse sweep.
    """

    def __init__(self, check_finite=True):
        self.check_finite = check_finite
        self.values = []
        self.edges = []  # per node: tuple of (parent_index, vjp)
        self.ops = []
        self.inputs = None
        self.outputs = None

    def __len__(self):
        return len(self.values)

    def variable(self, value, op="input"):
        value = np.array(value, dtype=np.float64)
        return self._push(value, (), op)

    def _push(self, value, edges, op):
        # a finite sum implies finite entries; only inspect entries otherwise
        if self.check_finite and not math.isfinite(np.add.reduce(value, axis=None)) and not np.isfinite(value).all():
            raise NumericalOverflow(
                f"non-finite value produced by '{op}' at node {len(self.values)}",
                node=len(self.values),
            )
        idx = len(self.values)
        self.values.append(value)
        self.edges.append(edges)
        self.ops.append(op)
        return Var(value, self, idx)

    def push(self, value, parents, op):
        """Append a node. ``parents`` is a sequence of ``(operand, vjp)``;
        operands that are not ``Var`` on this tape are constants and dropped."""
        edges = []
        for p, vjp in parents:
            if isinstance(p, Var):
                if p.tape is not self:
                    raise ValueError("operands recorded on different tapes")
                edges.append((p.idx, vjp))
        if not edges:
            return value
        return self._push(value, tuple(edges), op)

    def backward_from(self, outputs, seeds):
        """Propagate ``seeds`` (one per output node) back through the tape.

        Returns a dict mapping node index to accumulated cotangent. Each node
        touched by the sweep is visited exactly once.
        """
        grads = {}
        top = -1
        for out, seed in zip(outputs, seeds):
            seed = np.asarray(seed, dtype=np.float64)
            if seed.shape != np.shape(out.value):
                seed = np.broadcast_to(seed, np.shape(out.value)).copy()
            if out.idx in grads:
                grads[out.idx] = grads[out.idx] + seed
            else:
                grads[out.idx] = seed
            top = max(top, out.idx)
        edges = self.edges
        for i in range(top, -1, -1):
            g = grads.get(i)
            if g is None:
                continue
            for parent, vjp in edges[i]:
                contrib = vjp(g)
                prev = grads.get(parent)
                grads[parent] = contrib if prev is None else prev + contrib
        return grads

    def gradient(self, output, wrt, seed=1.0):
        """Vector-Jacobian product of ``output`` w.r.t. each Var in ``wrt``.

        Inputs the output does not depend on get exact zeros.
        """
        if not isinstance(output, Var):
            return [np.zeros(np.shape(w.value)) for w in wrt]
        grads = self.backward_from([output], [seed])
        return [
            np.array(grads[w.idx]) if w.idx in grads else np.zeros(np.shape(w.value))
            for w in wrt
        ]


class Var:
    """A value recorded on a tape (the differentiable counterpart of an array)."""

    __slots__ = ("value", "tape", "idx")
    __array_ufunc__ = None  # make numpy defer to our reflected operators

    def __init__(self, value, tape, idx):
        self.value = value
        self.tape = tape
        self.idx = idx

    def __repr__(self):
        return f"Var({self.value!r}, node={self.idx})"

    @property
    def shape(self):
        return np.shape(self.value)

    @property
    def ndim(self):
        return np.ndim(self.value)

    @property
    def T(self):
        from . import ops

        return ops.swapaxes(self, -1, -2)

    def __len__(self):
        return len(self.value)

    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops

        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops

        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops

        return ops.div(other, self)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __pow__(self, exponent):
        from . import ops

        return ops.power(self, exponent)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from . import ops

        return ops.matmul(other, self)

    def __getitem__(self, key):
        from . import ops

        return ops.getitem(self, key)


def value_of(x):
    return x.value if isinstance(x, Var) else x


def record(program, inputs, check_finite=True):
    """Run ``program`` on fresh tape inputs and return ``(outputs, tape)``.

    ``inputs`` is an array or a tuple of arrays; the program receives the
    same structure as Vars. The tape remembers its inputs and outputs so
    :func:`backward` can be called with only a seed.
    """
    tape = Tape(check_finite=check_finite)
    multi = isinstance(inputs, tuple)
    in_vars = tuple(tape.variable(x) for x in inputs) if multi else tape.variable(inputs)
    out = program(*in_vars) if multi else program(in_vars)
    tape.inputs = in_vars if multi else (in_vars,)
    tape.outputs = out
    tape.multi_input = multi
    return np.array(value_of(out), dtype=np.float64), tape


def backward(tape, seed):
    """Vector-Jacobian product ``seed^T J`` for a tape built by :func:`record`."""
    out = tape.outputs
    seed = np.asarray(seed, dtype=np.float64)
    out_shape = np.shape(value_of(out))
    if seed.shape != out_shape and not (seed.size == 1 and out_shape == ()):
        raise ArityError(f"seed shape {seed.shape} does not match output shape {out_shape}")
    seed = seed.reshape(out_shape)
    if isinstance(out, Var):
        grads = tape.backward_from([out], [seed])
    else:
        grads = {}
    res = tuple(
        np.array(grads[v.idx]) if v.idx in grads else np.zeros(v.shape) for v in tape.inputs
    )
    return res if tape.multi_input else res[0]
