"""Reverse-mode automatic differentiation on float64 numpy arrays.

The engine is deliberately small: 2-D tensors, a fixed set of vectorized
operations, and a single backward pass from a scalar loss. Graphs are
recorded as closures on the output tensor; backward releases them as it
consumes them, so a graph supports exactly one backward pass. Calling
backward again without zeroing gradients raises ``GraphError``.

Broadcasting is restricted to the two cases the models need: a scalar
against any tensor, and a row vector ``(1, K)`` against a matrix
``(N, K)``. Anything else raises ``ShapeError`` naming both shapes.

There is no shared mutable module state besides the grad-mode flag, which
is only read at graph construction time; the engine is safe to use from
multiple threads as long as each thread works on its own graph and does
not toggle grad mode concurrently.
"""

import contextlib

import numpy as np

from .errors import DomainError, GraphError, ShapeError

_GRAD_ENABLED = True


def is_grad_enabled():
    return _GRAD_ENABLED


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block.

    Value computation is unchanged: a forward pass under ``no_grad``
    produces bit-identical numbers to a tracked pass.
    """
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A float64 array plus optional gradient bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_consumed")

    # keep numpy from hijacking reflected operators like ndarray + Tensor
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    # -- backward pass ---------------------------------------------------

    def backward(self):
        """Backpropagate from this scalar through the recorded graph.

        Gradients land on ``.grad`` of every reachable leaf tensor with
        ``requires_grad=True``. Interior buffers and closures are released
        as the pass consumes them, so the graph cannot be replayed.
        """
        if self.data.ndim != 0:
            raise GraphError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        if self._consumed:
            raise GraphError("backward called twice on the same graph")

        order = _topological_order(self)
        for node in order:
            if node._backward is None and node.requires_grad and node.grad is not None:
                raise GraphError(
                    "backward called with stale gradients; zero them first"
                )

        grads = {id(self): np.ones((), dtype=np.float64)}
        for node in order:  # already reverse-topological
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
            node._backward = None
            node._parents = ()
            node._consumed = True


def _topological_order(root):
    """Nodes reachable from root, in reverse-topological (root-first) order."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    order.reverse()
    return order


def zero_grad(tensors):
    for t in tensors:
        t.grad = None


def _wrap(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _record(out, parents, backward):
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


# -- broadcasting ---------------------------------------------------------


def _broadcast_ok(sa, sb):
    if sa == sb:
        return True
    if sa == () or sb == ():
        return True
    if len(sa) == 2 and len(sb) == 2 and sa[1] == sb[1]:
        if sa[0] == 1 or sb[0] == 1:
            return True
    return False


def _check_broadcast(a, b, op):
    if not _broadcast_ok(a.data.shape, b.data.shape):
        raise ShapeError(
            f"{op}: shapes {a.data.shape} and {b.data.shape} do not broadcast "
            "(only scalar-with-tensor and row-with-matrix are supported)"
        )


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if shape == ():
        return g.sum()
    # row vector against matrix
    return g.sum(axis=0, keepdims=True)


# -- elementwise binary ops ----------------------------------------------


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "add")
    out = Tensor(a.data + b.data)
    need_a, need_b = a.requires_grad, b.requires_grad
    sa, sb = a.data.shape, b.data.shape

    def backward(g):
        return (
            _unbroadcast(g, sa) if need_a else None,
            _unbroadcast(g, sb) if need_b else None,
        )

    return _record(out, (a, b), backward)


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "sub")
    out = Tensor(a.data - b.data)
    need_a, need_b = a.requires_grad, b.requires_grad
    sa, sb = a.data.shape, b.data.shape

    def backward(g):
        return (
            _unbroadcast(g, sa) if need_a else None,
            _unbroadcast(-g, sb) if need_b else None,
        )

    return _record(out, (a, b), backward)


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "mul")
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def backward(g):
        return (
            _unbroadcast(g * bd, ad.shape) if need_a else None,
            _unbroadcast(g * ad, bd.shape) if need_b else None,
        )

    return _record(out, (a, b), backward)


def div(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "div")
    if np.any(b.data == 0.0):
        raise DomainError("div: denominator contains zero")
    out = Tensor(a.data / b.data)
    bd, od = b.data, out.data
    need_a, need_b = a.requires_grad, b.requires_grad
    sa = a.data.shape

    def backward(g):
        return (
            _unbroadcast(g / bd, sa) if need_a else None,
            _unbroadcast(-g * od / bd, bd.shape) if need_b else None,
        )

    return _record(out, (a, b), backward)


# -- elementwise unary ops -------------------------------------------------


def neg(a):
    a = _wrap(a)
    out = Tensor(-a.data)

    def backward(g):
        return (-g,)

    return _record(out, (a,), backward)


def sin(a):
    a = _wrap(a)
    out = Tensor(np.sin(a.data))
    ad = a.data

    def backward(g):
        return (g * np.cos(ad),)

    return _record(out, (a,), backward)


def cos(a):
    a = _wrap(a)
    out = Tensor(np.cos(a.data))
    ad = a.data

    def backward(g):
        return (-g * np.sin(ad),)

    return _record(out, (a,), backward)


def exp(a):
    a = _wrap(a)
    out = Tensor(np.exp(a.data))
    od = out.data

    def backward(g):
        return (g * od,)

    return _record(out, (a,), backward)


def log(a):
    a = _wrap(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log: input must be strictly positive")
    out = Tensor(np.log(a.data))
    ad = a.data

    def backward(g):
        return (g / ad,)

    return _record(out, (a,), backward)


def sqrt(a):
    a = _wrap(a)
    if np.any(a.data <= 0.0):
        raise DomainError("sqrt: input must be strictly positive")
    out = Tensor(np.sqrt(a.data))
    od = out.data

    def backward(g):
        return (g * (0.5 / od),)

    return _record(out, (a,), backward)


def square(a):
    a = _wrap(a)
    out = Tensor(np.square(a.data))
    ad = a.data

    def backward(g):
        return (g * (2.0 * ad),)

    return _record(out, (a,), backward)


def softplus(a):
    """log(1 + exp(x)), computed stably for large |x|."""
    a = _wrap(a)
    out = Tensor(np.logaddexp(0.0, a.data))
    ad = a.data

    def backward(g):
        # sigmoid via tanh avoids overflow for large negative inputs
        return (g * (0.5 * (1.0 + np.tanh(0.5 * ad))),)

    return _record(out, (a,), backward)


def trig_pair(a):
    """Concatenate cos(x) and sin(x) along axis 1.

    One node instead of three keeps backward free of repeated trig: the
    saved cosine and sine are exactly the derivatives needed.
    """
    a = _wrap(a)
    if a.data.ndim != 2:
        raise ShapeError(f"trig_pair: expected a 2-D input, got {a.data.shape}")
    c = np.cos(a.data)
    s = np.sin(a.data)
    out = Tensor(np.concatenate([c, s], axis=1))
    k = a.data.shape[1]

    def backward(g):
        return (g[:, k:] * c - g[:, :k] * s,)

    return _record(out, (a,), backward)


# -- linear algebra ---------------------------------------------------------


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(
            f"matmul: expected 2-D operands, got {a.data.shape} and {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions differ, {a.data.shape} @ {b.data.shape}"
        )
    out = Tensor(a.data @ b.data)
    ad, bd = a.data, b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def backward(g):
        return (
            g @ bd.T if need_a else None,
            ad.T @ g if need_b else None,
        )

    return _record(out, (a, b), backward)


def block_matmul(a, b, n_blocks):
    """Blockwise matrix product of vertically stacked operands.

    ``a`` stacks ``n_blocks`` matrices of shape (N, K) into (n_blocks*N, K)
    and ``b`` stacks matching (K, M) blocks into (n_blocks*K, M); the result
    stacks the per-block products into (n_blocks*N, M). With ``n_blocks=1``
    this is a plain matmul.
    """
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(
            f"block_matmul: expected 2-D operands, got {a.data.shape} and {b.data.shape}"
        )
    if n_blocks < 1:
        raise ShapeError(f"block_matmul: n_blocks must be >= 1, got {n_blocks}")
    if a.data.shape[0] % n_blocks or b.data.shape[0] % n_blocks:
        raise ShapeError(
            f"block_matmul: row counts {a.data.shape[0]}, {b.data.shape[0]} "
            f"not divisible by n_blocks={n_blocks}"
        )
    n = a.data.shape[0] // n_blocks
    k = b.data.shape[0] // n_blocks
    if a.data.shape[1] != k:
        raise ShapeError(
            f"block_matmul: inner dimensions differ, {a.data.shape} @ "
            f"{b.data.shape} in {n_blocks} blocks"
        )
    m = b.data.shape[1]
    a3 = a.data.reshape(n_blocks, n, k)
    b3 = b.data.reshape(n_blocks, k, m)
    out = Tensor(np.matmul(a3, b3).reshape(n_blocks * n, m))

    need_a, need_b = a.requires_grad, b.requires_grad

    def backward(g):
        g3 = g.reshape(n_blocks, n, m)
        ga = gb = None
        if need_a:
            ga = np.matmul(g3, b3.transpose(0, 2, 1)).reshape(n_blocks * n, k)
        if need_b:
            gb = np.matmul(a3.transpose(0, 2, 1), g3).reshape(n_blocks * k, m)
        return (ga, gb)

    return _record(out, (a, b), backward)


# -- reductions -------------------------------------------------------------


def _check_axis(a, axis, op):
    if axis is None:
        return
    if a.data.ndim == 0 or axis not in (0, 1) or axis >= a.data.ndim:
        raise ShapeError(f"{op}: axis {axis} invalid for shape {a.data.shape}")


def tensor_sum(a, axis=None, keepdims=False):
    a = _wrap(a)
    _check_axis(a, axis, "sum")
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))
    shape = a.data.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _record(out, (a,), backward)


def tensor_mean(a, axis=None, keepdims=False):
    a = _wrap(a)
    _check_axis(a, axis, "mean")
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims))
    shape = a.data.shape
    n = a.data.size if axis is None else shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, shape).copy(),)

    return _record(out, (a,), backward)


# -- shape manipulation ------------------------------------------------------


def concat(tensors, axis=1):
    tensors = [_wrap(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: need at least one tensor")
    if axis not in (0, 1):
        raise ShapeError(f"concat: axis must be 0 or 1, got {axis}")
    other = 1 - axis
    for t in tensors:
        if t.data.ndim != 2:
            raise ShapeError(f"concat: expected 2-D tensors, got {t.data.shape}")
        if t.data.shape[other] != tensors[0].data.shape[other]:
            raise ShapeError(
                f"concat: mismatched shapes {t.data.shape} vs "
                f"{tensors[0].data.shape} along axis {other}"
            )
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)
    needs = [t.requires_grad for t in tensors]

    def backward(g):
        pieces = []
        for i in range(len(sizes)):
            if not needs[i]:
                pieces.append(None)
            elif axis == 0:
                pieces.append(g[offsets[i]:offsets[i + 1], :])
            else:
                pieces.append(g[:, offsets[i]:offsets[i + 1]])
        return tuple(pieces)

    return _record(out, tuple(tensors), backward)


def tile_rows(a, reps):
    """Stack ``reps`` copies of a 2-D tensor vertically."""
    a = _wrap(a)
    if a.data.ndim != 2:
        raise ShapeError(f"tile_rows: expected a 2-D input, got {a.data.shape}")
    if reps < 1:
        raise ShapeError(f"tile_rows: reps must be >= 1, got {reps}")
    n, k = a.data.shape
    out = Tensor(np.tile(a.data, (reps, 1)))

    def backward(g):
        return (g.reshape(reps, n, k).sum(axis=0),)

    return _record(out, (a,), backward)


def repeat_cols(a, reps):
    """Repeat each column of a 2-D tensor ``reps`` times consecutively."""
    a = _wrap(a)
    if a.data.ndim != 2:
        raise ShapeError(f"repeat_cols: expected a 2-D input, got {a.data.shape}")
    if reps < 1:
        raise ShapeError(f"repeat_cols: reps must be >= 1, got {reps}")
    n, k = a.data.shape
    out = Tensor(np.repeat(a.data, reps, axis=1))

    def backward(g):
        return (g.reshape(n, k, reps).sum(axis=2),)

    return _record(out, (a,), backward)


# -- gradient checking -------------------------------------------------------


def gradient_check(f, tensors, h=1e-5, rel_tol=1e-5, abs_floor=1e-8):
    """Compare backward gradients of ``f`` against central differences.

    ``f`` takes no arguments, reads the current ``.data`` of ``tensors``
    and returns a scalar Tensor. Returns the worst relative error seen;
    raises AssertionError when any element exceeds ``rel_tol`` where the
    relative error uses ``max(|analytic|, |numeric|, abs_floor)`` as the
    denominator.
    """
    zero_grad(tensors)
    loss = f()
    loss.backward()
    analytic = [np.array(t.grad, dtype=np.float64, copy=True) for t in tensors]
    worst = 0.0
    for t, ga in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            with no_grad():
                f_plus = f().item()
            flat[i] = orig - h
            with no_grad():
                f_minus = f().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(gflat[i]), abs(numeric), abs_floor)
            rel = abs(gflat[i] - numeric) / denom
            worst = max(worst, rel)
            if rel > rel_tol:
                raise AssertionError(
                    f"gradient mismatch at element {i} of tensor with shape "
                    f"{t.data.shape}: analytic {gflat[i]:.6e}, "
                    f"numeric {numeric:.6e}, rel err {rel:.3e}"
                )
    zero_grad(tensors)
    return worst
