"""Dense 2-D reverse-mode automatic differentiation with Glorot init and Adam.

Every value is a float64 matrix; scalars are (1, 1). Operations record
themselves on an implicit tape (a global creation counter), and
``Tensor.backward()`` runs the chain rule in reverse creation order,
accumulating (+=) into ``.grad``. Gradients are zeroed explicitly between
optimizer steps. A tape is single-threaded; independent runs may live in
separate processes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

_TAPE_COUNTER = itertools.count()


def _as_matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ValueError(f"tensors are 2-D, got shape {arr.shape}")
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Sum a gradient back down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    out = grad
    if shape[0] == 1 and grad.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    return out


class Tensor:
    """A dense matrix plus a same-shape gradient accumulator."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward_fn", "_tape_id")

    def __init__(self, values, requires_grad: bool = False, _parents=(), _backward_fn=None):
        self.values = _as_matrix(values)
        self.requires_grad = requires_grad
        # Leaf parameters carry a zeroed accumulator from the start so that
        # parameters disconnected from a loss still report a zero gradient.
        self.grad = np.zeros_like(self.values) if requires_grad and not _parents else None
        self._parents = _parents
        self._backward_fn = _backward_fn
        self._tape_id = next(_TAPE_COUNTER)

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def parameter(values) -> "Tensor":
        return Tensor(values, requires_grad=True)

    @staticmethod
    def constant(values) -> "Tensor":
        return Tensor(values, requires_grad=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0
        elif self.requires_grad:
            self.grad = np.zeros_like(self.values)

    def _accumulate(self, grad: np.ndarray):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += grad

    def _make(self, values, parents, backward_fn) -> "Tensor":
        needs = any(p.requires_grad for p in parents)
        return Tensor(values, requires_grad=needs, _parents=parents,
                      _backward_fn=backward_fn if needs else None)

    # -- backward pass ---------------------------------------------------------

    def backward(self):
        """Reverse-mode pass from a scalar; accumulates into reachable grads."""
        if self.shape != (1, 1):
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")
        visited = set()
        nodes = []
        stack = [self]
        while stack:
            node = stack.pop()
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            nodes.append(node)
            stack.extend(node._parents)
        # Creation order is a topological order, so descending tape ids give a
        # valid reverse traversal regardless of graph shape.
        nodes.sort(key=lambda t: t._tape_id, reverse=True)
        self._accumulate(np.ones((1, 1)))
        for node in nodes:
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    # -- arithmetic primitives ---------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor.constant(other)
        out_vals = self.values + other.values

        def bw(g):
            self._accumulate(_unbroadcast(g, self.shape))
            other._accumulate(_unbroadcast(g, other.shape))

        return self._make(out_vals, (self, other), bw)

    __radd__ = __add__

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor.constant(other)
        out_vals = self.values * other.values

        def bw(g):
            self._accumulate(_unbroadcast(g * other.values, self.shape))
            other._accumulate(_unbroadcast(g * self.values, other.shape))

        return self._make(out_vals, (self, other), bw)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self.scale(-1.0)

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor.constant(other)
        return self + (-other)

    def __rsub__(self, other) -> "Tensor":
        return Tensor.constant(other) + (-self)

    def scale(self, c: float) -> "Tensor":
        c = float(c)

        def bw(g):
            self._accumulate(c * g)

        return self._make(self.values * c, (self,), bw)

    def matmul(self, other: "Tensor") -> "Tensor":
        if self.shape[1] != other.shape[0]:
            raise ValueError(f"matmul shape mismatch: {self.shape} @ {other.shape}")
        out_vals = self.values @ other.values

        def bw(g):
            self._accumulate(g @ other.values.T)
            other._accumulate(self.values.T @ g)

        return self._make(out_vals, (self, other), bw)

    __matmul__ = matmul

    def transpose(self) -> "Tensor":
        def bw(g):
            self._accumulate(g.T)

        return self._make(self.values.T, (self,), bw)

    # -- reductions / reshaping ---------------------------------------------------

    def sum(self) -> "Tensor":
        def bw(g):
            self._accumulate(np.full(self.shape, g[0, 0]))

        return self._make(self.values.sum().reshape(1, 1), (self,), bw)

    def mean_rows(self) -> "Tensor":
        """Column means: (n, d) -> (1, d)."""
        n = self.shape[0]

        def bw(g):
            self._accumulate(np.repeat(g, n, axis=0) / n)

        return self._make(self.values.mean(axis=0, keepdims=True), (self,), bw)

    def gather_rows(self, indices) -> "Tensor":
        idx = np.asarray(indices, dtype=np.intp)
        if idx.ndim != 1:
            raise ValueError("gather_rows expects a 1-D index list")
        if idx.size and (idx.min() < 0 or idx.max() >= self.shape[0]):
            raise IndexError(f"row index out of range for shape {self.shape}")
        out_vals = self.values[idx]

        def bw(g):
            acc = np.zeros_like(self.values)
            np.add.at(acc, idx, g)
            self._accumulate(acc)

        return self._make(out_vals, (self,), bw)

    # -- nonlinearities -------------------------------------------------------------

    def elu(self) -> "Tensor":
        pos = self.values > 0
        out_vals = np.where(pos, self.values, np.expm1(self.values))

        def bw(g):
            self._accumulate(g * np.where(pos, 1.0, out_vals + 1.0))

        return self._make(out_vals, (self,), bw)

    def leaky_relu(self, slope: float = 0.2) -> "Tensor":
        pos = self.values > 0
        out_vals = np.where(pos, self.values, slope * self.values)

        def bw(g):
            self._accumulate(g * np.where(pos, 1.0, slope))

        return self._make(out_vals, (self,), bw)

    def tanh(self) -> "Tensor":
        out_vals = np.tanh(self.values)

        def bw(g):
            self._accumulate(g * (1.0 - out_vals ** 2))

        return self._make(out_vals, (self,), bw)

    def sigmoid(self) -> "Tensor":
        # Stable in both tails.
        out_vals = np.where(self.values >= 0,
                            1.0 / (1.0 + np.exp(-np.abs(self.values))),
                            np.exp(-np.abs(self.values)) / (1.0 + np.exp(-np.abs(self.values))))

        def bw(g):
            self._accumulate(g * out_vals * (1.0 - out_vals))

        return self._make(out_vals, (self,), bw)

    def exp(self) -> "Tensor":
        out_vals = np.exp(self.values)

        def bw(g):
            self._accumulate(g * out_vals)

        return self._make(out_vals, (self,), bw)

    def log(self) -> "Tensor":
        if (self.values <= 0).any():
            raise ValueError("log requires strictly positive entries")
        out_vals = np.log(self.values)

        def bw(g):
            self._accumulate(g / self.values)

        return self._make(out_vals, (self,), bw)

    def clamp(self, lo: float, hi: float) -> "Tensor":
        out_vals = np.clip(self.values, lo, hi)
        inside = (self.values > lo) & (self.values < hi)

        def bw(g):
            self._accumulate(g * inside)

        return self._make(out_vals, (self,), bw)

    # -- row-wise normalizations -------------------------------------------------

    def row_softmax(self) -> "Tensor":
        shifted = self.values - self.values.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        out_vals = e / e.sum(axis=1, keepdims=True)

        def bw(g):
            dot = (g * out_vals).sum(axis=1, keepdims=True)
            self._accumulate(out_vals * (g - dot))

        return self._make(out_vals, (self,), bw)

    def masked_row_softmax(self, mask) -> "Tensor":
        """Softmax over entries where ``mask`` is nonzero; all-masked rows -> 0."""
        m = np.asarray(mask, dtype=bool)
        if m.shape != self.shape:
            raise ValueError(f"mask shape {m.shape} != tensor shape {self.shape}")
        neg = np.where(m, self.values, -np.inf)
        rowmax = neg.max(axis=1, keepdims=True)
        rowmax = np.where(np.isfinite(rowmax), rowmax, 0.0)
        e = np.where(m, np.exp(self.values - rowmax), 0.0)
        denom = e.sum(axis=1, keepdims=True)
        out_vals = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)

        def bw(g):
            dot = (g * out_vals).sum(axis=1, keepdims=True)
            self._accumulate(out_vals * (g - dot))

        return self._make(out_vals, (self,), bw)

    def l2_normalize_rows(self, eps: float = 1e-12) -> "Tensor":
        norms = np.linalg.norm(self.values, axis=1, keepdims=True)
        safe = np.maximum(norms, eps)
        out_vals = self.values / safe

        def bw(g):
            dot = (g * out_vals).sum(axis=1, keepdims=True)
            grad = (g - out_vals * dot) / safe
            grad[norms[:, 0] < eps] = 0.0
            self._accumulate(grad)

        return self._make(out_vals, (self,), bw)


def concat_cols(tensors: list[Tensor]) -> Tensor:
    """Column-wise concatenation: [(n, a), (n, b), ...] -> (n, a+b+...)."""
    if not tensors:
        raise ValueError("concat_cols needs at least one tensor")
    rows = tensors[0].shape[0]
    if any(t.shape[0] != rows for t in tensors):
        raise ValueError("concat_cols requires equal row counts")
    out_vals = np.hstack([t.values for t in tensors])
    offsets = np.cumsum([0] + [t.shape[1] for t in tensors])

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            t._accumulate(g[:, lo:hi])

    needs = any(t.requires_grad for t in tensors)
    return Tensor(out_vals, requires_grad=needs, _parents=tuple(tensors),
                  _backward_fn=bw if needs else None)


def glorot_init(shape: tuple[int, int], rng: np.random.Generator) -> Tensor:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); a trainable leaf."""
    rows, cols = shape
    bound = np.sqrt(6.0 / (rows + cols))
    return Tensor.parameter(rng.uniform(-bound, bound, size=(rows, cols)))


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter list."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], **kwargs) -> "AdamState":
        state = cls(**kwargs)
        state.m = [np.zeros_like(p.values) for p in params]
        state.v = [np.zeros_like(p.values) for p in params]
        return state


def adam_step(params: list[Tensor], state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place."""
    if len(params) != len(state.m):
        raise ValueError("AdamState does not match the parameter list")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad if p.grad is not None else np.zeros_like(p.values)
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p.values -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
