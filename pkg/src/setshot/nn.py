"""Minimal differentiable core on float64 numpy arrays.

A small reverse-mode tape in the micrograd style, but operating on whole
arrays instead of scalars. Only the operations needed by the training
objectives live here: linear maps, a one-hidden-layer ReLU MLP, row L2
normalization, log-sum-exp, and a handful of structural ops (interleave,
gather-sum). Every gradient is covered by the central finite-difference
checker at the bottom of the module.
"""

from __future__ import annotations

import json
from typing import Callable, Iterable, Sequence

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Array node in the computation tape.

    `data` is always float64. `grad` is allocated lazily during backward and
    accumulates across backward calls until `zero_grad` is called.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 _parents: tuple = (), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self) -> None:
        """Reverse-mode pass from a scalar loss.

        Gradients accumulate into the `grad` buffers of every tensor that
        participated in the forward computation.
        """
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss, got shape %s"
                             % (self.data.shape,))
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # Operator sugar; scalars are wrapped as constant tensors.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other)))

    def __rsub__(self, other):
        return add(_as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def parameter(data, rng: np.random.Generator | None = None) -> Tensor:
    """Trainable leaf tensor."""
    t = Tensor(data, requires_grad=True)
    t.zero_grad()
    return t


def init_uniform(shape: tuple[int, ...], fan_in: int,
                 rng: np.random.Generator) -> Tensor:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return parameter(rng.uniform(-bound, bound, size=shape))


# ---------------------------------------------------------------------------
# Primitive ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def neg(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(-g)

    return Tensor(-a.data, _parents=(a,), _backward=backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        a._accumulate(g * c)

    return Tensor(a.data * c, _parents=(a,), _backward=backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands, got %s and %s"
                         % (a.data.shape, b.data.shape))
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError("matmul dimension mismatch: %s @ %s"
                         % (a.data.shape, b.data.shape))
    out_data = a.data @ b.data

    def backward(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def transpose(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g.T)

    return Tensor(a.data.T, _parents=(a,), _backward=backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g):
        a._accumulate(g * mask)

    return Tensor(a.data * mask, _parents=(a,), _backward=backward)


def tsum(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(np.full_like(a.data, float(g)))

    return Tensor(a.data.sum(), _parents=(a,), _backward=backward)


def tmean(a: Tensor) -> Tensor:
    size = a.data.size

    def backward(g):
        a._accumulate(np.full_like(a.data, float(g) / size))

    return Tensor(a.data.mean(), _parents=(a,), _backward=backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.data.shape

    def backward(g):
        a._accumulate(g.reshape(old))

    return Tensor(a.data.reshape(shape), _parents=(a,), _backward=backward)


def logsumexp_rows(a: Tensor) -> Tensor:
    """Row-wise log(sum(exp(x))) of a 2-D tensor, max-shifted. Returns (n,)."""
    m = a.data.max(axis=1, keepdims=True)
    shifted = np.exp(a.data - m)
    sums = shifted.sum(axis=1, keepdims=True)
    out_data = (m + np.log(sums)).reshape(-1)
    softmax = shifted / sums

    def backward(g):
        a._accumulate(softmax * g[:, None])

    return Tensor(out_data, _parents=(a,), _backward=backward)


def take_pairs(a: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Elements a[rows[i], cols[i]] as a vector."""
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    out_data = a.data[rows, cols]

    def backward(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, (rows, cols), g)
        a._accumulate(buf)

    return Tensor(out_data, _parents=(a,), _backward=backward)


def gather_sum(a: Tensor, idx: np.ndarray) -> Tensor:
    """Row sums over index groups: out[i] = sum_j a[idx[i, j]].

    `idx` is (groups, members); output is (groups, dims). The backward pass
    scatter-adds each group gradient into its member rows.
    """
    idx = np.asarray(idx, dtype=np.intp)
    out_data = a.data[idx].sum(axis=1)
    members = idx.shape[1]

    def backward(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx.ravel(), np.repeat(g, members, axis=0))
        a._accumulate(buf)

    return Tensor(out_data, _parents=(a,), _backward=backward)


def interleave_rows(a: Tensor, b: Tensor) -> Tensor:
    """Alternate rows of two equally shaped matrices: a0, b0, a1, b1, ..."""
    if a.data.shape != b.data.shape:
        raise ValueError("interleave_rows expects equal shapes")
    n, d = a.data.shape
    out_data = np.empty((2 * n, d))
    out_data[0::2] = a.data
    out_data[1::2] = b.data

    def backward(g):
        a._accumulate(g[0::2])
        b._accumulate(g[1::2])

    return Tensor(out_data, _parents=(a, b), _backward=backward)


NORM_EPS = 1e-12


def l2_normalize_rows(a: Tensor) -> Tensor:
    """Divide each row by max(||row||_2, 1e-12).

    Through the clamp the norm is treated as the constant 1e-12, so
    (near-)zero rows pass gradients straight through, scaled.
    """
    if a.data.ndim == 1:
        a = reshape(a, (1, a.data.size))
    norms = np.linalg.norm(a.data, axis=1, keepdims=True)
    clamped = np.maximum(norms, NORM_EPS)
    out_data = a.data / clamped
    free = norms > NORM_EPS

    def backward(g):
        dot = (g * out_data).sum(axis=1, keepdims=True)
        grad_free = (g - out_data * dot) / clamped
        grad_clamped = g / clamped
        a._accumulate(np.where(free, grad_free, grad_clamped))

    return Tensor(out_data, _parents=(a,), _backward=backward)


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

def linear_forward(w: Tensor, x: Tensor) -> Tensor:
    """x @ w with a shape check; the trainable map of the graph encoder."""
    return matmul(x, w)


class MlpProjector:
    """One-hidden-layer ReLU MLP: relu(x W1 + b1) W2 + b2."""

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int,
                 rng: np.random.Generator):
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        self.out_dim = out_dim
        self.w1 = init_uniform((in_dim, hidden_dim), in_dim, rng)
        self.b1 = init_uniform((hidden_dim,), in_dim, rng)
        self.w2 = init_uniform((hidden_dim, out_dim), hidden_dim, rng)
        self.b2 = init_uniform((out_dim,), hidden_dim, rng)

    def parameters(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]

    def __call__(self, x: Tensor) -> Tensor:
        return mlp_forward(self, x)


def mlp_forward(p: MlpProjector, x: Tensor) -> Tensor:
    x = _as_tensor(x)
    if x.data.shape[-1] != p.in_dim:
        raise ValueError("mlp_forward expects %d input columns, got %d"
                         % (p.in_dim, x.data.shape[-1]))
    squeeze = x.data.ndim == 1
    if squeeze:
        x = reshape(x, (1, x.data.size))
    h = relu(add(matmul(x, p.w1), p.b1))
    out = add(matmul(h, p.w2), p.b2)
    if squeeze:
        out = reshape(out, (p.out_dim,))
    return out


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

class Adam:
    """Bias-corrected Adam. Gradients are not cleared by step()."""

    def __init__(self, params: Sequence[Tensor], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def finite_difference_check(loss_fn: Callable[[], Tensor],
                            params: Iterable[Tensor],
                            step: float = 1e-5) -> float:
    """Max scale-clamped relative error of reverse-mode vs central differences.

    `loss_fn` must recompute the scalar loss from the parameters' current
    data. The error for one coordinate is |fd - ad| / max(|fd|, |ad|, 1).
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data):
        raise ValueError("loss is not finite")
    loss.backward()
    analytic = [np.array(p.grad, copy=True) for p in params]
    max_err = 0.0
    for p, ad in zip(params, analytic):
        flat = p.data.reshape(-1)
        ad_flat = ad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = float(loss_fn().data)
            flat[i] = orig - step
            lo = float(loss_fn().data)
            flat[i] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise ValueError("loss is not finite during perturbation")
            fd = (hi - lo) / (2.0 * step)
            err = abs(fd - ad_flat[i]) / max(abs(fd), abs(ad_flat[i]), 1.0)
            max_err = max(max_err, err)
    return max_err


# ---------------------------------------------------------------------------
# Checkpoints: one JSON header line, then little-endian float32 payloads
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "setshot-tensors-v1"


def save_tensors(path, named: dict[str, np.ndarray]) -> None:
    header = {
        "format": CHECKPOINT_FORMAT,
        "dtype": "<f4",
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in named.items()],
    }
    with open(path, "wb") as f:
        f.write((json.dumps(header) + "\n").encode("utf-8"))
        for v in named.values():
            f.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def load_tensors(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: not a tensor checkpoint") from exc
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unknown checkpoint format")
        payload = f.read()
    out: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        block = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        if block.size != count:
            raise ValueError(f"{path}: truncated payload for {entry['name']}")
        out[entry["name"]] = block.reshape(shape).astype(np.float64)
        offset += count * 4
    return out
