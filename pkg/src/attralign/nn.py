"""Minimal reverse-mode autodiff over dense 2-D float64 arrays.

Every value is a `Tensor2` node in an implicit computation graph; operations
record vector-Jacobian closures, and `backward` replays them in reverse
topological order, accumulating gradients into parameter nodes.  `grad_check`
compares those gradients against central finite differences.
"""

from __future__ import annotations

import numpy as np

from .errors import (ConfigError, DegenerateInputError, FormatError, ShapeError,
                     UsageError)


class Tensor2:
    """A rows x cols matrix node.

    Vectors follow the column convention: 1-D input becomes an (n, 1) column.
    All entries must be finite.
    """

    __slots__ = ("data", "grad", "name", "is_param", "needs_grad", "_parents")

    def __init__(self, data, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.ndim != 2:
            raise ShapeError(f"Tensor2 needs at most 2 dimensions, got {arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise DegenerateInputError("Tensor2 entries must be finite")
        self.data = arr
        self.grad = None
        self.name = name
        self.is_param = False
        self.needs_grad = False
        self._parents = ()

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor2{tag}({self.rows}x{self.cols})"


def _as_tensor(x) -> Tensor2:
    return x if isinstance(x, Tensor2) else Tensor2(x)


def _node(data, parents) -> Tensor2:
    """Internal fast constructor: no finiteness re-check on op outputs."""
    out = Tensor2.__new__(Tensor2)
    out.data = data
    out.grad = None
    out.name = None
    out.is_param = False
    out._parents = tuple((p, vjp) for p, vjp in parents if p.needs_grad)
    out.needs_grad = bool(out._parents)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    out = g
    if shape[0] == 1 and out.shape[0] > 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and out.shape[1] > 1:
        out = out.sum(axis=1, keepdims=True)
    return out


# ---------------------------------------------------------------------------
# forward operations

def matmul(a, b) -> Tensor2:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.cols != b.rows:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    data = a.data @ b.data
    return _node(data, [(a, lambda g, b=b: g @ b.data.T),
                        (b, lambda g, a=a: a.data.T @ g)])


def linear(w, x) -> Tensor2:
    """The affine map w @ x (no bias)."""
    return matmul(w, x)


def concat(a, b, axis: int = 0) -> Tensor2:
    """Stack two tensors; axis 0 is the [a; b] column-vector convention."""
    a, b = _as_tensor(a), _as_tensor(b)
    other = 1 - axis
    if a.shape[other] != b.shape[other]:
        raise ShapeError(f"concat(axis={axis}): {a.shape} vs {b.shape}")
    data = np.concatenate([a.data, b.data], axis=axis)
    na = a.shape[axis]

    def va(g, na=na, axis=axis):
        return g[:na] if axis == 0 else g[:, :na]

    def vb(g, na=na, axis=axis):
        return g[na:] if axis == 0 else g[:, na:]

    return _node(data, [(a, va), (b, vb)])


def mean_rows(m) -> Tensor2:
    m = _as_tensor(m)
    if m.rows == 0:
        raise ShapeError("mean_rows: empty matrix")
    data = m.data.mean(axis=0, keepdims=True)
    r = m.rows
    return _node(data, [(m, lambda g, r=r, c=m.cols: np.broadcast_to(g / r, (r, c)).copy())])


def softmax(x) -> Tensor2:
    """Numerically stable softmax over the last axis.

    Outputs are strictly positive and sum to 1 per row, up to float64
    underflow (an entry trailing the row max by more than ~745 flushes to 0).
    """
    x = _as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def vjp(g, y=y):
        return (g - (g * y).sum(axis=-1, keepdims=True)) * y

    return _node(y, [(x, vjp)])


def elu(x) -> Tensor2:
    x = _as_tensor(x)
    y = np.where(x.data > 0, x.data, np.expm1(x.data))
    return _node(y, [(x, lambda g, x=x, y=y: g * np.where(x.data > 0, 1.0, y + 1.0))])


def relu(x) -> Tensor2:
    x = _as_tensor(x)
    y = np.maximum(x.data, 0.0)
    return _node(y, [(x, lambda g, x=x: g * (x.data > 0))])


def leaky_relu(x, slope: float = 0.2) -> Tensor2:
    x = _as_tensor(x)
    y = np.where(x.data > 0, x.data, slope * x.data)
    return _node(y, [(x, lambda g, x=x, s=slope: g * np.where(x.data > 0, 1.0, s))])


def cosine(x, y) -> Tensor2:
    """Cosine similarity of two equal-shape nonzero vectors, as a 1x1 tensor."""
    x, y = _as_tensor(x), _as_tensor(y)
    if x.shape != y.shape or min(x.shape) != 1:
        raise ShapeError(f"cosine: need two equal-shape vectors, got {x.shape}, {y.shape}")
    nx = float(np.linalg.norm(x.data))
    ny = float(np.linalg.norm(y.data))
    if nx == 0.0 or ny == 0.0:
        raise DegenerateInputError("cosine of a zero vector is undefined")
    c = float((x.data * y.data).sum() / (nx * ny))
    data = np.array([[c]])

    def vx(g, x=x, y=y, nx=nx, ny=ny, c=c):
        return float(g[0, 0]) * (y.data / (nx * ny) - c * x.data / (nx * nx))

    def vy(g, x=x, y=y, nx=nx, ny=ny, c=c):
        return float(g[0, 0]) * (x.data / (nx * ny) - c * y.data / (ny * ny))

    return _node(data, [(x, vx), (y, vy)])


def residual_add(x, y) -> Tensor2:
    """Strict same-shape elementwise sum (skip connection)."""
    x, y = _as_tensor(x), _as_tensor(y)
    if x.shape != y.shape:
        raise ShapeError(f"residual_add: {x.shape} vs {y.shape}")
    return _node(x.data + y.data, [(x, lambda g: g), (y, lambda g: g)])


def add(a, b) -> Tensor2:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: {a.shape} vs {b.shape}") from None
    return _node(data, [(a, lambda g, s=a.shape: _unbroadcast(g, s)),
                        (b, lambda g, s=b.shape: _unbroadcast(g, s))])


def sub(a, b) -> Tensor2:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: {a.shape} vs {b.shape}") from None
    return _node(data, [(a, lambda g, s=a.shape: _unbroadcast(g, s)),
                        (b, lambda g, s=b.shape: _unbroadcast(-g, s))])


def mul(a, b) -> Tensor2:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: {a.shape} vs {b.shape}") from None
    return _node(data, [(a, lambda g, a=a, b=b: _unbroadcast(g * b.data, a.shape)),
                        (b, lambda g, a=a, b=b: _unbroadcast(g * a.data, b.shape))])


def scale(a, c: float) -> Tensor2:
    a = _as_tensor(a)
    return _node(a.data * c, [(a, lambda g, c=c: g * c)])


def transpose(a) -> Tensor2:
    a = _as_tensor(a)
    return _node(a.data.T.copy(), [(a, lambda g: g.T)])


def gather_rows(m, idx) -> Tensor2:
    """Rows of `m` selected by an integer index array (repeats allowed)."""
    m = _as_tensor(m)
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("gather_rows: index must be 1-D")
    if idx.size and (idx.min() < 0 or idx.max() >= m.rows):
        raise ShapeError(f"gather_rows: index out of range for {m.rows} rows")
    data = m.data[idx]

    def vjp(g, m=m, idx=idx):
        out = np.zeros_like(m.data)
        np.add.at(out, idx, g)
        return out

    return _node(data, [(m, vjp)])


def slice_rows(m, start: int, stop: int) -> Tensor2:
    m = _as_tensor(m)
    if not 0 <= start <= stop <= m.rows:
        raise ShapeError(f"slice_rows: [{start}:{stop}] out of range for {m.rows} rows")
    data = m.data[start:stop]

    def vjp(g, m=m, start=start, stop=stop):
        out = np.zeros_like(m.data)
        out[start:stop] = g
        return out

    return _node(data, [(m, vjp)])


def stack_rows(rows) -> Tensor2:
    """Concatenate single-row tensors into one matrix."""
    rows = [_as_tensor(r) for r in rows]
    if not rows:
        raise ShapeError("stack_rows: empty input")
    cols = rows[0].cols
    offsets = []
    off = 0
    for r in rows:
        if r.cols != cols:
            raise ShapeError(f"stack_rows: ragged widths {cols} vs {r.cols}")
        offsets.append(off)
        off += r.rows
    data = np.concatenate([r.data for r in rows], axis=0)
    parents = [(r, (lambda g, o=o, n=r.rows: g[o:o + n])) for r, o in zip(rows, offsets)]
    return _node(data, parents)


def row_sums(m) -> Tensor2:
    m = _as_tensor(m)
    data = m.data.sum(axis=1, keepdims=True)
    return _node(data, [(m, lambda g, c=m.cols: np.broadcast_to(g, (g.shape[0], c)).copy())])


def sum_all(m) -> Tensor2:
    m = _as_tensor(m)
    data = np.array([[m.data.sum()]])
    return _node(data, [(m, lambda g, s=m.shape: np.broadcast_to(g, s).copy())])


def normalize_rows(m, eps: float = 1e-12) -> Tensor2:
    """Scale each row to unit norm; rows with norm <= eps pass through."""
    m = _as_tensor(m)
    norms = np.linalg.norm(m.data, axis=1, keepdims=True)
    safe = np.where(norms > eps, norms, 1.0)
    y = m.data / safe

    def vjp(g, y=y, safe=safe):
        return (g - y * (g * y).sum(axis=1, keepdims=True)) / safe

    return _node(y, [(m, vjp)])


# ---------------------------------------------------------------------------
# backward pass and parameters

def backward(loss: Tensor2) -> None:
    """Accumulate d(loss)/d(param) into every parameter reachable from `loss`.

    `loss` must be a 1x1 tensor produced by the forward ops above.  Gradients
    add into the parameters' `.grad` accumulators; intermediate nodes keep
    nothing.
    """
    if not isinstance(loss, Tensor2):
        raise UsageError("backward expects the Tensor2 produced by a forward pass")
    if loss.shape != (1, 1):
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")

    topo: list[Tensor2] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor2, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_param:
            node.grad += g
        for parent, vjp in node._parents:
            pg = vjp(g)
            acc = grads.get(id(parent))
            if acc is None:
                # copy: identity vjps may alias g, and g may feed other parents
                grads[id(parent)] = np.array(pg)
            else:
                acc += pg


class ParamSet:
    """Named parameters, each with a same-shape gradient accumulator."""

    def __init__(self):
        self._params: dict[str, Tensor2] = {}

    def add(self, name: str, init) -> Tensor2:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        if not name or any(ch.isspace() for ch in name):
            raise ConfigError(f"parameter name {name!r} must be non-empty without whitespace")
        t = Tensor2(init, name=name)
        t.is_param = True
        t.needs_grad = True
        t.grad = np.zeros_like(t.data)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor2:
        if name not in self._params:
            raise ConfigError(f"no parameter named {name!r}")
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def save(self, path) -> None:
        """Checkpoint: '#param <name> <rows> <cols>' then one line per row.

        Floats are written with repr, so a 64-bit reload is bit-exact.
        """
        with open(path, "w", encoding="utf-8") as fh:
            for name, p in self._params.items():
                fh.write(f"#param {name} {p.rows} {p.cols}\n")
                for row in p.data:
                    fh.write(" ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path) -> "ParamSet":
        params = cls()
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        i = 0
        while i < len(lines):
            if not lines[i].strip():
                i += 1
                continue
            fields = lines[i].split()
            if len(fields) != 4 or fields[0] != "#param":
                raise FormatError(f"{path}, line {i + 1}: expected '#param <name> <rows> <cols>'")
            name, rows, cols = fields[1], int(fields[2]), int(fields[3])
            block = lines[i + 1:i + 1 + rows]
            if len(block) != rows:
                raise FormatError(f"{path}: truncated parameter {name!r}")
            data = np.array([[float(x) for x in line.split()] for line in block])
            if data.shape != (rows, cols):
                raise FormatError(f"{path}: parameter {name!r} has shape {data.shape}, "
                                  f"header says ({rows}, {cols})")
            params.add(name, data)
            i += 1 + rows
        return params


def grad_check(f, params: ParamSet, step: float = 1e-5) -> float:
    """Max over parameter entries of |analytic - central difference| / max(1, |cd|).

    `f` maps the ParamSet to a scalar Tensor2 and must be deterministic; it
    is re-evaluated 2 times per parameter entry, so keep instances small.
    """
    if step <= 0:
        raise ConfigError(f"step must be positive, got {step}")

    params.zero_grad()
    out = f(params)
    if not isinstance(out, Tensor2) or out.data.size != 1:
        raise UsageError("grad_check: f must return a scalar Tensor2")
    if not np.isfinite(out.data[0, 0]):
        raise DegenerateInputError("grad_check: f evaluated non-finite")
    backward(out)
    analytic = {name: p.grad.copy() for name, p in params.items()}

    def value() -> float:
        v = f(params).item()
        if not np.isfinite(v):
            raise DegenerateInputError("grad_check: f evaluated non-finite")
        return v

    max_err = 0.0
    for name, p in params.items():
        for idx in np.ndindex(p.data.shape):
            orig = p.data[idx]
            p.data[idx] = orig + step
            f_plus = value()
            p.data[idx] = orig - step
            f_minus = value()
            p.data[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            err = abs(analytic[name][idx] - numeric) / max(1.0, abs(numeric))
            if err > max_err:
                max_err = err
    return max_err
