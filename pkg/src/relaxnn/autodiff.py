"""Reverse-mode automatic differentiation on an append-only tape.

Every node caches a float64 value (a 0-d array for scalars, or an array for a
batch of collocation points). Elementwise primitives broadcast like numpy; the
backward pass sums gradients back down to each operand's shape.

Example
-------
>>> tape = Tape()
>>> w = tape.leaf(0.5, trainable=True)
>>> y = (w * 4.0).tanh().square()
>>> grads = tape.backward(y)
>>> float(grads[w.index])  # doctest: +ELLIPSIS
0.31...
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

ELEMENTWISE_ARITY = {
    "add": 2,
    "sub": 2,
    "mul": 2,
    "div": 2,
    "neg": 1,
    "square": 1,
    "tanh": 1,
}
# Batch plumbing: matrix product, reductions and output-column selection.
STRUCTURAL_ARITY = {"matmul": 2, "sum": 1, "mean": 1, "column": 1}
ARITY = {**ELEMENTWISE_ARITY, **STRUCTURAL_ARITY}


class TapeError(ValueError):
    """Raised for malformed tape operations (bad arity, foreign nodes)."""


@dataclass(frozen=True)
class Node:
    """Handle to one tape entry. Arithmetic operators record new nodes."""

    tape: Tape
    index: int

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.index]

    def __float__(self) -> float:
        return float(self.value)

    def _lift(self, other) -> Node:
        if isinstance(other, Node):
            return other
        return self.tape.leaf(other)

    def __add__(self, other) -> Node:
        return self.tape.apply("add", [self, self._lift(other)])

    def __radd__(self, other) -> Node:
        return self.tape.apply("add", [self._lift(other), self])

    def __sub__(self, other) -> Node:
        return self.tape.apply("sub", [self, self._lift(other)])

    def __rsub__(self, other) -> Node:
        return self.tape.apply("sub", [self._lift(other), self])

    def __mul__(self, other) -> Node:
        return self.tape.apply("mul", [self, self._lift(other)])

    def __rmul__(self, other) -> Node:
        return self.tape.apply("mul", [self._lift(other), self])

    def __truediv__(self, other) -> Node:
        return self.tape.apply("div", [self, self._lift(other)])

    def __rtruediv__(self, other) -> Node:
        return self.tape.apply("div", [self._lift(other), self])

    def __neg__(self) -> Node:
        return self.tape.apply("neg", [self])

    def __matmul__(self, other) -> Node:
        return self.tape.apply("matmul", [self, self._lift(other)])

    def square(self) -> Node:
        return self.tape.apply("square", [self])

    def tanh(self) -> Node:
        return self.tape.apply("tanh", [self])

    def sum(self) -> Node:
        return self.tape.apply("sum", [self])

    def mean(self) -> Node:
        return self.tape.apply("mean", [self])

    def column(self, k: int) -> Node:
        return self.tape.apply("column", [self], attr=k)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Append-only record of a computation.

    Parents of node ``i`` always have ids below ``i``, so a reverse sweep over
    descending ids is a valid topological order.
    """

    def __init__(self) -> None:
        self.kinds: list[str] = []
        self.parents: list[tuple[int, ...]] = []
        self.values: list[np.ndarray] = []
        self.attrs: list[object] = []
        self.params: list[int] = []
        # True when the node depends on a trainable leaf; others are skipped in backward.
        self.live: list[bool] = []

    def __len__(self) -> int:
        return len(self.values)

    def _push(
        self, kind: str, parents: tuple[int, ...], value: np.ndarray, attr=None, live=False
    ) -> Node:
        # nan/inf survive a sum; the full scan only runs if the sum is not finite.
        if not np.isfinite(value.sum()) and not np.isfinite(value).all():
            raise FloatingPointError(f"non-finite value produced by {kind!r}")
        self.live.append(live or any(self.live[p] for p in parents))
        self.kinds.append(kind)
        self.parents.append(parents)
        self.values.append(value)
        self.attrs.append(attr)
        return Node(self, len(self.values) - 1)

    def leaf(self, value, trainable: bool = False) -> Node:
        """Record an input. Trainable leaves receive entries from :meth:`backward`."""
        arr = np.array(value, dtype=np.float64)
        node = self._push("leaf", (), arr, live=trainable)
        if trainable:
            self.params.append(node.index)
        return node

    def node(self, index: int) -> Node:
        if not 0 <= index < len(self.values):
            raise TapeError(f"node {index} is not on this tape")
        return Node(self, index)

    def apply(self, kind: str, operands: Sequence[Node | int], attr=None) -> Node:
        """Record ``kind`` applied to ``operands`` and return the new node."""
        if kind not in ARITY:
            raise TapeError(f"unknown primitive {kind!r}")
        if len(operands) != ARITY[kind]:
            raise TapeError(f"{kind} takes {ARITY[kind]} operand(s), got {len(operands)}")
        ids = []
        for op in operands:
            if isinstance(op, Node):
                if op.tape is not self:
                    raise TapeError("operand belongs to a different tape")
                ids.append(op.index)
            else:
                ids.append(self.node(int(op)).index)
        vals = [self.values[i] for i in ids]
        if kind == "add":
            out = vals[0] + vals[1]
        elif kind == "sub":
            out = vals[0] - vals[1]
        elif kind == "mul":
            out = vals[0] * vals[1]
        elif kind == "div":
            if np.any(vals[1] == 0.0):
                raise ZeroDivisionError("division by zero on tape")
            out = vals[0] / vals[1]
        elif kind == "neg":
            out = -vals[0]
        elif kind == "square":
            out = vals[0] * vals[0]
        elif kind == "tanh":
            out = np.tanh(vals[0])
        elif kind == "matmul":
            out = vals[0] @ vals[1]
        elif kind == "sum":
            out = np.asarray(vals[0].sum())
        elif kind == "mean":
            out = np.asarray(vals[0].mean())
        else:  # column
            out = vals[0][..., attr].copy()
        return self._push(kind, tuple(ids), np.asarray(out, dtype=np.float64), attr)

    def backward(self, root: Node | int) -> dict[int, np.ndarray]:
        """Return d(root)/d(leaf) for every trainable leaf reachable from ``root``.

        A non-scalar root is treated as the sum of its entries. Trainable
        leaves the root does not depend on get a zero gradient.
        """
        r = root.index if isinstance(root, Node) else self.node(int(root)).index
        grads: list[np.ndarray | None] = [None] * (r + 1)
        grads[r] = np.ones_like(self.values[r])
        for i in range(r, -1, -1):
            g = grads[i]
            if g is None or not self.parents[i] or not self.live[i]:
                continue
            kind = self.kinds[i]
            ps = self.parents[i]
            vals = [self.values[p] for p in ps]
            need = [self.live[p] for p in ps]
            if kind == "add":
                contribs = (g, g)
            elif kind == "sub":
                contribs = (g, -g if need[1] else None)
            elif kind == "mul":
                contribs = (
                    g * vals[1] if need[0] else None,
                    g * vals[0] if need[1] else None,
                )
            elif kind == "div":
                contribs = (
                    g / vals[1] if need[0] else None,
                    -g * self.values[i] / vals[1] if need[1] else None,
                )
            elif kind == "neg":
                contribs = (-g,)
            elif kind == "square":
                contribs = (2.0 * vals[0] * g,)
            elif kind == "tanh":
                y = self.values[i]
                contribs = (g * (1.0 - y * y),)
            elif kind == "matmul":
                a, b = vals
                contribs = (
                    g @ np.swapaxes(b, -1, -2) if need[0] else None,
                    np.swapaxes(a, -1, -2) @ g if need[1] else None,
                )
            elif kind == "sum":
                contribs = (np.broadcast_to(g, vals[0].shape),)
            elif kind == "mean":
                contribs = (np.broadcast_to(g / vals[0].size, vals[0].shape),)
            else:  # column
                full = np.zeros_like(vals[0])
                full[..., self.attrs[i]] = g
                contribs = (full,)
            for p, c, n in zip(ps, contribs, need):
                if c is None or not n:
                    continue
                c = _unbroadcast(np.asarray(c), self.values[p].shape)
                grads[p] = c if grads[p] is None else grads[p] + c
        out = {}
        for p in self.params:
            if p <= r and grads[p] is not None:
                out[p] = grads[p]
            else:
                out[p] = np.zeros_like(self.values[p])
        return out


def grad_check(
    f: Callable[[Tape, list[Node]], Node],
    point: Sequence[float],
    step: float = 1e-6,
) -> float:
    """Max relative deviation between tape gradients and central differences.

    ``f`` receives a fresh tape plus one trainable leaf per coordinate and must
    return a scalar node. Coordinates where both gradients vanish count as 0.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    point = np.asarray(point, dtype=np.float64)

    def evaluate(x: np.ndarray) -> tuple[Node, list[Node]]:
        tape = Tape()
        leaves = [tape.leaf(xi, trainable=True) for xi in x]
        return f(tape, leaves), leaves

    root, leaves = evaluate(point)
    analytic = root.tape.backward(root)
    worst = 0.0
    for k, leaf in enumerate(leaves):
        hi = point.copy()
        lo = point.copy()
        hi[k] += step
        lo[k] -= step
        numeric = (float(evaluate(hi)[0]) - float(evaluate(lo)[0])) / (2.0 * step)
        exact = float(analytic[leaf.index])
        scale = max(abs(exact), abs(numeric))
        if scale == 0.0:
            continue
        worst = max(worst, abs(exact - numeric) / scale)
    return worst
