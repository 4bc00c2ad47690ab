"""Piecewise tensor-product Gauss-Legendre rules on [-1, 1]^d and its faces."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Iterator

import numpy as np

from .errors import InvalidArgumentError, QuadratureEvaluationError, ResourceBudgetError

MAX_ORDER = 32
DEFAULT_CHUNK = 65536
DEFAULT_MEMORY_BUDGET = 1 << 30  # bytes


@lru_cache(maxsize=None)
def _gauss_legendre_cached(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes = np.empty(order)
    weights = np.empty(order)
    for i in range(order):
        # Chebyshev-like initial guess for the i-th root, descending order
        x = math.cos(math.pi * (i + 0.75) / (order + 0.5))
        for _ in range(100):
            p0, p1 = 1.0, x
            for m in range(2, order + 1):
                p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
            dp = order * (x * p1 - p0) / (x * x - 1.0)
            dx = p1 / dp
            x -= dx
            if abs(dx) <= 1e-15:
                break
        p0, p1 = 1.0, x
        for m in range(2, order + 1):
            p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
        dp = order * (x * p1 - p0) / (x * x - 1.0)
        nodes[i] = x
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp)
    idx = np.argsort(nodes)
    nodes, weights = nodes[idx], weights[idx]
    # symmetrize to remove last-bit asymmetry
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre_1d(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes (ascending) and weights on [-1, 1]."""
    if not 1 <= order <= MAX_ORDER:
        raise InvalidArgumentError(f"order must be in [1, {MAX_ORDER}], got {order}")
    nodes, weights = _gauss_legendre_cached(int(order))
    return nodes.copy(), weights.copy()


def composite_rule_1d(nx: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule of ``order`` points on each of ``nx`` equal cells of [-1, 1]."""
    if nx < 1:
        raise InvalidArgumentError(f"need nx >= 1, got {nx}")
    g, w = gauss_legendre_1d(order)
    h = 2.0 / nx
    mids = -1.0 + h * (np.arange(nx) + 0.5)
    nodes = (mids[:, None] + 0.5 * h * g[None, :]).ravel()
    weights = np.tile(0.5 * h * w, nx)
    return nodes, weights


@dataclass(frozen=True, eq=False)
class NodeChunk:
    start: int
    nodes: np.ndarray
    weights: np.ndarray
    faces: np.ndarray | None = None
    index: np.ndarray | None = None  # global node numbers; contiguous from start if None

    def node_number(self, row: int) -> int:
        return int(self.index[row]) if self.index is not None else self.start + row


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """A tensor rule whose nodes are generated on demand from 1D factors.

    ``kind`` is ``"volume"`` (cube interior) or ``"boundary"`` (all 2d faces).
    Boundary faces are numbered ``2 * axis + (side > 0)``.
    """

    d: int
    kind: str
    nx: int
    order: int
    axis_nodes: np.ndarray
    axis_weights: np.ndarray
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    @property
    def line_size(self) -> int:
        return self.axis_nodes.size

    @property
    def face_size(self) -> int:
        return self.line_size ** (self.d - 1)

    @property
    def size(self) -> int:
        if self.kind == "volume":
            return self.line_size ** self.d
        return 2 * self.d * self.face_size

    def __len__(self):
        return self.size

    @property
    def measure(self) -> float:
        return 2.0 ** self.d if self.kind == "volume" else 2 * self.d * 2.0 ** (self.d - 1)

    def _block(self, start: int, stop: int) -> NodeChunk:
        return self._gather(np.arange(start, stop))

    def _gather(self, q: np.ndarray, keep_index: bool = False) -> NodeChunk:
        L = self.line_size
        start = int(q[0]) if q.size else 0
        index = q if keep_index else None
        if self.kind == "volume":
            idx = np.unravel_index(q, (L,) * self.d)
            nodes = np.stack([self.axis_nodes[i] for i in idx], axis=1)
            weights = np.prod(np.stack([self.axis_weights[i] for i in idx], axis=1), axis=1)
            return NodeChunk(start, nodes, weights, None, index)
        face, local = np.divmod(q, self.face_size)
        idx = np.unravel_index(local, (L,) * (self.d - 1))
        nodes = np.empty((q.size, self.d))
        weights = np.ones(q.size)
        for f in np.unique(face):
            sel = face == f
            axis = int(f) // 2
            free = [a for a in range(self.d) if a != axis]
            nodes[sel, axis] = 1.0 if f % 2 else -1.0
            for slot, a in enumerate(free):
                nodes[sel, a] = self.axis_nodes[idx[slot][sel]]
                weights[sel] *= self.axis_weights[idx[slot][sel]]
        return NodeChunk(start, nodes, weights, face, index)

    def chunks(self, chunk: int = DEFAULT_CHUNK) -> Iterator[NodeChunk]:
        if chunk < 1:
            raise InvalidArgumentError(f"chunk must be >= 1, got {chunk}")
        for start in range(0, self.size, chunk):
            yield self._block(start, min(start + chunk, self.size))

    def interleaved_chunks(self, chunk: int = DEFAULT_CHUNK) -> Iterator[NodeChunk]:
        """Chunks of at most ``chunk`` nodes taking every m-th node, m = number of chunks.

        Every chunk then spans the whole domain instead of a strip of it.
        """
        if chunk < 1:
            raise InvalidArgumentError(f"chunk must be >= 1, got {chunk}")
        m = -(-self.size // chunk)
        for j in range(m):
            yield self._gather(np.arange(j, self.size, m), keep_index=True)

    def _materialize(self) -> NodeChunk:
        need = self.size * (self.d + 2) * 8
        if need > self.memory_budget:
            raise ResourceBudgetError(
                f"materializing {self.size} nodes needs {need} bytes > memory budget "
                f"{self.memory_budget}; iterate rule.chunks() (chunked mode) instead")
        return self._block(0, self.size)

    @cached_property
    def _all(self) -> NodeChunk:
        return self._materialize()

    @property
    def nodes(self) -> np.ndarray:
        return self._all.nodes

    @property
    def weights(self) -> np.ndarray:
        return self._all.weights

    @property
    def faces(self) -> np.ndarray | None:
        return self._all.faces


def _node_bytes(count: int, d: int) -> int:
    return count * (d + 2) * 8


def build_volume_rule(d: int, nx: int, order: int,
                      memory_budget: int = DEFAULT_MEMORY_BUDGET,
                      lazy: bool = False) -> QuadratureRule:
    """Composite Gauss rule with nx^d cells and order^d points per cell.

    Unless ``lazy`` is set, the full node array must fit ``memory_budget``;
    lazy rules are only traversed through :meth:`QuadratureRule.chunks`.
    """
    if d < 1:
        raise InvalidArgumentError(f"need d >= 1, got {d}")
    nodes, weights = composite_rule_1d(nx, order)
    rule = QuadratureRule(d, "volume", nx, order, nodes, weights, memory_budget)
    if not lazy and _node_bytes(rule.size, d) > memory_budget:
        raise ResourceBudgetError(
            f"volume rule with {rule.size} nodes exceeds memory budget {memory_budget} "
            "bytes; build it with lazy=True and traverse in chunks")
    return rule


def build_boundary_rule(d: int, nx: int, order: int,
                        memory_budget: int = DEFAULT_MEMORY_BUDGET,
                        lazy: bool = False) -> QuadratureRule:
    """Union of the 2d face rules {x_i = +-1}, each a (d-1)-dim composite rule."""
    if d < 2:
        raise InvalidArgumentError(f"boundary rules need d >= 2, got {d}")
    nodes, weights = composite_rule_1d(nx, order)
    rule = QuadratureRule(d, "boundary", nx, order, nodes, weights, memory_budget)
    if not lazy and _node_bytes(rule.size, d) > memory_budget:
        raise ResourceBudgetError(
            f"boundary rule with {rule.size} nodes exceeds memory budget {memory_budget} "
            "bytes; build it with lazy=True and traverse in chunks")
    return rule


def integrate_chunked(rule: QuadratureRule, f: Callable[[np.ndarray], np.ndarray],
                      chunk: int = DEFAULT_CHUNK) -> float:
    """Sum of w_q f(x_q), evaluated chunk by chunk.

    Products are accumulated with ``math.fsum`` so the result does not depend
    on the chunk size.
    """
    def products():
        for blk in rule.chunks(chunk):
            try:
                vals = np.asarray(f(blk.nodes), dtype=np.float64).reshape(-1)
            except Exception as exc:
                raise QuadratureEvaluationError(
                    f"integrand failed on nodes [{blk.start}, {blk.start + len(blk.weights)})"
                ) from exc
            if vals.size != blk.weights.size:
                raise QuadratureEvaluationError(
                    f"integrand returned {vals.size} values for {blk.weights.size} nodes "
                    f"starting at node {blk.start}")
            bad = ~np.isfinite(vals)
            if np.any(bad):
                raise QuadratureEvaluationError(
                    f"non-finite integrand at node {blk.start + int(np.argmax(bad))}")
            yield from (blk.weights * vals).tolist()

    return math.fsum(products())
