"""Weighted least-squares assembly and the two solution paths.

Every driver is a list of row blocks. A block contributes rows
sqrt(scale * w_q) * (features at node q) with matching scaled targets, so the
discrete problem is min_a |H~ a - y~|. The normal path forms A = H~^T H~ and
b = H~^T y~; the direct path solves the tall problem by SVD.

Both paths exploit that a basis field factors as a per-neuron scalar times a
fixed direction: Phi_(ell, r)(x) = s_ell(x) * coef[ell, r]. Per node we only
need the n scalar features, never the P x d rows, until the small final step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import AssemblyError, InvalidArgumentError, ResourceBudgetError, SolverError
from .features import DivFreeBasis
from .quadrature import DEFAULT_CHUNK, DEFAULT_MEMORY_BUDGET, QuadratureRule

log = logging.getLogger(__name__)

BLOCK_KINDS = ("volume-value", "volume-gradient", "boundary-value")
DEFAULT_RCOND = 1e-12
FEATURE_COPIES = 6  # live (nodes, n) arrays while features are built and scaled


@dataclass(frozen=True)
class RowBlockSpec:
    """One group of least-squares rows.

    ``target`` maps nodes (m, d) to (m, d) values, or to (m, d, d) Jacobians
    for gradient blocks; boundary targets also receive the face ids. ``None``
    means a zero target.
    """

    kind: str
    scale: float
    target: Callable | None = None

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise InvalidArgumentError(f"unknown block kind {self.kind!r}")
        if not self.scale > 0:
            raise InvalidArgumentError(f"block scale must be positive, got {self.scale}")

    @property
    def rule_kind(self) -> str:
        return "boundary" if self.kind == "boundary-value" else "volume"

    def components(self, d: int) -> int:
        return d * d if self.kind == "volume-gradient" else d


@dataclass(frozen=True)
class SolveReport:
    coefficients: np.ndarray
    method: str
    residual_norm: float
    cond_tall: float | None = None
    cond_normal: float | None = None
    truncated_rank: int | None = None


def _check_pairing(blocks: Sequence[RowBlockSpec], rules: Sequence[QuadratureRule]):
    if len(blocks) != len(rules):
        raise InvalidArgumentError(f"{len(blocks)} blocks but {len(rules)} rules")
    if not blocks:
        raise InvalidArgumentError("need at least one row block")
    for blk, rule in zip(blocks, rules):
        if blk.rule_kind != rule.kind:
            raise InvalidArgumentError(
                f"block {blk.kind!r} needs a {blk.rule_kind} rule, got {rule.kind!r}")


def _scaled_chunks(basis: DivFreeBasis, blk: RowBlockSpec, rule: QuadratureRule, chunk: int,
                   interleaved: bool = False):
    """Yield (start, S~, Y~): sqrt-weighted scalar features (m, n) and targets (m, comps)."""
    d = basis.d
    comps = blk.components(d)
    chunks = rule.interleaved_chunks(chunk) if interleaved else rule.chunks(chunk)
    for nc in chunks:
        x = nc.nodes
        sw = np.sqrt(blk.scale * nc.weights)
        if blk.kind == "volume-gradient":
            feats = basis.gradient_factor(x)
        else:
            feats = basis.value_factor(x)
        if blk.target is None:
            y = np.zeros((x.shape[0], comps))
        elif blk.kind == "boundary-value":
            y = np.asarray(blk.target(x, nc.faces), dtype=np.float64)
        else:
            y = np.asarray(blk.target(x), dtype=np.float64)
        y = y.reshape(x.shape[0], comps)
        for arr, what in ((feats, "feature"), (y, "target")):
            bad = ~np.isfinite(arr)
            if np.any(bad):
                row = int(np.argmax(np.any(bad.reshape(arr.shape[0], -1), axis=1)))
                raise AssemblyError(
                    f"non-finite {what} value in {blk.kind} block at node "
                    f"{nc.node_number(row)}, x = {x[row].tolist()}")
        yield nc.start, sw[:, None] * feats, sw[:, None] * y


def _expand(M: np.ndarray, reps: int) -> np.ndarray:
    """Neuron-indexed (n, n) matrix broadcast to basis indices (P, P)."""
    if reps == 1:
        return M
    return np.repeat(np.repeat(M, reps, axis=0), reps, axis=1)


def _feature_step(chunk: int, width: int, memory_budget: int) -> int:
    """Nodes per chunk so that a few (nodes, width) feature temporaries fit the budget."""
    return max(1, min(chunk, memory_budget // (8 * width * FEATURE_COPIES)))


def assemble_normal(basis: DivFreeBasis, blocks: Sequence[RowBlockSpec],
                    rules: Sequence[QuadratureRule], chunk: int = DEFAULT_CHUNK,
                    memory_budget: int = DEFAULT_MEMORY_BUDGET) -> tuple[np.ndarray, np.ndarray]:
    """A = H~^T H~ and b = H~^T y~, streamed over quadrature nodes.

    Only the neuron Gram matrices G = S~^T S~ are accumulated; A is then the
    entrywise product of G with the fixed direction inner products.
    """
    _check_pairing(blocks, rules)
    n, d, npairs = basis.n, basis.d, basis.n_pairs
    coef = basis.coef
    C = coef.reshape(basis.P, d)
    K = C @ C.T  # direction inner products
    A = np.zeros((basis.P, basis.P))
    b = np.zeros(basis.P)
    for blk, rule in zip(blocks, rules):
        comps = blk.components(d)
        G = np.zeros((n, n))
        Z = np.zeros((n, comps))
        step = _feature_step(chunk, n, memory_budget)
        for _, S, Y in _scaled_chunks(basis, blk, rule, step):
            G += S.T @ S
            Z += S.T @ Y
        if blk.kind == "volume-gradient":
            W = basis.W
            A += _expand(G * (W @ W.T), npairs) * K
            b += np.einsum("lrc,lq,lcq->lr", coef, W, Z.reshape(n, d, d)).ravel()
        else:
            A += _expand(G, npairs) * K
            b += np.einsum("lrc,lc->lr", coef, Z).ravel()
    A = 0.5 * (A + A.T)
    return A, b


def _block_rows(basis: DivFreeBasis, blk: RowBlockSpec, S: np.ndarray) -> np.ndarray:
    """Explicit rows for features S (m, n): node-major, then component."""
    m = S.shape[0]
    if blk.kind == "volume-gradient":
        H = np.einsum("ml,lrc,lq->mcqlr", S, basis.coef, basis.W)
    else:
        H = np.einsum("ml,lrc->mclr", S, basis.coef)
    return H.reshape(m * blk.components(basis.d), basis.P)


def tall_shape(basis: DivFreeBasis, blocks: Sequence[RowBlockSpec],
               rules: Sequence[QuadratureRule]) -> tuple[int, int]:
    rows = sum(rule.size * blk.components(basis.d) for blk, rule in zip(blocks, rules))
    return rows, basis.P


def assemble_tall(basis: DivFreeBasis, blocks: Sequence[RowBlockSpec],
                  rules: Sequence[QuadratureRule], chunk: int = DEFAULT_CHUNK,
                  memory_budget: int = DEFAULT_MEMORY_BUDGET) -> tuple[np.ndarray, np.ndarray]:
    """The explicit weighted matrix H~ and vector y~.

    Row order is block, then node, then component; gradient components run
    over (c, q) with q fastest.
    """
    _check_pairing(blocks, rules)
    rows, P = tall_shape(basis, blocks, rules)
    need = rows * (P + 1) * 8
    if need > memory_budget:
        raise ResourceBudgetError(
            f"tall matrix {rows} x {P} needs {need} bytes > {memory_budget}; raise "
            "--memory-budget or use the compressed direct solver")
    H = np.empty((rows, P))
    y = np.empty(rows)
    pos = 0
    for blk, rule in zip(blocks, rules):
        for _, S, Y in _scaled_chunks(basis, blk, rule, chunk):
            rblk = _block_rows(basis, blk, S)
            H[pos:pos + rblk.shape[0]] = rblk
            y[pos:pos + rblk.shape[0]] = Y.ravel()
            pos += rblk.shape[0]
    return H, y


def _tsqr_r(R: np.ndarray | None, block: np.ndarray) -> np.ndarray:
    stacked = block if R is None else np.vstack([R, block])
    r = scipy.linalg.qr(stacked, mode="r", overwrite_a=True, check_finite=False)[0]
    return r[:min(stacked.shape)]  # mode="r" pads with zero rows up to the full height


def _pad_square(R: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros((size, size))
    out[:R.shape[0]] = R[:size]
    return out


def assemble_compressed(basis: DivFreeBasis, blocks: Sequence[RowBlockSpec],
                        rules: Sequence[QuadratureRule], chunk: int = DEFAULT_CHUNK,
                        memory_budget: int = DEFAULT_MEMORY_BUDGET
                        ) -> tuple[np.ndarray, np.ndarray, float]:
    """A short system (Hc, yc, r0) equivalent to the tall one.

    For all a: |H~ a - y~|^2 = |Hc a - yc|^2 + r0^2, and Hc has the singular
    values of H~. Each block's scalar features are compressed with a streaming
    QR of [S~ | Y~]; the rows of every component share the triangular factor.
    """
    _check_pairing(blocks, rules)
    n, d, P = basis.n, basis.d, basis.P
    coef = basis.coef
    short_rows = sum(n * blk.components(d) for blk in blocks)
    need = 8 * (short_rows * (P + 1) + max(n + blk.components(d) for blk in blocks) ** 2)
    if need > memory_budget:
        raise ResourceBudgetError(
            f"compressed system {short_rows} x {P} needs {need} bytes > {memory_budget}; "
            "raise --memory-budget")
    rows_h, rows_y, r0_sq = [], [], 0.0
    for blk, rule in zip(blocks, rules):
        comps = blk.components(d)
        width = n + comps
        # about 4 * width new rows per QR update is fastest; stay within the budget too
        cap = max(1, memory_budget // (8 * width * 4) - width)
        step = max(1, min(chunk, cap, max(4 * width, 2048)))
        R = None
        # interleaved chunks keep each block well spread over the domain; contiguous strips
        # make many step-like columns exactly dependent and the QR then crawls through
        # subnormal numbers
        for _, S, Y in _scaled_chunks(basis, blk, rule, step, interleaved=True):
            R = _tsqr_r(R, np.hstack([S, Y]))
        R = _pad_square(R, width)
        Rs, Z, T = R[:n, :n], R[:n, n:], R[n:, n:]
        r0_sq += float(np.sum(T * T))
        if blk.kind == "volume-gradient":
            W = basis.W
            for c in range(d):
                for q in range(d):
                    dirs = (coef[:, :, c] * W[:, q:q + 1]).ravel()
                    rows_h.append(np.repeat(Rs, basis.n_pairs, axis=1) * dirs)
                    rows_y.append(Z[:, c * d + q])
        else:
            for c in range(d):
                rows_h.append(np.repeat(Rs, basis.n_pairs, axis=1) * coef[:, :, c].ravel())
                rows_y.append(Z[:, c])
    Hc = np.vstack(rows_h)
    yc = np.concatenate(rows_y)
    if Hc.shape[0] > P + 1:
        # one more reduction so the SVD acts on a (P+1)-row system
        R = _pad_square(_tsqr_r(None, np.hstack([Hc, yc[:, None]])), P + 1)
        Hc, yc = R[:P, :P], R[:P, P]
        r0_sq += float(R[P, P] ** 2)
    return Hc, yc, float(np.sqrt(r0_sq))


def _finite(M: np.ndarray, name: str):
    if not np.all(np.isfinite(M)):
        raise InvalidArgumentError(f"{name} has non-finite entries")


def solve_normal(A: np.ndarray, b: np.ndarray, rcond: float = DEFAULT_RCOND) -> SolveReport:
    """Minimum-norm solution of A a = b from a symmetric eigendecomposition.

    Eigenvalues with |lambda| <= rcond * max|lambda| are discarded.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _finite(A, "normal matrix")
    _finite(b, "right-hand side")
    try:
        lam, V = scipy.linalg.eigh(A, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"symmetric eigensolver failed: {exc}") from exc
    mag = np.abs(lam)
    top = float(mag.max()) if mag.size else 0.0
    keep = mag > rcond * top
    if not np.any(keep):
        coeffs = np.zeros(A.shape[1])
        cond = np.inf
    else:
        Vk = V[:, keep]
        coeffs = Vk @ ((Vk.T @ b) / lam[keep])
        cond = top / float(mag[keep].min())
    return SolveReport(
        coefficients=coeffs, method="normal",
        residual_norm=float(np.linalg.norm(A @ coeffs - b)),
        cond_normal=cond, truncated_rank=int(np.count_nonzero(keep)))


def _svd(H: np.ndarray):
    for driver in ("gesdd", "gesvd"):
        try:
            return scipy.linalg.svd(H, full_matrices=False, check_finite=False,
                                    lapack_driver=driver)
        except np.linalg.LinAlgError:
            log.warning("SVD driver %s did not converge", driver)
    raise SolverError("SVD did not converge with gesdd or gesvd")


def solve_lstsq_svd(H: np.ndarray, y: np.ndarray, rcond: float = DEFAULT_RCOND,
                    residual_offset: float = 0.0) -> SolveReport:
    """a = V Sigma^+ U^T y with singular values below rcond * sigma_max dropped.

    ``residual_offset`` is the part of the residual that a compressed system
    cannot see; it is combined in quadrature into ``residual_norm``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if H.shape[0] < 1 or H.shape[0] != y.size:
        raise InvalidArgumentError(f"incompatible shapes {H.shape} and {y.shape}")
    _finite(H, "matrix")
    _finite(y, "right-hand side")
    U, s, Vt = _svd(H)
    keep = s > rcond * s[0] if s.size and s[0] > 0 else np.zeros(s.size, dtype=bool)
    if np.any(keep):
        coeffs = Vt[keep].T @ ((U[:, keep].T @ y) / s[keep])
        cond = float(s[0] / s[keep].min())
    else:
        coeffs = np.zeros(H.shape[1])
        cond = np.inf
    res = float(np.linalg.norm(H @ coeffs - y))
    return SolveReport(
        coefficients=coeffs, method="direct-svd",
        residual_norm=float(np.hypot(res, residual_offset)),
        cond_tall=cond, truncated_rank=int(np.count_nonzero(keep)))


def condition_number(M: np.ndarray) -> float:
    """sigma_max / sigma_min from all singular values; inf if sigma_min is 0."""
    s = scipy.linalg.svdvals(np.atleast_2d(np.asarray(M, dtype=np.float64)))
    if s.size == 0 or s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def solve_system(basis: DivFreeBasis, blocks: Sequence[RowBlockSpec],
                 rules: Sequence[QuadratureRule], solver: str = "direct",
                 rcond: float = DEFAULT_RCOND, chunk: int = DEFAULT_CHUNK,
                 memory_budget: int = DEFAULT_MEMORY_BUDGET) -> SolveReport:
    """Assemble and solve with the ``normal`` or ``direct`` path."""
    if solver == "normal":
        A, b = assemble_normal(basis, blocks, rules, chunk, memory_budget)
        return solve_normal(A, b, rcond)
    if solver == "direct":
        Hc, yc, r0 = assemble_compressed(basis, blocks, rules, chunk, memory_budget)
        return solve_lstsq_svd(Hc, yc, rcond, residual_offset=r0)
    raise InvalidArgumentError(f"solver must be 'normal' or 'direct', got {solver!r}")
