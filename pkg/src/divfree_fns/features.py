"""ReLU^k features and the divergence-free vector basis built from them.

For a neuron theta = (w, b) and a coordinate pair i < j the basis field is

    Phi(x) = k * relu^(k-1)(w . x + b) * (w_j e_i - w_i e_j),

i.e. the row-wise divergence of the skew potential with entries +-relu^k in
slots (i, j) and (j, i). Its divergence cancels identically.

Indices are 0-based throughout the Python API. The flat basis index is
``p = ell * n_pairs + pair_rank`` with pairs in lexicographic order.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError
from .sphere import ParamSet


def _ipow(t: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return np.ones_like(t)
    out = t.copy()
    for _ in range(p - 1):
        out *= t
    return out


def relu_pow_deriv(t, k: int, m: int = 0):
    """m-th derivative of relu^k at ``t``; every derivative is 0 at t = 0.

    For m < k this is k!/(k-m)! * max(t, 0)^(k-m); for m == k it is
    k! * [t > 0].
    """
    if k < 0 or m < 0:
        raise InvalidArgumentError("k and m must be nonnegative")
    if m > k:
        raise InvalidArgumentError(f"derivative order {m} exceeds power {k}")
    t = np.asarray(t, dtype=np.float64)
    scale = math.factorial(k) / math.factorial(k - m)
    if m == k:
        out = scale * (t > 0.0)
    else:
        out = scale * _ipow(np.maximum(t, 0.0), k - m)
    return out if out.ndim else float(out)


def relu_pow(t, k: int):
    return relu_pow_deriv(t, k, 0)


def eval_scalar_feature(theta, x, k: int, grad: bool = False):
    """Value of relu^k(theta . (x, 1)) and optionally its gradient in x."""
    theta = np.asarray(theta, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    w, b = theta[:-1], theta[-1]
    t = x @ w + b
    value = relu_pow_deriv(t, k, 0)
    if not grad:
        return value
    slope = relu_pow_deriv(t, k, 1) if k >= 1 else np.zeros_like(t)
    return value, np.multiply.outer(slope, w)


def coordinate_pairs(d: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(d), 2))


@dataclass(frozen=True, eq=False)
class DivFreeBasis:
    params: ParamSet
    k: int
    pairs: tuple = field(init=False)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgumentError(f"activation power must be >= 1, got {self.k}")
        object.__setattr__(self, "pairs", tuple(coordinate_pairs(self.params.dim_d)))

    @property
    def d(self) -> int:
        return self.params.dim_d

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def P(self) -> int:
        return self.n * self.n_pairs

    @property
    def W(self) -> np.ndarray:
        return self.params.weights

    @property
    def b(self) -> np.ndarray:
        return self.params.biases

    def flat_index(self, ell: int, pair_rank: int) -> int:
        if not (0 <= ell < self.n and 0 <= pair_rank < self.n_pairs):
            raise InvalidArgumentError(f"(ell={ell}, pair={pair_rank}) out of range")
        return ell * self.n_pairs + pair_rank

    def unflatten(self, p: int) -> tuple[int, int]:
        if not 0 <= p < self.P:
            raise InvalidArgumentError(f"basis index {p} outside [0, {self.P})")
        return divmod(p, self.n_pairs)

    @cached_property
    def coef(self) -> np.ndarray:
        """Direction table of shape (n, n_pairs, d): Phi_p = s_ell(x) * coef[ell, r]."""
        W = self.W
        c = np.zeros((self.n, self.n_pairs, self.d))
        for r, (i, j) in enumerate(self.pairs):
            c[:, r, i] = W[:, j]
            c[:, r, j] = -W[:, i]
        return c

    # batched scalar factors, shape (m, n)
    def preactivation(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(x) @ self.W.T + self.b

    def value_factor(self, x: np.ndarray) -> np.ndarray:
        """k * relu^(k-1)(theta . x~) for every node and neuron."""
        return relu_pow_deriv(self.preactivation(x), self.k, 1)

    def gradient_factor(self, x: np.ndarray) -> np.ndarray:
        """k (k-1) * relu^(k-2)(theta . x~); zero for k = 1 (a.e. derivative)."""
        t = self.preactivation(x)
        if self.k == 1:
            return np.zeros_like(t)
        return relu_pow_deriv(t, self.k, 2)

    def contract(self, coeffs: np.ndarray) -> np.ndarray:
        """Fold coefficients into per-neuron direction vectors, shape (n, d)."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.shape != (self.P,):
            raise InvalidArgumentError(f"expected {self.P} coefficients, got {coeffs.shape}")
        a = coeffs.reshape(self.n, self.n_pairs)
        return np.einsum("lr,lrc->lc", a, self.coef)


def eval_divfree_basis(basis: DivFreeBasis, p: int, x) -> np.ndarray:
    """Value of the p-th basis field at x (shape (d,) or (m, d))."""
    ell, r = basis.unflatten(p)
    i, j = basis.pairs[r]
    x = np.asarray(x, dtype=np.float64)
    w = basis.W[ell]
    t = x @ w + basis.b[ell]
    s = relu_pow_deriv(t, basis.k, 1)
    out = np.zeros(x.shape)
    out[..., i] = s * w[j]
    out[..., j] = -s * w[i]
    return out


def eval_divfree_basis_jacobian(basis: DivFreeBasis, p: int, x) -> np.ndarray:
    """Jacobian J[a, q] = d/dx_q of component a of the p-th basis field."""
    ell, r = basis.unflatten(p)
    i, j = basis.pairs[r]
    x = np.asarray(x, dtype=np.float64)
    d = basis.d
    out = np.zeros(x.shape[:-1] + (d, d))
    if basis.k == 1:
        warnings.warn("ReLU^1 basis Jacobian is zero almost everywhere", stacklevel=2)
        return out
    w = basis.W[ell]
    t = x @ w + basis.b[ell]
    s2 = np.asarray(relu_pow_deriv(t, basis.k, 2))
    out[..., i, :] = np.multiply.outer(s2 * w[j], w)
    out[..., j, :] = np.multiply.outer(-s2 * w[i], w)
    return out


def divfree_basis_divergence(basis: DivFreeBasis, p: int, x) -> np.ndarray:
    """Closed-form divergence k(k-1) relu^(k-2) * (w_j w_i - w_i w_j), exactly 0."""
    ell, r = basis.unflatten(p)
    i, j = basis.pairs[r]
    x = np.asarray(x, dtype=np.float64)
    w = basis.W[ell]
    if basis.k == 1:
        return np.zeros(x.shape[:-1])
    s2 = np.asarray(relu_pow_deriv(x @ w + basis.b[ell], basis.k, 2))
    return s2 * (w[j] * w[i] - w[i] * w[j])


def field_values(basis: DivFreeBasis, coeffs, x, chunk: int = 16384) -> np.ndarray:
    """u(x) = sum_p coeffs[p] Phi_p(x) for a batch of points, shape (m, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    B = basis.contract(coeffs)
    out = np.empty((x.shape[0], basis.d))
    for start in range(0, x.shape[0], chunk):
        sl = slice(start, start + chunk)
        out[sl] = basis.value_factor(x[sl]) @ B
    return out


def field_jacobians(basis: DivFreeBasis, coeffs, x, chunk: int = 16384) -> np.ndarray:
    """Jacobians J[m, a, q] = d u_a / d x_q, assembled from per-basis Jacobians."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d = basis.d
    if basis.k == 1:
        warnings.warn("ReLU^1 basis Jacobian is zero almost everywhere", stacklevel=2)
        return np.zeros((x.shape[0], d, d))
    B = basis.contract(coeffs)
    BW = (B[:, :, None] * basis.W[:, None, :]).reshape(basis.n, d * d)
    out = np.empty((x.shape[0], d * d))
    for start in range(0, x.shape[0], chunk):
        sl = slice(start, start + chunk)
        out[sl] = basis.gradient_factor(x[sl]) @ BW
    return out.reshape(-1, d, d)
