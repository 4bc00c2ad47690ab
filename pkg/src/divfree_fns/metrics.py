"""Error norms, boundary residuals, divergence audits and convergence rates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DivisionGuardError, InvalidArgumentError
from .features import DivFreeBasis, field_jacobians, field_values
from .problems import BoundaryData
from .quadrature import DEFAULT_CHUNK, QuadratureRule

AUDIT_CHUNK = 4096


@dataclass(frozen=True)
class FittedField:
    """A solved network field, usable wherever a target field is expected."""

    basis: DivFreeBasis
    coeffs: np.ndarray

    @property
    def d(self) -> int:
        return self.basis.d

    def evaluate(self, x) -> np.ndarray:
        return field_values(self.basis, self.coeffs, x, AUDIT_CHUNK)

    def jacobian(self, x) -> np.ndarray:
        return field_jacobians(self.basis, self.coeffs, x, AUDIT_CHUNK)


@dataclass(frozen=True)
class ErrorRecord:
    n: int
    rel_l2: float
    abs_l2: float
    rel_h1: float | None = None
    abs_h1: float | None = None
    boundary_residual: float | None = None
    cond: float | None = None
    inner_rel_l2: float | None = None
    inner_rel_h1: float | None = None


def _has_jacobian(basis: DivFreeBasis, target) -> bool:
    return basis.k >= 2 and getattr(target, "jacobian", None) is not None


def _ratio(num: float, den: float, what: str) -> float:
    if den <= 0.0:
        raise DivisionGuardError(f"target {what} norm is zero; relative error undefined")
    return num / den


def error_norms(coeffs, basis: DivFreeBasis, target, vol_rule: QuadratureRule,
                bdy_rule: QuadratureRule | None = None, trim: float | None = None,
                boundary=None, cond: float | None = None,
                chunk: int = DEFAULT_CHUNK) -> ErrorRecord:
    """L2 and H1-seminorm errors of the network field against ``target``.

    The H1 part (Frobenius norm of the Jacobian difference) is skipped for
    k = 1. With ``trim = t`` the errors are additionally reported over the
    volume nodes inside [-t, t]^d. The boundary residual compares with
    ``boundary.evaluate(x, faces)`` if given, else with the target itself.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (basis.P,):
        raise InvalidArgumentError(f"expected {basis.P} coefficients, got {coeffs.shape}")
    if trim is not None and not 0.0 < trim <= 1.0:
        raise InvalidArgumentError(f"trim must lie in (0, 1], got {trim}")
    want_h1 = _has_jacobian(basis, target)
    # accumulators: [err_l2, tgt_l2, err_h1, tgt_h1] for full and trimmed domains
    full = [[] for _ in range(4)]
    inner = [[] for _ in range(4)]
    chunk = min(chunk, AUDIT_CHUNK)
    for nc in vol_rule.chunks(chunk):
        x, w = nc.nodes, nc.weights
        ut = target.evaluate(x)
        eu = field_values(basis, coeffs, x, chunk) - ut
        parts = [np.sum(eu * eu, axis=1), np.sum(ut * ut, axis=1)]
        if want_h1:
            jt = target.jacobian(x)
            ej = field_jacobians(basis, coeffs, x, chunk) - jt
            parts += [np.sum(ej * ej, axis=(1, 2)), np.sum(jt * jt, axis=(1, 2))]
        mask = None if trim is None else np.all(np.abs(x) <= trim, axis=1)
        for i, p in enumerate(parts):
            full[i].append(float(np.dot(w, p)))
            if mask is not None:
                inner[i].append(float(np.dot(w[mask], p[mask])))
    sums = [math.fsum(v) for v in full]
    abs_l2 = math.sqrt(sums[0])
    rel_l2 = _ratio(abs_l2, math.sqrt(sums[1]), "L2")
    abs_h1 = rel_h1 = None
    if want_h1:
        abs_h1 = math.sqrt(sums[2])
        rel_h1 = _ratio(abs_h1, math.sqrt(sums[3]), "H1")
    inner_l2 = inner_h1 = None
    if trim is not None:
        isums = [math.fsum(v) for v in inner]
        inner_l2 = _ratio(math.sqrt(isums[0]), math.sqrt(isums[1]), "trimmed L2")
        if want_h1:
            inner_h1 = _ratio(math.sqrt(isums[2]), math.sqrt(isums[3]), "trimmed H1")
    bres = None
    if bdy_rule is not None:
        bres = boundary_residual(coeffs, basis, bdy_rule,
                                 boundary if boundary is not None else target, chunk)
    return ErrorRecord(n=basis.n, rel_l2=rel_l2, abs_l2=abs_l2, rel_h1=rel_h1, abs_h1=abs_h1,
                       boundary_residual=bres, cond=cond, inner_rel_l2=inner_l2,
                       inner_rel_h1=inner_h1)


def boundary_residual(coeffs, basis: DivFreeBasis, bdy_rule: QuadratureRule, data,
                      chunk: int = DEFAULT_CHUNK) -> float:
    """L2(boundary) norm of u_n - data; ``data`` is boundary data or a field."""
    acc = []
    for nc in bdy_rule.chunks(min(chunk, AUDIT_CHUNK)):
        if isinstance(data, BoundaryData):
            ref = data.evaluate(nc.nodes, nc.faces)
        else:
            ref = data.evaluate(nc.nodes)
        e = field_values(basis, coeffs, nc.nodes) - ref
        acc.append(float(np.dot(nc.weights, np.sum(e * e, axis=1))))
    return math.sqrt(math.fsum(acc))


def divergence_audit(coeffs, basis: DivFreeBasis, points) -> float:
    """max_x |div u_n(x)| / (1 + max_x |grad u_n(x)|_F) from analytic Jacobians."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if basis.k == 1:
        return 0.0  # piecewise constant field; Jacobian vanishes a.e.
    worst_div = 0.0
    worst_grad = 0.0
    for start in range(0, points.shape[0], AUDIT_CHUNK):
        J = field_jacobians(basis, coeffs, points[start:start + AUDIT_CHUNK], AUDIT_CHUNK)
        worst_div = max(worst_div, float(np.max(np.abs(np.trace(J, axis1=1, axis2=2)))))
        worst_grad = max(worst_grad, float(np.max(np.sqrt(np.sum(J * J, axis=(1, 2))))))
    return worst_div / (1.0 + worst_grad)


def empirical_rate(ns: Sequence[float], errs: Sequence[float]) -> list[float]:
    """Pairwise slopes -log(e_i / e_(i-1)) / log(n_i / n_(i-1))."""
    ns = np.asarray(ns, dtype=np.float64)
    errs = np.asarray(errs, dtype=np.float64)
    if ns.shape != errs.shape or ns.ndim != 1:
        raise InvalidArgumentError("ns and errs must be 1D sequences of equal length")
    if np.any(np.diff(ns) <= 0):
        raise InvalidArgumentError("ns must be strictly increasing")
    if np.any(errs <= 0):
        raise InvalidArgumentError("errors must be positive")
    return [float(-np.log(errs[i] / errs[i - 1]) / np.log(ns[i] / ns[i - 1]))
            for i in range(1, ns.size)]


def global_rate(ns: Sequence[float], errs: Sequence[float], last: int = 4) -> float:
    """Least-squares log-log slope over the final ``last`` points."""
    ns = np.asarray(ns, dtype=np.float64)[-last:]
    errs = np.asarray(errs, dtype=np.float64)[-last:]
    if ns.size < 2:
        raise InvalidArgumentError("need at least two points for a slope")
    empirical_rate(ns, errs)  # same validation
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    return float(-slope)


def theoretical_rate(k: int, d: int, s: int = 0) -> float:
    """Predicted decay exponent 1/2 + (2k - 1 - 2s) / (2d) for the H^s error."""
    if k < 1 or d < 1 or s < 0:
        raise InvalidArgumentError("need k >= 1, d >= 1, s >= 0")
    return 0.5 + (2 * k - 1 - 2 * s) / (2 * d)
