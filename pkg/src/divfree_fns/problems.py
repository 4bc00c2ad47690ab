"""Analytic targets, lid boundary data, and the row-block lists of each driver.

Every divergence-free target is written as the row-wise divergence of a skew
potential mu, u_i = sum_j d_j mu_ij, where each entry mu_ij (i < j) is a sum
of separable products of 1D factors. Values and Jacobians then follow from
closed-form 1D derivatives by the product rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import RowBlockSpec
from .errors import InvalidArgumentError

DRIVERS = ("l2-projection", "stokes-manufactured", "lid-cavity")
LID_PROFILES = ("const", "smooth")


# 1D factor families: f(t, omega, m) returns the m-th derivative, m <= 2.
def _one(t, omega, m):
    return np.ones_like(t) if m == 0 else np.zeros_like(t)


def _sin(t, omega, m):
    if m == 0:
        return np.sin(omega * t)
    if m == 1:
        return omega * np.cos(omega * t)
    return -omega * omega * np.sin(omega * t)


def _bubble(t, omega, m):
    # beta(t) = (1 - t^2)^2
    if m == 0:
        return (1.0 - t * t) ** 2
    if m == 1:
        return -4.0 * t * (1.0 - t * t)
    return 12.0 * t * t - 4.0


def _bubble_sin(t, omega, m):
    # beta(t) sin(omega t)
    s, c = np.sin(omega * t), np.cos(omega * t)
    beta = (1.0 - t * t) ** 2
    if m == 0:
        return beta * s
    dbeta = -4.0 * t * (1.0 - t * t)
    if m == 1:
        return dbeta * s + beta * omega * c
    return (12.0 * t * t - 4.0) * s + 2.0 * dbeta * omega * c - beta * omega * omega * s


FACTORS: dict[str, Callable] = {
    "1": _one, "sin": _sin, "bubble": _bubble, "bubble_sin": _bubble_sin,
}


@dataclass(frozen=True)
class PotentialTerm:
    """coef * prod_a factor_a(x_a), placed at mu[i, j] (and -coef at mu[j, i])."""

    i: int
    j: int
    coef: float
    factors: tuple[str, ...]


@dataclass(frozen=True)
class VectorField:
    """Divergence-free field u_i = sum_j d_j mu_ij of a separable skew potential."""

    name: str
    d: int
    terms: tuple[PotentialTerm, ...]
    omega: float = math.pi

    def _product(self, tables, term: PotentialTerm, orders) -> np.ndarray:
        out = term.coef * tables[0][term.factors[0]][orders[0]]
        for a in range(1, self.d):
            out = out * tables[a][term.factors[a]][orders[a]]
        return out

    def _tables(self, x):
        used = {f for t in self.terms for f in t.factors}
        return [{f: [FACTORS[f](x[:, a], self.omega, m) for m in range(3)] for f in used}
                for a in range(self.d)]

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        tables = self._tables(x)
        out = np.zeros((x.shape[0], self.d))
        for t in self.terms:
            e = np.eye(self.d, dtype=int)
            out[:, t.i] += self._product(tables, t, e[t.j])
            out[:, t.j] -= self._product(tables, t, e[t.i])
        return out

    def jacobian(self, x) -> np.ndarray:
        """J[m, a, q] = d u_a / d x_q."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        tables = self._tables(x)
        out = np.zeros((x.shape[0], self.d, self.d))
        e = np.eye(self.d, dtype=int)
        for t in self.terms:
            for q in range(self.d):
                out[:, t.i, q] += self._product(tables, t, e[t.j] + e[q])
                out[:, t.j, q] -= self._product(tables, t, e[t.i] + e[q])
        return out

    def divergence(self, x) -> np.ndarray:
        return np.trace(self.jacobian(x), axis1=1, axis2=2)


def target_l2_2d(omega: float = math.pi) -> VectorField:
    """Perpendicular gradient of sin(wx) sin(wy)."""
    return VectorField("l2-2d", 2, (PotentialTerm(0, 1, 1.0, ("sin", "sin")),), omega)


def target_l2_3d(omega: float = math.pi) -> VectorField:
    """Curl of A = (s(y)s(z), s(z)s(x), s(x)s(y)) with s = sin(w .)."""
    terms = (
        PotentialTerm(0, 1, 1.0, ("sin", "sin", "1")),    # A_3
        PotentialTerm(0, 2, -1.0, ("sin", "1", "sin")),   # -A_2
        PotentialTerm(1, 2, 1.0, ("1", "sin", "sin")),    # A_1
    )
    return VectorField("l2-3d", 3, terms, omega)


def target_stokes_2d(omega: float = math.pi) -> VectorField:
    """Perpendicular gradient of beta(x)beta(y) sin(wx) sin(wy); zero on the boundary."""
    return VectorField("stokes-2d", 2,
                       (PotentialTerm(0, 1, 1.0, ("bubble_sin", "bubble_sin")),), omega)


def target_stokes_3d(omega: float = math.pi) -> VectorField:
    """Row divergence of beta(x,y,z) times the sine skew matrix; zero on the boundary."""
    terms = (
        PotentialTerm(0, 1, 1.0, ("bubble_sin", "bubble_sin", "bubble")),
        PotentialTerm(0, 2, -1.0, ("bubble_sin", "bubble", "bubble_sin")),
        PotentialTerm(1, 2, 1.0, ("bubble", "bubble_sin", "bubble_sin")),
    )
    return VectorField("stokes-3d", 3, terms, omega)


@dataclass(frozen=True)
class BoundaryData:
    """Prescribed velocity on boundary nodes; ``evaluate(x, faces)`` -> (m, d)."""

    name: str
    d: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)

    def evaluate(self, x, faces) -> np.ndarray:
        return self.func(np.atleast_2d(np.asarray(x, dtype=np.float64)), np.asarray(faces))


def g_const(x):
    return np.ones_like(x)


def g_smooth(x):
    return np.sin(0.5 * np.pi * (x + 1.0)) ** 2


TOP_FACE_2D = 3  # axis 1, side +1


def lid_boundary_data(profile: str = "smooth") -> BoundaryData:
    """Lid velocity (g(x), 0) on the top edge y = 1 and no-slip elsewhere."""
    if profile not in LID_PROFILES:
        raise InvalidArgumentError(f"unknown lid profile {profile!r}")
    g = g_const if profile == "const" else g_smooth

    def func(x, faces):
        out = np.zeros((x.shape[0], 2))
        top = faces == TOP_FACE_2D
        out[top, 0] = g(x[top, 0])
        return out

    return BoundaryData(f"lid-{profile}", 2, func)


def zero_boundary(d: int) -> BoundaryData:
    return BoundaryData("zero", d, lambda x, faces: np.zeros((x.shape[0], d)))


def default_eps(d: int) -> float:
    return 1.0 if d == 2 else 1.0 / 6.0


@dataclass(frozen=True)
class Problem:
    kind: str
    d: int
    blocks: tuple[RowBlockSpec, ...]
    target: VectorField | None
    boundary: BoundaryData
    eps: float | None = None
    nu: float | None = None


def build_problem(kind: str, d: int, omega: float = math.pi, nu: float = 1.0,
                  eps: float | None = None, profile: str = "smooth") -> Problem:
    if kind not in DRIVERS:
        raise InvalidArgumentError(f"unknown driver {kind!r}; choose from {DRIVERS}")
    if d not in (2, 3):
        raise InvalidArgumentError(f"drivers support d in (2, 3), got {d}")
    if kind == "l2-projection":
        target = target_l2_2d(omega) if d == 2 else target_l2_3d(omega)
        blocks = (RowBlockSpec("volume-value", 1.0, target.evaluate),)
        return Problem(kind, d, blocks, target, zero_boundary(d))

    if nu <= 0:
        raise InvalidArgumentError(f"viscosity must be positive, got {nu}")
    eps = default_eps(d) if eps is None else float(eps)
    if eps <= 0:
        raise InvalidArgumentError(f"penalty parameter must be positive, got {eps}")
    if kind == "stokes-manufactured":
        target = target_stokes_2d(omega) if d == 2 else target_stokes_3d(omega)
        boundary = zero_boundary(d)
        blocks = (RowBlockSpec("volume-gradient", nu, target.jacobian),
                  RowBlockSpec("boundary-value", 1.0 / eps, None))
        return Problem(kind, d, blocks, target, boundary, eps, nu)

    if d != 2:
        raise InvalidArgumentError("the lid-driven cavity is defined for d = 2 only")
    boundary = lid_boundary_data(profile)
    blocks = (RowBlockSpec("volume-gradient", nu, None),
              RowBlockSpec("boundary-value", 1.0 / eps, boundary.evaluate))
    return Problem(kind, d, blocks, None, boundary, eps, nu)


def build_driver(kind: str, d: int, omega: float = math.pi, nu: float = 1.0,
                 eps: float | None = None, profile: str = "smooth") -> list[RowBlockSpec]:
    return list(build_problem(kind, d, omega, nu, eps, profile).blocks)


class SampledField:
    """Reference values known only at a fixed node set, looked up by exact coordinates.

    Meant for references computed elsewhere at nodes exported by this package,
    so coordinates round-trip bit for bit through the text format.
    """

    def __init__(self, points, values, jacobians=None, name: str = "sampled"):
        self.points = np.asarray(points, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        self.d = self.points.shape[1]
        self.name = name
        if self.values.shape != self.points.shape:
            raise InvalidArgumentError("values must have the same shape as points")
        self.jacobians = None
        if jacobians is not None:
            self.jacobians = np.asarray(jacobians, dtype=np.float64).reshape(-1, self.d, self.d)
        self._index = {p.tobytes(): i for i, p in enumerate(self.points + 0.0)}  # -0.0 -> 0.0
        if len(self._index) != self.points.shape[0]:
            raise InvalidArgumentError("reference nodes must be distinct")

    def _lookup(self, x) -> np.ndarray:
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64) + 0.0
        try:
            return np.array([self._index[p.tobytes()] for p in x], dtype=np.int64)
        except KeyError:
            raise InvalidArgumentError(
                "reference field has no value at a requested node; export the nodes "
                "with the same quadrature settings used for the sweep") from None

    def evaluate(self, x) -> np.ndarray:
        return self.values[self._lookup(x)]

    @property
    def jacobian(self):
        if self.jacobians is None:
            return None
        return lambda x: self.jacobians[self._lookup(x)]
