"""Neuron parameter sets on the unit sphere S^d in R^(d+1).

Each point theta = (w, b) holds a neuron's weight vector w (first d
coordinates) and bias b (last coordinate), so that theta . (x, 1) = w . x + b.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DegenerateConfigurationError, InvalidArgumentError

log = logging.getLogger(__name__)

UNIT_NORM_TOL = 1e-12
COLLAPSE_DIST = 1e-14


@dataclass(frozen=True, eq=False)
class ParamSet:
    dim_d: int
    points: np.ndarray
    seed: int = 0

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.dim_d + 1:
            raise InvalidArgumentError(
                f"points must have shape (n, {self.dim_d + 1}), got {pts.shape}")
        if pts.shape[0] < 1:
            raise InvalidArgumentError("a ParamSet needs at least one point")
        norms = np.linalg.norm(pts, axis=1)
        if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
            raise InvalidArgumentError("all points must lie on the unit sphere")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return self.points[:, : self.dim_d]

    @property
    def biases(self) -> np.ndarray:
        return self.points[:, self.dim_d]

    def __eq__(self, other):
        if not isinstance(other, ParamSet):
            return NotImplemented
        return (self.dim_d == other.dim_d and self.seed == other.seed
                and np.array_equal(self.points, other.points))

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class UniformityDiagnostics:
    mesh_norm_estimate: float
    separation: float
    riesz_energy: float
    n: int


def _check_dims(n: int, d: int):
    if n < 1:
        raise InvalidArgumentError(f"need n >= 1, got {n}")
    if d < 2:
        raise InvalidArgumentError(f"need d >= 2, got {d}")


def sample_gaussian_sphere(n: int, d: int, seed: int) -> ParamSet:
    """Draw ``n`` i.i.d. uniform points on S^d by normalizing Gaussian vectors."""
    _check_dims(n, d)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, d + 1))
    return ParamSet(d, g / np.linalg.norm(g, axis=1, keepdims=True), seed)


@njit(cache=True)
def _riesz_sums(x, s, want_grad):
    # Fixed-order pairwise loop: bit-stable energy and gradient.
    n, m = x.shape
    energy = 0.0
    grad = np.zeros((n, m))
    min_r2 = np.inf
    half_s = 0.5 * s
    for i in range(n):
        for j in range(i + 1, n):
            r2 = 0.0
            for a in range(m):
                t = x[i, a] - x[j, a]
                r2 += t * t
            if r2 < min_r2:
                min_r2 = r2
            if r2 == 0.0:
                continue
            if s == 1.0:
                e = 1.0 / np.sqrt(r2)
            elif s == 2.0:
                e = 1.0 / r2
            else:
                e = r2 ** (-half_s)
            energy += e
            if want_grad:
                c = s * e / r2
                for a in range(m):
                    t = c * (x[i, a] - x[j, a])
                    grad[i, a] -= t
                    grad[j, a] += t
    return energy, grad, min_r2


@njit(cache=True)
def _max_pair_dot(x):
    n, m = x.shape
    best = -np.inf
    for i in range(n):
        for j in range(i + 1, n):
            dot = 0.0
            for a in range(m):
                dot += x[i, a] * x[j, a]
            if dot > best:
                best = dot
    return best


def _energy_and_grad(x: np.ndarray, s: float, want_grad: bool):
    energy, grad, min_r2 = _riesz_sums(x, float(s), want_grad)
    if np.sqrt(min_r2) < COLLAPSE_DIST:
        raise DegenerateConfigurationError(
            f"two parameters are within {np.sqrt(min_r2):.3e} of each other")
    return energy, grad


def riesz_energy(ps: ParamSet, s: float) -> float:
    """Riesz s-energy: sum over pairs i < j of |theta_i - theta_j|^(-s)."""
    if ps.n == 1:
        return 0.0
    energy, _ = _energy_and_grad(ps.points, s, False)
    return float(energy)


def _tangent(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g - np.sum(g * x, axis=1, keepdims=True) * x


def _project(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def refine_quasi_uniform(ps: ParamSet, s: float | None = None, max_iters: int = 500,
                         grad_tol: float = 1e-8) -> ParamSet:
    """Spread points out by projected gradient descent on the Riesz energy.

    Each step moves along the tangential (Riemannian) gradient and renormalizes
    onto the sphere. The step is halved until the energy does not increase, so
    the returned set never has higher energy than the input. Stops when the
    Frobenius norm of the tangential gradient drops below ``grad_tol``, when no
    descent step can be found, or after ``max_iters`` iterations.
    """
    d = ps.dim_d
    s = float(d - 1 if s is None else s)
    if s <= 0:
        raise InvalidArgumentError(f"Riesz exponent must be positive, got {s}")
    if ps.n == 1 or max_iters <= 0:
        return ps

    x = np.array(ps.points)
    energy, grad = _energy_and_grad(x, s, True)
    gt = _tangent(x, grad)
    row_max = np.max(np.linalg.norm(gt, axis=1))
    step = 0.1 * ps.n ** (-1.0 / d) / row_max if row_max > 0 else 0.0
    min_step = step * 1e-20

    for it in range(max_iters):
        gnorm = np.linalg.norm(gt)
        if gnorm < grad_tol:
            log.debug("refine: converged at iteration %d (|g|=%.3e)", it, gnorm)
            break
        while True:
            trial = _project(x - step * gt)
            e_trial, _ = _energy_and_grad(trial, s, False)
            if e_trial <= energy:
                break
            step *= 0.5
            if step < min_step:
                log.debug("refine: no descent step at iteration %d", it)
                return ParamSet(d, x, ps.seed)
        x = trial
        energy, grad = _energy_and_grad(x, s, True)
        gt = _tangent(x, grad)
        step *= 1.5
    return ParamSet(d, x, ps.seed)


def separation_distance(ps: ParamSet) -> float:
    """Minimum pairwise geodesic distance arccos(theta_i . theta_j)."""
    if ps.n < 2:
        raise InvalidArgumentError("separation needs at least two points")
    return float(np.arccos(np.clip(_max_pair_dot(ps.points), -1.0, 1.0)))


def estimate_mesh_norm(ps: ParamSet, n_probe: int, seed: int,
                       chunk: int = 8192) -> float:
    """Monte Carlo lower bound on the covering radius of ``ps``.

    Probes are uniform sphere points; the estimate is the largest geodesic
    distance from a probe to its nearest parameter. Probe sets for a fixed seed
    are nested in ``n_probe``, so the estimate is nondecreasing in it.
    """
    if n_probe < 1:
        raise InvalidArgumentError(f"need n_probe >= 1, got {n_probe}")
    rng = np.random.default_rng(seed)
    probes = rng.standard_normal((n_probe, ps.dim_d + 1))
    probes /= np.linalg.norm(probes, axis=1, keepdims=True)
    worst = -np.inf
    for start in range(0, n_probe, chunk):
        dots = probes[start:start + chunk] @ ps.points.T
        nearest = np.max(dots, axis=1)
        worst = max(worst, float(np.arccos(np.clip(np.min(nearest), -1.0, 1.0))))
    return worst


def uniformity_diagnostics(ps: ParamSet, n_probe: int = 100_000, seed: int = 0,
                           s: float | None = None) -> UniformityDiagnostics:
    s = float(ps.dim_d - 1 if s is None else s)
    return UniformityDiagnostics(
        mesh_norm_estimate=estimate_mesh_norm(ps, n_probe, seed),
        separation=separation_distance(ps),
        riesz_energy=riesz_energy(ps, s),
        n=ps.n,
    )


def hyperplane_range(ps: ParamSet) -> tuple[np.ndarray, np.ndarray]:
    """Min and max of w . x + b over the cube [-1, 1]^d, per neuron."""
    spread = np.sum(np.abs(ps.weights), axis=1)
    return ps.biases - spread, ps.biases + spread


def active_mask(ps: ParamSet) -> np.ndarray:
    lo, hi = hyperplane_range(ps)
    return (lo <= 0.0) & (hi >= 0.0)


def filter_active_neurons(ps: ParamSet) -> ParamSet:
    """Drop neurons whose hyperplane misses the cube [-1, 1]^d (order kept)."""
    mask = active_mask(ps)
    if not np.any(mask):
        raise InvalidArgumentError("no neuron hyperplane meets the domain")
    return ParamSet(ps.dim_d, ps.points[mask], ps.seed)


def active_fraction(d: int, samples: int = 200_000, seed: int = 12345) -> float:
    """Probability that a uniform sphere point's hyperplane meets the cube."""
    g = sample_gaussian_sphere(samples, d, seed)
    return float(np.mean(active_mask(g)))
