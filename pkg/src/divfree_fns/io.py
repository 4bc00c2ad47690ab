"""Plain-text file formats for parameters, coefficients, fields and nodes."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .features import DivFreeBasis
from .problems import SampledField
from .quadrature import QuadratureRule
from .sphere import ParamSet

FLOAT_FMT = "%.17g"


def _ensure_parent(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _read_header(path, expected: int) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != expected:
            raise InvalidArgumentError(f"{path}: header must have {expected} fields")
        body = np.loadtxt(fh, ndmin=2)
    return header, body


def write_params(ps: ParamSet, path) -> None:
    path = _ensure_parent(path)
    with open(path, "w") as fh:
        fh.write(f"{ps.dim_d} {ps.n} {ps.seed}\n")
        np.savetxt(fh, ps.points, fmt=FLOAT_FMT)


def read_params(path) -> ParamSet:
    header, body = _read_header(path, 3)
    d, n, seed = (int(h) for h in header)
    if body.shape != (n, d + 1):
        raise InvalidArgumentError(f"{path}: expected {n} rows of {d + 1} values")
    return ParamSet(d, body, seed)


def write_coefficients(basis: DivFreeBasis, coeffs, path) -> None:
    """Header ``P d k n``, then ``ell i j value`` with 1-based indices."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    path = _ensure_parent(path)
    with open(path, "w") as fh:
        fh.write(f"{basis.P} {basis.d} {basis.k} {basis.n}\n")
        for p, value in enumerate(coeffs):
            ell, r = divmod(p, basis.n_pairs)
            i, j = basis.pairs[r]
            fh.write(f"{ell + 1} {i + 1} {j + 1} {FLOAT_FMT % value}\n")


def read_coefficients(path, basis: DivFreeBasis | None = None) -> tuple[np.ndarray, dict]:
    header, body = _read_header(path, 4)
    P, d, k, n = (int(h) for h in header)
    meta = {"P": P, "d": d, "k": k, "n": n}
    if body.shape != (P, 4):
        raise InvalidArgumentError(f"{path}: expected {P} rows of 'ell i j value'")
    if basis is not None:
        if (basis.P, basis.d, basis.k, basis.n) != (P, d, k, n):
            raise InvalidArgumentError(f"{path}: header {meta} does not match the basis")
        expect = np.array([(ell + 1, i + 1, j + 1) for ell in range(n) for i, j in basis.pairs])
        if not np.array_equal(body[:, :3].astype(int), expect):
            raise InvalidArgumentError(f"{path}: index columns out of order")
    return body[:, 3].copy(), meta


def write_nodes(rule: QuadratureRule, path, chunk: int = 65536) -> None:
    """Header ``d N`` then ``x_1..x_d w`` (plus a face id on boundary rules)."""
    path = _ensure_parent(path)
    with open(path, "w") as fh:
        fh.write(f"{rule.d} {rule.size}\n")
        for blk in rule.chunks(chunk):
            cols = [blk.nodes, blk.weights[:, None]]
            fmt = [FLOAT_FMT] * (rule.d + 1)
            if blk.faces is not None:
                cols.append(blk.faces[:, None])
                fmt.append("%d")
            np.savetxt(fh, np.hstack(cols), fmt=fmt)


def read_nodes(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    header, body = _read_header(path, 2)
    d, N = (int(h) for h in header)
    if body.shape[0] != N or body.shape[1] not in (d + 1, d + 2):
        raise InvalidArgumentError(f"{path}: expected {N} rows of {d + 1} or {d + 2} values")
    faces = body[:, d + 1].astype(int) if body.shape[1] == d + 2 else None
    return body[:, :d], body[:, d], faces


def write_reference_field(path, points, values, jacobians=None) -> None:
    points = np.atleast_2d(points)
    d = points.shape[1]
    cols = [points, np.asarray(values).reshape(-1, d)]
    if jacobians is not None:
        cols.append(np.asarray(jacobians).reshape(-1, d * d))
    path = _ensure_parent(path)
    with open(path, "w") as fh:
        fh.write(f"{d} {points.shape[0]}\n")
        np.savetxt(fh, np.hstack(cols), fmt=FLOAT_FMT)


def read_reference_field(path) -> SampledField:
    """Rows ``x.. u.. [J11..Jdd]``; the Jacobian columns are optional."""
    header, body = _read_header(path, 2)
    d, N = (int(h) for h in header)
    if body.shape[0] != N or body.shape[1] not in (2 * d, 2 * d + d * d):
        raise InvalidArgumentError(
            f"{path}: expected {N} rows of {2 * d} or {2 * d + d * d} values")
    jac = body[:, 2 * d:] if body.shape[1] > 2 * d else None
    return SampledField(body[:, :d], body[:, d:2 * d], jac, name=str(path))


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
