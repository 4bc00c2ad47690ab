"""Experiment configuration and its ``key = value`` file format."""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass

from .assembly import DEFAULT_RCOND
from .errors import InvalidArgumentError
from .problems import DRIVERS, LID_PROFILES, default_eps
from .quadrature import DEFAULT_CHUNK, DEFAULT_MEMORY_BUDGET

# (nx, order) per dimension; "desk" is the reduced preset used for CI runs
QUADRATURE_PRESETS = {"full": {2: (200, 5), 3: (40, 3)}, "desk": {2: (100, 3), 3: (24, 3)}}
N_MODES = ("active", "requested")


@dataclass(frozen=True)
class ExperimentConfig:
    driver: str = "l2-projection"
    d: int = 2
    k: int = 2
    ns: tuple[int, ...] = (100, 202, 400, 801, 1604, 3202)
    n_mode: str = "active"
    omega: float = math.pi
    nu: float = 1.0
    eps: float | None = None
    profile: str = "smooth"
    preset: str = "full"
    nx: int | None = None
    order: int | None = None
    chunk: int = DEFAULT_CHUNK
    solver: str | None = None
    rcond: float = DEFAULT_RCOND
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    seeds: tuple[int, ...] = (0,)
    refine_iters: int = 500
    trim: float | None = None
    reference: str | None = None
    audit_points: int = 100_000
    out: str = "results/sweep.csv"
    save_coeffs: str | None = None

    def __post_init__(self):
        bad = []
        if self.driver not in DRIVERS:
            bad.append(f"driver must be one of {DRIVERS}")
        if self.d not in (2, 3):
            bad.append("d must be 2 or 3")
        if self.k < 1:
            bad.append("k must be >= 1")
        if self.driver != "l2-projection" and self.k < 2:
            bad.append("Stokes and cavity drivers need k >= 2")
        if self.driver == "lid-cavity" and self.d != 2:
            bad.append("the cavity driver is two-dimensional")
        if not self.ns or any(n < 1 for n in self.ns):
            bad.append("ns must be a nonempty list of positive counts")
        elif any(b <= a for a, b in zip(self.ns, self.ns[1:])):
            bad.append("ns must be strictly increasing")
        if self.n_mode not in N_MODES:
            bad.append(f"n_mode must be one of {N_MODES}")
        if self.profile not in LID_PROFILES:
            bad.append(f"profile must be one of {LID_PROFILES}")
        if self.solver not in (None, "normal", "direct"):
            bad.append("solver must be normal or direct")
        for name in ("omega", "nu", "rcond"):
            if not getattr(self, name) > 0:
                bad.append(f"{name} must be positive")
        if self.eps is not None and not self.eps > 0:
            bad.append("eps must be positive")
        if self.preset not in QUADRATURE_PRESETS:
            bad.append(f"preset must be one of {tuple(QUADRATURE_PRESETS)}")
        for name in ("chunk", "memory_budget", "audit_points"):
            if getattr(self, name) < 1:
                bad.append(f"{name} must be >= 1")
        for name in ("nx", "order"):
            if getattr(self, name) is not None and getattr(self, name) < 1:
                bad.append(f"{name} must be >= 1")
        if self.refine_iters < 0:
            bad.append("refine_iters must be >= 0")
        if not self.seeds:
            bad.append("seeds must be nonempty")
        if self.trim is not None and not 0 < self.trim <= 1:
            bad.append("trim must lie in (0, 1]")
        if self.reference is not None and self.driver != "lid-cavity":
            bad.append("an imported reference applies to the cavity driver only")
        if bad:
            raise InvalidArgumentError("; ".join(bad))

    @property
    def resolved_nx(self) -> int:
        return self.nx if self.nx is not None else QUADRATURE_PRESETS[self.preset][self.d][0]

    @property
    def resolved_order(self) -> int:
        if self.order is not None:
            return self.order
        return QUADRATURE_PRESETS[self.preset][self.d][1]

    @property
    def resolved_solver(self) -> str:
        if self.solver is not None:
            return self.solver
        return "direct" if self.d == 2 else "normal"

    @property
    def resolved_eps(self) -> float:
        return self.eps if self.eps is not None else default_eps(self.d)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in re.split(r"[,\s]+", text.strip()) if t)


def parse_bytes(text) -> int:
    """Byte count from ``123``, ``512M``, ``2G`` or ``1.5GiB``."""
    if isinstance(text, int):
        return text
    m = re.fullmatch(r"\s*([0-9.]+)\s*([kKmMgGtT]?)(i?[bB])?\s*", str(text))
    if not m:
        raise InvalidArgumentError(f"cannot parse byte count {text!r}")
    scale = {"": 1, "k": 1 << 10, "m": 1 << 20, "g": 1 << 30, "t": 1 << 40}[m.group(2).lower()]
    return int(float(m.group(1)) * scale)


def _optional(conv):
    return lambda text: None if text.strip().lower() == "none" else conv(text)


_PARSERS = {
    "driver": str, "d": int, "k": int, "ns": _int_tuple, "n_mode": str,
    "omega": float, "nu": float, "eps": _optional(float), "profile": str,
    "preset": str, "nx": _optional(int), "order": _optional(int), "chunk": int, "solver": _optional(str),
    "rcond": float, "memory_budget": parse_bytes, "seeds": _int_tuple,
    "refine_iters": int, "trim": _optional(float), "reference": _optional(str),
    "audit_points": int, "out": str, "save_coeffs": _optional(str),
}


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(cfg: ExperimentConfig) -> str:
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n"
                   for f in dataclasses.fields(cfg))


def parse_overrides(text: str) -> dict:
    """Parsed ``key = value`` pairs; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _PARSERS:
            raise InvalidArgumentError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise InvalidArgumentError(f"line {lineno}: bad value for {key}: {exc}") from None
    return out


def parse(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = base if base is not None else ExperimentConfig()
    return base.replace(**parse_overrides(text))


def load(path, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        values = parse_overrides(fh.read())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig().replace(**values)
