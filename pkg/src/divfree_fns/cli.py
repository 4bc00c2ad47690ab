"""Command-line entry point: ``divfree-fns <subcommand> ...``.

Exit status is 0 on success, 2 when some sweep rows failed and 1 on a
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .errors import InvalidArgumentError
from .features import DivFreeBasis
from .io import read_coefficients, read_csv_rows, read_params, write_params
from .metrics import empirical_rate
from .problems import target_l2_2d, target_l2_3d, target_stokes_2d, target_stokes_3d
from .sphere import filter_active_neurons, refine_quasi_uniform, sample_gaussian_sphere
from .sweep import export_quadrature_nodes, field_dump, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2
DRIVER_OF = {"project": "l2-projection", "stokes": "stokes-manufactured",
             "cavity": "lid-cavity"}


def _add_sweep_flags(p: argparse.ArgumentParser, driver: str) -> None:
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    sched = p.add_mutually_exclusive_group()
    sched.add_argument("--ns", help="comma-separated neuron counts, increasing")
    sched.add_argument("--n", type=int, help="a single neuron count")
    p.add_argument("--n-mode", choices=cfgmod.N_MODES,
                   help="count neurons after the hyperplane filter (active) or before")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma-separated seeds; repeats the sweep per seed")
    p.add_argument("--refine-iters", type=int)
    p.add_argument("--preset", choices=tuple(cfgmod.QUADRATURE_PRESETS),
                   help="quadrature size when --nx/--order are not given")
    p.add_argument("--nx", type=int, help="cells per axis of the composite rule")
    p.add_argument("--order", type=int, help="Gauss points per cell and axis")
    p.add_argument("--chunk", type=int, help="quadrature nodes per streamed chunk")
    p.add_argument("--solver", choices=("normal", "direct"))
    p.add_argument("--rcond", type=float)
    p.add_argument("--memory-budget", help="bytes, or with a K/M/G suffix")
    p.add_argument("--omega", type=float)
    if driver != "l2-projection":
        p.add_argument("--nu", type=float)
        p.add_argument("--eps", type=float, help="boundary penalty parameter")
    if driver == "lid-cavity":
        p.add_argument("--profile", choices=("const", "smooth"))
        p.add_argument("--reference", help="reference field file (default: finest row)")
    p.add_argument("--trim", type=float, help="also report errors on [-t, t]^d")
    p.add_argument("--audit-points", type=int)
    p.add_argument("--out", help="CSV path; a JSON manifest is written next to it")
    p.add_argument("--save-coeffs", help="directory for per-row parameter/coefficient files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divfree-fns", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-params", help="sample and refine neuron parameters")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--refine-iters", type=int, default=500)
    g.add_argument("--filter", action="store_true",
                   help="drop neurons whose hyperplane misses the cube")
    g.add_argument("--out", required=True)

    for name, driver in DRIVER_OF.items():
        _add_sweep_flags(sub.add_parser(name, help=f"{driver} sweep over n"), driver)

    dump = sub.add_parser("dump-field", help="evaluate a solved field on a uniform grid")
    dump.add_argument("--params", required=True)
    dump.add_argument("--coeffs", required=True)
    dump.add_argument("--resolution", type=int, default=64)
    dump.add_argument("--target", choices=("none", "l2", "stokes"), default="none")
    dump.add_argument("--omega", type=float, default=None)
    dump.add_argument("--out", required=True)

    ex = sub.add_parser("export-nodes", help="write volume and boundary quadrature nodes")
    ex.add_argument("--config")
    ex.add_argument("--d", type=int)
    ex.add_argument("--preset", choices=tuple(cfgmod.QUADRATURE_PRESETS))
    ex.add_argument("--nx", type=int)
    ex.add_argument("--order", type=int)
    ex.add_argument("--out", required=True, help="path prefix")

    r = sub.add_parser("rates", help="recompute empirical rates from a sweep CSV")
    r.add_argument("csv")
    r.add_argument("--out", help="write the recomputed table here")
    return parser


_FLAG_KEYS = ("d", "k", "n_mode", "refine_iters", "preset", "nx", "order", "chunk", "solver",
              "rcond", "omega", "nu", "eps", "profile", "reference", "trim", "audit_points", "out",
              "save_coeffs")


def config_from_args(args, driver: str) -> cfgmod.ExperimentConfig:
    overrides = {key: getattr(args, key, None) for key in _FLAG_KEYS}
    if getattr(args, "ns", None):
        overrides["ns"] = cfgmod._int_tuple(args.ns)
    if getattr(args, "n", None) is not None:
        overrides["ns"] = (args.n,)
    if getattr(args, "seeds", None):
        overrides["seeds"] = cfgmod._int_tuple(args.seeds)
    elif getattr(args, "seed", None) is not None:
        overrides["seeds"] = (args.seed,)
    if getattr(args, "memory_budget", None) is not None:
        overrides["memory_budget"] = cfgmod.parse_bytes(args.memory_budget)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    overrides["driver"] = driver
    if args.config:
        return cfgmod.load(args.config, **overrides)
    return cfgmod.ExperimentConfig().replace(**overrides)


def _fmt(value: str, spec: str = ".4e") -> str:
    return format(float(value), spec) if value not in ("", None) else "-"


def _print_rows(rows) -> None:
    print(f"{'n':>6} {'P':>7} {'rel_l2':>11} {'rate':>6} {'rel_h1':>11} {'rate':>6} "
          f"{'bdy_res':>11} {'cond':>10}  status")
    for r in rows:
        row = r.csv_row()
        print(f"{row['n']:>6} {row['P'] or '-':>7} {_fmt(row['rel_l2']):>11} "
              f"{_fmt(row['rate_l2'], '.2f'):>6} {_fmt(row['rel_h1']):>11} "
              f"{_fmt(row['rate_h1'], '.2f'):>6} {_fmt(row['bdy_residual']):>11} "
              f"{_fmt(row['cond'], '.2e'):>10}  {row['status']}")


def cmd_sweep(args, driver: str) -> int:
    cfg = config_from_args(args, driver)
    report = run_sweep(cfg)
    _print_rows(report.rows)
    print(f"wrote {report.csv_path} and {report.manifest_path}")
    return EXIT_PARTIAL if report.n_failed else EXIT_OK


def cmd_gen_params(args) -> int:
    ps = refine_quasi_uniform(sample_gaussian_sphere(args.n, args.d, args.seed),
                              max_iters=args.refine_iters)
    if args.filter:
        ps = filter_active_neurons(ps)
    write_params(ps, args.out)
    print(f"wrote {ps.n} parameters to {args.out}")
    return EXIT_OK


def cmd_dump_field(args) -> int:
    coeffs, meta = read_coefficients(args.coeffs)
    basis = DivFreeBasis(read_params(args.params), meta["k"])
    read_coefficients(args.coeffs, basis)  # header and index check against the basis
    target = None
    if args.target != "none":
        omega = args.omega if args.omega is not None else cfgmod.ExperimentConfig().omega
        makers = {("l2", 2): target_l2_2d, ("l2", 3): target_l2_3d,
                  ("stokes", 2): target_stokes_2d, ("stokes", 3): target_stokes_3d}
        if (args.target, basis.d) not in makers:
            raise InvalidArgumentError(f"no {args.target} target in d={basis.d}")
        target = makers[(args.target, basis.d)](omega)
    table = field_dump(coeffs, basis, args.resolution, target, args.out)
    print(f"wrote {table.shape[0]} grid rows to {args.out}")
    return EXIT_OK


def cmd_export_nodes(args) -> int:
    overrides = {k: getattr(args, k) for k in ("d", "preset", "nx", "order") if getattr(args, k)}
    cfg = (cfgmod.load(args.config, **overrides) if args.config
           else cfgmod.ExperimentConfig().replace(**overrides))
    vol, bdy = export_quadrature_nodes(cfg, args.out)
    print(f"wrote {vol} and {bdy}")
    return EXIT_OK


def recompute_rates(rows: list[dict]) -> list[dict]:
    """Rates from each row and its predecessor within the same seed."""
    out = []
    prev: dict[tuple, dict] = {}
    for row in rows:
        row = dict(row)
        for err, rate in (("rel_l2", "rate_l2"), ("rel_h1", "rate_h1")):
            key = (row.get("seed"), err)
            row[rate] = ""
            if row.get(err, "") == "":
                prev.pop(key, None)
                continue
            if key in prev:
                n0, e0 = prev[key]
                n1, e1 = float(row["n"]), float(row[err])
                if n1 > n0 and e0 > 0 and e1 > 0:
                    row[rate] = "%.17g" % empirical_rate([n0, n1], [e0, e1])[0]
            prev[key] = (float(row["n"]), float(row[err]))
        out.append(row)
    return out


def cmd_rates(args) -> int:
    rows = recompute_rates(read_csv_rows(args.csv))
    print(f"{'seed':>5} {'n':>6} {'rel_l2':>11} {'rate_l2':>8} {'rel_h1':>11} {'rate_h1':>8}")
    for r in rows:
        print(f"{r['seed']:>5} {r['n']:>6} {_fmt(r['rel_l2']):>11} "
              f"{_fmt(r['rate_l2'], '.3f'):>8} {_fmt(r['rel_h1']):>11} "
              f"{_fmt(r['rate_h1'], '.3f'):>8}")
    if args.out and rows:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in DRIVER_OF:
            return cmd_sweep(args, DRIVER_OF[args.command])
        handler = {"gen-params": cmd_gen_params, "dump-field": cmd_dump_field,
                   "export-nodes": cmd_export_nodes, "rates": cmd_rates}[args.command]
        return handler(args)
    except (ValueError, OSError) as exc:  # bad flags, config values or input files
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
