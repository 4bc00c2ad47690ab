"""Shared flag handling for the experiment scripts."""
import argparse
import dataclasses
import logging
from pathlib import Path

from divfree_fns.config import ExperimentConfig
from divfree_fns.sweep import run_sweep


def parse_settings(cls, description: str):
    """Flags for every field of the dataclass ``cls``; tuples take comma lists."""
    parser = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        flag = "--" + f.name.replace("_", "-")
        default = f.default
        if isinstance(default, tuple):
            conv = type(default[0]) if default else str
            parser.add_argument(flag, default=default,
                                type=lambda s, c=conv: tuple(c(v) for v in s.split(",")))
        elif isinstance(default, bool):
            parser.add_argument(flag, action="store_true", default=default)
        else:
            parser.add_argument(flag, default=default, type=type(default))
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    return cls(**vars(args))


def sweep(out_dir: str, name: str, **kw):
    cfg = ExperimentConfig(out=str(Path(out_dir) / f"{name}.csv"), **kw)
    report = run_sweep(cfg)
    print(f"{name}: wrote {report.csv_path}")
    return report


def print_table(report, err: str = "rel_l2"):
    rate = "rate_l2" if err == "rel_l2" else "rate_h1"
    for r in report.rows:
        value = getattr(r, err)
        rr = getattr(r, rate)
        print(f"  n={r.n:>5}  {err}={value if value is None else f'{value:.3e}'}"
              f"  rate={'-' if rr is None else f'{rr:.2f}'}  {r.status}")
