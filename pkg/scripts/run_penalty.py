"""Stokes sweeps across boundary penalty values: rates and boundary residuals."""
from dataclasses import dataclass

from _common import parse_settings, sweep


@dataclass
class Settings:
    preset: str = "full"
    k: int = 4
    eps_values: tuple = (0.01, 1.0, 100.0)
    ns: tuple = (202, 400, 801, 1604)
    seed: int = 0
    out_dir: str = "results/penalty"


def main():
    s = parse_settings(Settings, __doc__)
    for eps in s.eps_values:
        rep = sweep(s.out_dir, f"stokes_d2_k{s.k}_eps{eps:g}", driver="stokes-manufactured",
                    d=2, k=s.k, ns=s.ns, eps=eps, preset=s.preset, seeds=(s.seed,))
        for r in rep.rows:
            print(f"  eps={eps:g} n={r.n:>5} rel_l2={r.rel_l2:.3e} "
                  f"rate={'-' if r.rate_l2 is None else f'{r.rate_l2:.2f}'} "
                  f"bdy={r.bdy_residual:.3e}")


if __name__ == "__main__":
    main()
