"""Manufactured Stokes sweeps: L2 and H1-seminorm errors against the exact velocity."""
from dataclasses import dataclass

from _common import parse_settings, print_table, sweep


@dataclass
class Settings:
    preset: str = "full"
    ks: tuple = (2, 3, 4)
    dims: tuple = (2, 3)
    ns_2d: tuple = (202, 400, 801, 1604, 3202)
    ns_3d: tuple = (235, 468, 942, 1871)
    nu: float = 1.0
    eps: float = 1.0
    seed: int = 0
    out_dir: str = "results/stokes"


def main():
    s = parse_settings(Settings, __doc__)
    for d in s.dims:
        for k in s.ks:
            rep = sweep(s.out_dir, f"stokes_d{d}_k{k}", driver="stokes-manufactured", d=d, k=k,
                        ns=s.ns_2d if d == 2 else s.ns_3d, nu=s.nu, eps=s.eps,
                        preset=s.preset, seeds=(s.seed,))
            print_table(rep, "rel_h1")


if __name__ == "__main__":
    main()
