"""L2 projection sweeps over k for d=2 and d=3 (relative error and rate tables)."""
from dataclasses import dataclass

from _common import parse_settings, print_table, sweep


@dataclass
class Settings:
    preset: str = "full"
    ks: tuple = (1, 2, 3, 4)
    dims: tuple = (2, 3)
    ns_2d: tuple = (100, 202, 400, 801, 1604, 3202)
    ns_3d: tuple = (235, 468, 942, 1871)
    seed: int = 0
    out_dir: str = "results/l2"


def main():
    s = parse_settings(Settings, __doc__)
    for d in s.dims:
        for k in s.ks:
            rep = sweep(s.out_dir, f"l2_d{d}_k{k}", driver="l2-projection", d=d, k=k,
                        ns=s.ns_2d if d == 2 else s.ns_3d, preset=s.preset, seeds=(s.seed,))
            print_table(rep)


if __name__ == "__main__":
    main()
