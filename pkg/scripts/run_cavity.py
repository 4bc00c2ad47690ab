"""Lid-driven cavity sweeps for both lid profiles, measured against the finest solve
or an imported reference field."""
from dataclasses import dataclass

from _common import parse_settings, print_table, sweep


@dataclass
class Settings:
    preset: str = "full"
    ks: tuple = (2, 3)
    profiles: tuple = ("smooth", "const")
    ns: tuple = (100, 202, 400, 801, 1604, 3202)
    eps: float = 1.0
    reference: str = ""
    seed: int = 0
    out_dir: str = "results/cavity"


def main():
    s = parse_settings(Settings, __doc__)
    for profile in s.profiles:
        for k in s.ks:
            rep = sweep(s.out_dir, f"cavity_{profile}_k{k}", driver="lid-cavity", d=2, k=k,
                        ns=s.ns, eps=s.eps, profile=profile, preset=s.preset,
                        reference=s.reference or None, seeds=(s.seed,))
            print_table(rep)
            print_table(rep, "rel_h1")


if __name__ == "__main__":
    main()
