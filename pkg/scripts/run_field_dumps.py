"""Grid dumps of solved fields and pointwise errors for plotting."""
from dataclasses import dataclass
from pathlib import Path

from _common import parse_settings, sweep
from divfree_fns.problems import target_l2_2d, target_stokes_2d
from divfree_fns.sweep import field_dump


@dataclass
class Settings:
    preset: str = "full"
    k: int = 2
    n: int = 801
    resolution: int = 128
    seed: int = 0
    out_dir: str = "results/fields"


def main():
    s = parse_settings(Settings, __doc__)
    cases = (("l2-projection", target_l2_2d), ("stokes-manufactured", target_stokes_2d),
             ("lid-cavity", None))
    for driver, make_target in cases:
        rep = sweep(s.out_dir, f"{driver}_k{s.k}_n{s.n}", driver=driver, d=2, k=s.k,
                    ns=(s.n,), preset=s.preset, seeds=(s.seed,))
        row = rep.rows[0]
        if row.coeffs is None:
            print(f"{driver}: {row.status}")
            continue
        target = make_target(rep.config.omega) if make_target else None
        path = Path(s.out_dir) / f"{driver}_k{s.k}_n{row.n}_grid.txt"
        field_dump(row.coeffs, row.basis, s.resolution, target, path)
        print(f"{driver}: wrote {path}")


if __name__ == "__main__":
    main()
