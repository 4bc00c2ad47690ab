"""Normal equations vs compressed SVD: condition numbers and error saturation at large k."""
from dataclasses import dataclass
from pathlib import Path

from _common import parse_settings, sweep
from divfree_fns.assembly import assemble_compressed, assemble_normal, condition_number
from divfree_fns.config import QUADRATURE_PRESETS
from divfree_fns.features import DivFreeBasis
from divfree_fns.problems import build_problem
from divfree_fns.quadrature import build_volume_rule
from divfree_fns.sweep import generate_params


@dataclass
class Settings:
    preset: str = "full"
    ks: tuple = (3, 4)
    ns: tuple = (100, 202, 400, 801, 1604, 3202)
    cond_n: int = 400
    seed: int = 0
    out_dir: str = "results/ablation"


def main():
    s = parse_settings(Settings, __doc__)
    nx, order = QUADRATURE_PRESETS[s.preset][2]
    rules = [build_volume_rule(2, nx, order)]
    problem = build_problem("l2-projection", 2)
    lines = ["k,n,cond_normal,cond_tall,ratio"]
    for k in s.ks:
        basis = DivFreeBasis(generate_params(s.cond_n, 2, s.seed)[0], k)
        ka = condition_number(assemble_normal(basis, problem.blocks, rules)[0])
        kh = condition_number(assemble_compressed(basis, problem.blocks, rules)[0])
        lines.append(f"{k},{basis.n},{ka:.6e},{kh:.6e},{ka / kh ** 2:.4f}")
        print(f"k={k} n={basis.n}: kappa(A)={ka:.3e} kappa(H)^2={kh ** 2:.3e}")
        for solver in ("direct", "normal"):
            rep = sweep(s.out_dir, f"l2_d2_k{k}_{solver}", driver="l2-projection", d=2, k=k,
                        ns=s.ns, solver=solver, preset=s.preset, seeds=(s.seed,))
            print("  " + solver + ": " + " ".join(f"{e:.3e}" for e in rep.series()[1]))
    Path(s.out_dir).mkdir(parents=True, exist_ok=True)
    (Path(s.out_dir) / "conditioning.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
