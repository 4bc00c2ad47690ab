import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from divfree_fns import config as cfgmod
from divfree_fns.cli import main, recompute_rates
from divfree_fns.config import ExperimentConfig
from divfree_fns.errors import InvalidArgumentError
from divfree_fns.features import DivFreeBasis
from divfree_fns.io import (read_coefficients, read_csv_rows, read_nodes, read_params,
                            read_reference_field, write_coefficients, write_params,
                            write_reference_field)
from divfree_fns.problems import target_l2_2d
from divfree_fns.sphere import sample_gaussian_sphere
from divfree_fns.sweep import field_dump, run_sweep

from conftest import small_basis

TINY = ["--nx", "4", "--order", "2", "--refine-iters", "20", "--audit-points", "200"]


def tiny_config(tmp_path, **kw) -> ExperimentConfig:
    base = dict(ns=(6, 12, 24), nx=4, order=2, refine_iters=20, audit_points=200,
                out=str(tmp_path / "sweep.csv"))
    base.update(kw)
    return ExperimentConfig(**base)


configs = st.builds(
    ExperimentConfig,
    driver=st.sampled_from(["l2-projection", "stokes-manufactured"]),
    d=st.sampled_from([2, 3]), k=st.integers(2, 5),
    ns=st.lists(st.integers(1, 5000), min_size=1, max_size=6, unique=True).map(
        lambda v: tuple(sorted(v))),
    omega=st.floats(1e-3, 1e3), eps=st.one_of(st.none(), st.floats(1e-6, 1e6)),
    nx=st.one_of(st.none(), st.integers(1, 300)), preset=st.sampled_from(["full", "desk"]),
    solver=st.sampled_from([None, "normal", "direct"]), rcond=st.floats(1e-16, 1e-2),
    seeds=st.lists(st.integers(0, 10 ** 6), min_size=1, max_size=3).map(tuple),
    trim=st.one_of(st.none(), st.floats(0.01, 1.0)), memory_budget=st.integers(1, 2 ** 40))


@given(cfg=configs)
def test_config_round_trip(cfg):
    assert cfgmod.parse(cfgmod.serialize(cfg)) == cfg


def test_config_parse_details():
    cfg = cfgmod.parse("# sweep\nk = 3   # cubic\nns = 10, 20\nmemory-budget = 2G\neps = none\n")
    assert (cfg.k, cfg.ns, cfg.memory_budget, cfg.eps) == (3, (10, 20), 2 << 30, None)
    with pytest.raises(InvalidArgumentError, match="line 2"):
        cfgmod.parse("k = 2\nbogus = 1\n")
    with pytest.raises(InvalidArgumentError, match="line 1"):
        cfgmod.parse("k = two\n")
    with pytest.raises(InvalidArgumentError, match="expected"):
        cfgmod.parse("k 2\n")
    assert cfgmod.parse_bytes("512M") == 512 << 20
    assert cfgmod.parse_bytes("1.5GiB") == 3 << 29
    with pytest.raises(InvalidArgumentError):
        cfgmod.parse_bytes("lots")


@pytest.mark.parametrize("bad", [dict(d=4), dict(k=0), dict(ns=(20, 10)), dict(ns=()),
                                 dict(driver="stokes-manufactured", k=1),
                                 dict(driver="lid-cavity", d=3), dict(reference="x.txt"),
                                 dict(trim=0.0), dict(eps=-1.0), dict(solver="lu"),
                                 dict(preset="huge"), dict(n_mode="both")])
def test_config_rejects(bad):
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(**bad)


def test_config_resolution():
    cfg = ExperimentConfig()
    assert (cfg.resolved_nx, cfg.resolved_order, cfg.resolved_solver) == (200, 5, "direct")
    cfg = ExperimentConfig(d=3, preset="desk", order=4)
    assert (cfg.resolved_nx, cfg.resolved_order, cfg.resolved_solver) == (24, 4, "normal")


def test_params_and_coefficients_round_trip(tmp_path, rng):
    ps = sample_gaussian_sphere(9, 3, seed=4)
    write_params(ps, tmp_path / "p.txt")
    back = read_params(tmp_path / "p.txt")
    assert np.array_equal(back.points, ps.points) and (back.dim_d, back.seed) == (3, 4)
    basis = DivFreeBasis(ps, 3)
    coeffs = rng.standard_normal(basis.P)
    write_coefficients(basis, coeffs, tmp_path / "c.txt")
    got, meta = read_coefficients(tmp_path / "c.txt", basis)
    assert np.array_equal(got, coeffs) and meta == {"P": 27, "d": 3, "k": 3, "n": 9}
    first = (tmp_path / "c.txt").read_text().splitlines()[1].split()
    assert first[:3] == ["1", "1", "2"]  # 1-based neuron and coordinate indices
    with pytest.raises(InvalidArgumentError):
        read_coefficients(tmp_path / "c.txt", DivFreeBasis(ps, 2))


def test_reference_field_round_trip(tmp_path, rng):
    x = rng.uniform(-1, 1, (7, 2))
    u, J = rng.standard_normal((7, 2)), rng.standard_normal((7, 2, 2))
    write_reference_field(tmp_path / "r.txt", x, u, J)
    ref = read_reference_field(tmp_path / "r.txt")
    assert np.array_equal(ref.evaluate(x[::-1]), u[::-1])
    assert np.array_equal(ref.jacobian(x), J)
    with pytest.raises(InvalidArgumentError):
        ref.evaluate(np.array([[2.0, 2.0]]))


def test_export_nodes_counts_and_bytes(tmp_path):
    argv = ["export-nodes", "--d", "2", "--nx", "2", "--order", "2"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    x, w, faces = read_nodes(tmp_path / "a_volume.txt")
    assert x.shape == (16, 2) and faces is None and math.isclose(w.sum(), 4.0, rel_tol=1e-14)
    x, w, faces = read_nodes(tmp_path / "a_boundary.txt")
    assert x.shape == (16, 2) and math.isclose(w.sum(), 8.0, rel_tol=1e-14)
    assert sorted(set(faces)) == [0, 1, 2, 3]
    for part in ("volume", "boundary"):
        assert ((tmp_path / f"a_{part}.txt").read_bytes()
                == (tmp_path / f"b_{part}.txt").read_bytes())


def test_field_dump_rows(tmp_path, rng):
    basis = small_basis(n=5)
    table = field_dump(rng.standard_normal(basis.P), basis, 2, target_l2_2d(1.0),
                       tmp_path / "f.txt")
    assert table.shape == (4, 7)
    assert np.array_equal(np.loadtxt(tmp_path / "f.txt"), table)


def test_sweep_is_deterministic_and_rates_consistent(tmp_path):
    a = run_sweep(tiny_config(tmp_path, out=str(tmp_path / "a.csv")))
    b = run_sweep(tiny_config(tmp_path, out=str(tmp_path / "b.csv")))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.n_failed == 0 and (tmp_path / "a.json").exists()
    rows = read_csv_rows(tmp_path / "a.csv")
    assert rows[0]["rate_l2"] == "" and rows[1]["rate_l2"] != ""
    for old, new in zip(rows, recompute_rates(rows)):
        for key in ("rate_l2", "rate_h1"):
            assert (old[key] == new[key] == "") or float(old[key]) == pytest.approx(float(new[key]))
    assert all(float(r["div_audit"]) <= 1e-12 for r in rows)


def test_single_entry_schedule_has_no_rates(tmp_path):
    rep = run_sweep(tiny_config(tmp_path, ns=(10,)))
    assert len(rep.rows) == 1 and rep.rows[0].rate_l2 is None


def test_cli_sweep_and_dump_field(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["stokes", "--ns", "6,12", "--out", str(out),
                 "--save-coeffs", str(tmp_path / "c")] + TINY) == 0
    rows = read_csv_rows(out)
    assert [r["status"] for r in rows] == ["ok", "ok"]
    n = rows[-1]["n"]
    stem = tmp_path / "c" / f"stokes-manufactured_d2_k2_n{n}_s0"
    assert main(["dump-field", "--params", f"{stem}_params.txt", "--coeffs",
                 f"{stem}_coeffs.txt", "--resolution", "3", "--target", "stokes",
                 "--out", str(tmp_path / "grid.txt")]) == 0
    assert np.loadtxt(tmp_path / "grid.txt").shape == (9, 7)
    assert main(["rates", str(out), "--out", str(tmp_path / "r.csv")]) == 0
    with open(tmp_path / "r.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2


def test_cli_gen_params(tmp_path):
    assert main(["gen-params", "--n", "40", "--d", "2", "--refine-iters", "10", "--filter",
                 "--out", str(tmp_path / "p.txt")]) == 0
    ps = read_params(tmp_path / "p.txt")
    assert 0 < ps.n <= 40


def test_cli_exit_codes(tmp_path):
    assert main(["stokes", "--k", "1", "--out", str(tmp_path / "x.csv")]) == 1
    assert main(["project", "--config", str(tmp_path / "missing.conf")]) == 1
    (tmp_path / "bad.conf").write_text("k = 2\nwhat = 3\n")
    assert main(["project", "--config", str(tmp_path / "bad.conf")]) == 1
    # the larger row cannot fit the memory budget; the sweep continues and reports it
    code = main(["project", "--ns", "3,150", "--memory-budget", "100K",
                 "--out", str(tmp_path / "p.csv")] + TINY)
    assert code == 2
    rows = read_csv_rows(tmp_path / "p.csv")
    assert rows[0]["status"] == "ok" and rows[1]["status"].startswith("failed: ResourceBudget")


def test_cli_config_file_with_flag_override(tmp_path):
    (tmp_path / "run.conf").write_text("ns = 6, 12\nk = 3\nnx = 4\norder = 2\n"
                                       "refine_iters = 20\naudit_points = 100\n")
    out = tmp_path / "o.csv"
    assert main(["project", "--config", str(tmp_path / "run.conf"), "--k", "2",
                 "--out", str(out)]) == 0
    assert {r["k"] for r in read_csv_rows(out)} == {"2"}
