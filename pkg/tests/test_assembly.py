import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from divfree_fns import assembly
from divfree_fns.assembly import (RowBlockSpec, assemble_compressed, assemble_normal,
                                  assemble_tall, condition_number, solve_lstsq_svd,
                                  solve_normal, solve_system)
from divfree_fns.errors import (AssemblyError, InvalidArgumentError, ResourceBudgetError,
                                SolverError)
from divfree_fns.features import DivFreeBasis, eval_divfree_basis, eval_divfree_basis_jacobian
from divfree_fns.problems import build_problem
from divfree_fns.quadrature import build_boundary_rule, build_volume_rule
from divfree_fns.sphere import ParamSet

from conftest import small_basis


def _rules(blocks, d, nx=3, order=3):
    return [build_volume_rule(d, nx, order) if b.rule_kind == "volume"
            else build_boundary_rule(d, nx, order) for b in blocks]


def _dense_oracle(basis, blocks, rules):
    """Rows built one basis function at a time, no factorization and no chunks."""
    H, y = [], []
    for blk, rule in zip(blocks, rules):
        x, w = rule.nodes, rule.weights
        sw = np.sqrt(blk.scale * w)
        if blk.kind == "volume-gradient":
            cols = [eval_divfree_basis_jacobian(basis, p, x).reshape(len(x), -1)
                    for p in range(basis.P)]
            tgt = (np.zeros((len(x), basis.d ** 2)) if blk.target is None
                   else blk.target(x).reshape(len(x), -1))
        else:
            cols = [eval_divfree_basis(basis, p, x) for p in range(basis.P)]
            if blk.target is None:
                tgt = np.zeros((len(x), basis.d))
            elif blk.kind == "boundary-value":
                tgt = blk.target(x, rule.faces)
            else:
                tgt = blk.target(x)
        H.append((np.stack(cols, axis=2) * sw[:, None, None]).reshape(-1, basis.P))
        y.append((tgt * sw[:, None]).ravel())
    return np.vstack(H), np.concatenate(y)


DRIVER_CASES = [("l2-projection", 2, 2), ("l2-projection", 3, 3),
                ("stokes-manufactured", 2, 2), ("stokes-manufactured", 3, 3),
                ("lid-cavity", 2, 4)]


@pytest.mark.parametrize("kind,d,k", DRIVER_CASES)
def test_normal_matches_dense_oracle(kind, d, k):
    basis = small_basis(n=5, d=d, k=k)
    problem = build_problem(kind, d, eps=0.5, nu=1.5)
    rules = _rules(problem.blocks, d)
    H, y = _dense_oracle(basis, problem.blocks, rules)
    A, b = assemble_normal(basis, problem.blocks, rules, chunk=17)
    assert np.array_equal(A, A.T)
    assert np.abs(A - H.T @ H).max() <= 1e-12 * np.abs(A).max()
    assert np.abs(b - H.T @ y).max() <= 1e-12 * max(np.abs(b).max(), 1e-300)
    Ht, yt = assemble_tall(basis, problem.blocks, rules, chunk=23)
    assert np.allclose(Ht, H, rtol=1e-14, atol=1e-15)
    assert np.allclose(yt, y, rtol=1e-14, atol=1e-15)
    lam = np.linalg.eigvalsh(A)
    assert lam.min() >= -1e-10 * lam.max()


@pytest.mark.parametrize("kind,d,k", DRIVER_CASES)
def test_compressed_system_is_equivalent(kind, d, k, rng):
    basis = small_basis(n=6, d=d, k=k)
    problem = build_problem(kind, d)
    rules = _rules(problem.blocks, d)
    H, y = assemble_tall(basis, problem.blocks, rules)
    Hc, yc, r0 = assemble_compressed(basis, problem.blocks, rules, chunk=11)
    s, sc = np.linalg.svd(H, compute_uv=False), np.linalg.svd(Hc, compute_uv=False)
    assert np.abs(s - sc).max() <= 1e-12 * s[0]
    for _ in range(5):
        a = rng.standard_normal(basis.P)
        full = np.sum((H @ a - y) ** 2)
        short = np.sum((Hc @ a - yc) ** 2) + r0 ** 2
        assert short == pytest.approx(full, rel=1e-10)


def test_tall_dimensions():
    basis = DivFreeBasis(ParamSet(2, np.eye(3)), 2)  # 3 neurons, P = 3
    rule = build_volume_rule(2, 1, 2)  # 4 nodes
    H, y = assemble_tall(basis, [RowBlockSpec("volume-value", 1.0)], [rule])
    assert H.shape == (8, 3) and y.shape == (8,)
    H, y = assemble_tall(basis, [RowBlockSpec("volume-gradient", 1.0)], [rule])
    assert H.shape == (16, 3)


def test_tall_budget_error_names_flag():
    basis = small_basis(n=20)
    rule = build_volume_rule(2, 10, 3)
    with pytest.raises(ResourceBudgetError, match="--memory-budget"):
        assemble_tall(basis, [RowBlockSpec("volume-value", 1.0)], [rule], memory_budget=1000)


def test_projection_of_a_basis_function_onto_itself():
    basis = DivFreeBasis(ParamSet(2, np.array([[0.6, 0.0, 0.8]])), 2)
    blk = RowBlockSpec("volume-value", 1.0, lambda x: eval_divfree_basis(basis, 0, x))
    rule = build_volume_rule(2, 4, 3)
    A, b = assemble_normal(basis, [blk], [rule])
    assert abs(solve_normal(A, b).coefficients[0] - 1.0) <= 1e-10
    rep = solve_system(basis, [blk], [rule], "direct")
    assert abs(rep.coefficients[0] - 1.0) <= 1e-10


def test_zero_target_gives_zero_rhs():
    basis = small_basis()
    A, b = assemble_normal(basis, [RowBlockSpec("volume-value", 1.0)],
                           [build_volume_rule(2, 3, 2)])
    assert np.all(b == 0.0)


@given(chunk=st.integers(1, 400))
def test_chunk_invariance(chunk):
    basis = small_basis(n=6, k=3)
    problem = build_problem("stokes-manufactured", 2)
    rules = _rules(problem.blocks, 2, nx=4)
    A0, b0 = assemble_normal(basis, problem.blocks, rules, chunk=10_000)
    A1, b1 = assemble_normal(basis, problem.blocks, rules, chunk=chunk)
    assert np.abs(A1 - A0).max() <= 1e-12 * np.abs(A0).max()
    assert np.abs(b1 - b0).max() <= 1e-12 * np.abs(b0).max()
    H0, y0 = assemble_tall(basis, problem.blocks, rules, chunk=10_000)
    H1, y1 = assemble_tall(basis, problem.blocks, rules, chunk=chunk)
    # BLAS takes different kernels for 1-row and many-row products, so compare to round-off
    assert np.abs(H1 - H0).max() <= 1e-14 * np.abs(H0).max()
    assert np.abs(y1 - y0).max() <= 1e-14 * np.abs(y0).max()
    Hc, yc, r0 = assemble_compressed(basis, problem.blocks, rules, chunk=chunk)
    assert np.abs(Hc.T @ Hc - A0).max() <= 1e-12 * np.abs(A0).max()
    assert np.abs(Hc.T @ yc - b0).max() <= 1e-12 * np.abs(b0).max()


def test_non_finite_target_reports_node():
    basis = small_basis()
    blk = RowBlockSpec("volume-value", 1.0,
                       lambda x: np.where(x[:, :1] > 0.5, np.inf, 0.0) * np.ones((1, 2)))
    with pytest.raises(AssemblyError, match="node"):
        assemble_normal(basis, [blk], [build_volume_rule(2, 4, 2)])


def test_block_validation():
    with pytest.raises(InvalidArgumentError):
        RowBlockSpec("volume-value", 0.0)
    with pytest.raises(InvalidArgumentError):
        RowBlockSpec("surface", 1.0)
    basis = small_basis()
    with pytest.raises(InvalidArgumentError):
        assemble_normal(basis, [RowBlockSpec("boundary-value", 1.0)],
                        [build_volume_rule(2, 2, 2)])
    with pytest.raises(InvalidArgumentError):
        solve_system(basis, [RowBlockSpec("volume-value", 1.0)],
                     [build_volume_rule(2, 2, 2)], solver="qr")


def test_solve_normal_examples():
    rep = solve_normal(np.eye(3), np.array([1.0, 0, 0]))
    assert np.array_equal(rep.coefficients, [1.0, 0, 0])
    rep = solve_normal(np.diag([4.0, 0.0]), np.array([8.0, 0.0]))
    assert np.allclose(rep.coefficients, [2.0, 0.0], atol=1e-15)
    assert rep.truncated_rank == 1
    with pytest.raises(InvalidArgumentError):
        solve_normal(np.array([[np.nan]]), np.ones(1))


def test_solve_normal_matches_dense_solver(rng):
    M = rng.standard_normal((20, 20))
    A = M @ M.T + 20 * np.eye(20)
    b = rng.standard_normal(20)
    ref = scipy.linalg.solve(A, b, assume_a="pos")
    rep = solve_normal(A, b)
    assert np.linalg.norm(rep.coefficients - ref) <= 1e-9 * np.linalg.norm(ref)
    assert rep.cond_normal == pytest.approx(np.linalg.cond(A), rel=1e-8)


def test_solve_lstsq_examples(rng):
    rep = solve_lstsq_svd(np.ones((2, 2)), np.array([2.0, 2.0]))
    assert np.allclose(rep.coefficients, [1.0, 1.0])
    assert rep.truncated_rank == 1
    assert solve_lstsq_svd(np.diag([4.0, 2.0]), np.ones(2)).cond_tall == pytest.approx(2.0)
    H = rng.standard_normal((40, 7))
    y = rng.standard_normal(40)
    ref = np.linalg.lstsq(H, y, rcond=None)[0]
    rep = solve_lstsq_svd(H, y)
    assert np.allclose(rep.coefficients, ref, rtol=1e-12, atol=1e-13)
    assert rep.residual_norm <= np.linalg.norm(y)
    with pytest.raises(InvalidArgumentError):
        solve_lstsq_svd(H, y[:-1])


def test_svd_fallback_and_failure(monkeypatch, rng):
    real = scipy.linalg.svd
    calls = []

    def flaky(a, **kw):
        calls.append(kw["lapack_driver"])
        if kw["lapack_driver"] == "gesdd":
            raise np.linalg.LinAlgError("no convergence")
        return real(a, **kw)

    monkeypatch.setattr(assembly.scipy.linalg, "svd", flaky)
    rep = solve_lstsq_svd(rng.standard_normal((5, 3)), np.ones(5))
    assert calls == ["gesdd", "gesvd"] and rep.coefficients.shape == (3,)

    def broken(a, **kw):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(assembly.scipy.linalg, "svd", broken)
    with pytest.raises(SolverError):
        solve_lstsq_svd(np.eye(2), np.ones(2))


def test_condition_number_examples():
    assert condition_number(np.eye(4)) == pytest.approx(1.0)
    assert condition_number(np.diag([10.0, 0.1])) == pytest.approx(100.0)
    assert condition_number(np.diag([1.0, 0.0])) == float("inf")


@given(seed=st.integers(0, 2 ** 31))
def test_normal_matrix_squares_condition(seed):
    H = np.random.default_rng(seed).standard_normal((50, 10))
    ratio = condition_number(H.T @ H) / condition_number(H) ** 2
    assert 0.1 <= ratio <= 10


@pytest.mark.parametrize("kind,d,k", DRIVER_CASES)
def test_solvers_reduce_objective_and_agree(kind, d, k):
    basis = small_basis(n=5, d=d, k=k)
    problem = build_problem(kind, d)
    rules = _rules(problem.blocks, d)
    H, y = assemble_tall(basis, problem.blocks, rules)
    direct = solve_system(basis, problem.blocks, rules, "direct")
    normal = solve_system(basis, problem.blocks, rules, "normal")
    for rep in (direct, normal):
        assert np.linalg.norm(H @ rep.coefficients - y) <= np.linalg.norm(y)
    assert direct.residual_norm == pytest.approx(np.linalg.norm(H @ direct.coefficients - y),
                                                 rel=1e-8)
    if condition_number(H) < 1e3:
        diff = np.linalg.norm(direct.coefficients - normal.coefficients)
        assert diff <= 1e-8 * np.linalg.norm(direct.coefficients)


def test_compressed_budget_error_names_flag():
    basis = small_basis(n=20)
    with pytest.raises(ResourceBudgetError, match="--memory-budget"):
        assemble_compressed(basis, [RowBlockSpec("volume-value", 1.0)],
                            [build_volume_rule(2, 4, 2)], memory_budget=1000)


def test_compressed_path_reports_true_node_number():
    basis = small_basis()
    rule = build_volume_rule(2, 4, 2)
    bad_node = 37
    target = rule.nodes[bad_node].copy()

    def poisoned(x):
        out = np.zeros((len(x), 2))
        out[np.all(x == target, axis=1)] = np.nan
        return out

    with pytest.raises(AssemblyError, match=f"node {bad_node},"):
        assemble_compressed(basis, [RowBlockSpec("volume-value", 1.0, poisoned)], [rule],
                            chunk=5)


def test_normal_assembly_under_tight_budget_is_unchanged():
    basis = small_basis(n=12, k=3)
    problem = build_problem("stokes-manufactured", 2)
    rules = _rules(problem.blocks, 2, nx=4)
    A0, b0 = assemble_normal(basis, problem.blocks, rules)
    A1, b1 = assemble_normal(basis, problem.blocks, rules, memory_budget=8 * 12 * 6 * 3)
    assert np.abs(A1 - A0).max() <= 1e-12 * np.abs(A0).max()
    assert np.abs(b1 - b0).max() <= 1e-12 * np.abs(b0).max()
