import math

import numpy as np
import pytest

from divfree_fns.errors import InvalidArgumentError
from divfree_fns.problems import (SampledField, build_driver, build_problem, g_smooth,
                                  lid_boundary_data, target_l2_2d, target_l2_3d,
                                  target_stokes_2d, target_stokes_3d)
from divfree_fns.quadrature import build_boundary_rule

TARGETS = [target_l2_2d, target_l2_3d, target_stokes_2d, target_stokes_3d]


def test_l2_2d_examples():
    u = target_l2_2d(math.pi)
    assert np.allclose(u.evaluate([0.5, 0.0]), [[math.pi, 0.0]], atol=1e-15)
    assert np.allclose(u.evaluate([0.5, 0.5]), 0.0, atol=1e-15)


def test_l2_2d_closed_form(rng):
    w = 2.3
    x = rng.uniform(-1, 1, (50, 2))
    expect = w * np.stack([np.sin(w * x[:, 0]) * np.cos(w * x[:, 1]),
                           -np.cos(w * x[:, 0]) * np.sin(w * x[:, 1])], axis=1)
    assert np.allclose(target_l2_2d(w).evaluate(x), expect, rtol=1e-14, atol=1e-14)


def test_l2_3d_closed_form(rng):
    w = math.pi
    x = rng.uniform(-1, 1, (50, 3))
    s, c = np.sin(w * x), np.cos(w * x)
    expect = w * np.stack([s[:, 0] * (c[:, 1] - c[:, 2]),
                           s[:, 1] * (c[:, 2] - c[:, 0]),
                           s[:, 2] * (c[:, 0] - c[:, 1])], axis=1)
    assert np.allclose(target_l2_3d(w).evaluate(x), expect, rtol=1e-13, atol=1e-13)
    assert np.all(target_l2_3d(w).evaluate(np.zeros(3)) == 0.0)
    assert np.allclose(target_l2_3d(w).evaluate([0.5, 0.5, 0.5]), 0.0, atol=1e-14)


def _bubble_psi(x, y, w):
    beta = lambda t: (1 - t * t) ** 2
    return beta(x) * beta(y) * np.sin(w * x) * np.sin(w * y)


def test_stokes_2d_matches_stream_function_fd(rng):
    # u = (d_y psi, -d_x psi), checked with fourth-order differences of psi
    w, h = math.pi, 1e-3
    x = rng.uniform(-0.9, 0.9, (40, 2))
    psi = lambda p: _bubble_psi(p[:, 0], p[:, 1], w)
    def d(axis):
        e = np.eye(2)[axis] * h
        return (-psi(x + 2 * e) + 8 * psi(x + e) - 8 * psi(x - e) + psi(x - 2 * e)) / (12 * h)
    expect = np.stack([d(1), -d(0)], axis=1)
    assert np.allclose(target_stokes_2d(w).evaluate(x), expect, atol=1e-9)


def test_stokes_3d_matches_closed_form(rng):
    # u_1 = sin(wx)(T_y - T_z) with T_a = d_a(beta(x)beta(y)beta(z) sin(w x_a)) and cyclic
    w = math.pi
    x = rng.uniform(-1, 1, (60, 3))
    beta = (1 - x * x) ** 2
    dbeta = -4 * x * (1 - x * x)
    s, c = np.sin(w * x), np.cos(w * x)
    B = beta.prod(axis=1)
    T = np.stack([(dbeta[:, a] * s[:, a] + beta[:, a] * w * c[:, a]) * B / beta[:, a]
                  for a in range(3)], axis=1)
    expect = np.stack([s[:, 0] * (T[:, 1] - T[:, 2]), s[:, 1] * (T[:, 2] - T[:, 0]),
                       s[:, 2] * (T[:, 0] - T[:, 1])], axis=1)
    assert np.allclose(target_stokes_3d(w).evaluate(x), expect, rtol=1e-12, atol=1e-13)
    assert np.allclose(target_stokes_3d(w).evaluate([0.5, 0.5, 0.5]), 0.0, atol=1e-14)


@pytest.mark.parametrize("make", [target_stokes_2d, target_stokes_3d])
def test_stokes_targets_vanish_on_boundary(make):
    u = make(math.pi)
    rule = build_boundary_rule(u.d, 6, 3)
    assert np.abs(u.evaluate(rule.nodes)).max() <= 1e-14
    assert np.all(u.evaluate(np.zeros(u.d)) == 0.0)


@pytest.mark.parametrize("make", TARGETS)
def test_jacobian_fd_and_divergence(make, rng):
    u = make(math.pi)
    h = 1e-6
    x = rng.uniform(-0.999, 0.999, (100, u.d))
    J = u.jacobian(x)
    fd = np.stack([(u.evaluate(x + h * e) - u.evaluate(x - h * e)) / (2 * h)
                   for e in np.eye(u.d)], axis=2)
    assert np.abs(J - fd).max() <= 1e-5 * np.abs(J).max()
    y = rng.uniform(-1, 1, (10_000, u.d))
    Jy = u.jacobian(y)
    assert np.abs(np.trace(Jy, axis1=1, axis2=2)).max() <= 1e-10 * np.abs(Jy).max()
    assert np.abs(u.divergence(y)).max() <= 1e-12 * math.pi ** 2 * 10


def test_lid_profiles():
    assert abs(g_smooth(np.array([-1.0, 1.0]))).max() <= 1e-15
    assert g_smooth(np.array([0.0]))[0] == pytest.approx(1.0)
    for profile in ("const", "smooth"):
        bc = lid_boundary_data(profile)
        rule = build_boundary_rule(2, 4, 3)
        vals = bc.evaluate(rule.nodes, rule.faces)
        top = rule.faces == 3
        assert np.all(vals[~top] == 0.0)
        assert np.all(vals[:, 1] == 0.0)
        assert np.all(rule.nodes[top, 1] == 1.0)
    const = lid_boundary_data("const")
    assert np.array_equal(const.evaluate([[0.2, 1.0]], np.array([3])), [[1.0, 0.0]])
    assert np.array_equal(const.evaluate([[1.0, 0.2]], np.array([1])), [[0.0, 0.0]])
    with pytest.raises(InvalidArgumentError):
        lid_boundary_data("wavy")


def test_driver_blocks():
    blocks = build_driver("l2-projection", 2)
    assert [b.kind for b in blocks] == ["volume-value"]
    blocks = build_driver("stokes-manufactured", 3, nu=2.0, eps=0.25)
    assert [(b.kind, b.scale) for b in blocks] == [("volume-gradient", 2.0),
                                                   ("boundary-value", 4.0)]
    assert blocks[1].target is None
    cav = build_driver("lid-cavity", 2)
    assert cav[0].target is None and cav[1].scale == 1.0


def test_default_penalty():
    assert build_problem("stokes-manufactured", 2).eps == 1.0
    assert build_problem("stokes-manufactured", 3).eps == pytest.approx(1 / 6)


@pytest.mark.parametrize("kwargs", [
    dict(kind="heat", d=2), dict(kind="l2-projection", d=4),
    dict(kind="lid-cavity", d=3), dict(kind="stokes-manufactured", d=2, nu=0.0),
    dict(kind="stokes-manufactured", d=2, eps=-1.0),
])
def test_driver_rejects_bad_combinations(kwargs):
    with pytest.raises(InvalidArgumentError):
        build_driver(**kwargs)


def test_sampled_field_lookup(rng):
    pts = rng.uniform(-1, 1, (30, 2))
    vals = rng.standard_normal((30, 2))
    jac = rng.standard_normal((30, 4))
    f = SampledField(pts, vals, jac)
    order = rng.permutation(30)
    assert np.array_equal(f.evaluate(pts[order]), vals[order])
    assert np.array_equal(f.jacobian(pts[order]), jac.reshape(-1, 2, 2)[order])
    with pytest.raises(InvalidArgumentError):
        f.evaluate(pts[:1] + 1e-9)
    assert SampledField(pts, vals).jacobian is None
