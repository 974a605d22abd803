import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from gluelab import fields_and_transforms as ft
from gluelab.fields_and_transforms import (CutoffSpec, Grid3, PhysicalField, ProfileField, WeightedNormSpec,
                                           cutoff_N, cutoff_eval, torus, xi_box)


def _gauss_profile(grid, width=1.0):
    r2 = grid.radius() ** 2
    v = np.zeros((3,) + grid.shape)
    v[0] = np.exp(-r2 / width ** 2)
    return v


# ---------------------------------------------------------------- grids and fields

def test_grid_validation():
    with pytest.raises(ValueError):
        Grid3(96)
    with pytest.raises(ValueError):
        Grid3(16, -1.0)
    with pytest.raises(ValueError):
        Grid3(16, 1.0, "sphere")


def test_field_kinds_checked():
    with pytest.raises(ValueError):
        PhysicalField(xi_box(8, 4.0), 1.0, np.zeros((3, 8, 8, 8)))
    with pytest.raises(ValueError):
        ProfileField(torus(8), 0.0, np.zeros((3, 8, 8, 8)))
    with pytest.raises(ValueError):
        PhysicalField(torus(8), 0.0, np.zeros((3, 8, 8, 8)))


def test_values_are_frozen():
    U = ProfileField(xi_box(8, 4.0), 0.0, np.ones((3, 8, 8, 8)))
    with pytest.raises(ValueError):
        U.values[0, 0, 0, 0] = 2.0


def test_divfree_flag_is_checked():
    g = torus(16)
    X = g.mesh()
    grad_like = np.stack([np.sin(X[0]), np.zeros_like(X[0]), np.zeros_like(X[0])])
    with pytest.raises(ValueError):
        PhysicalField(g, 1.0, grad_like, divfree=True)
    shear = np.stack([np.sin(X[1]), np.zeros_like(X[0]), np.zeros_like(X[0])])
    PhysicalField(g, 1.0, shear, divfree=True)


# ---------------------------------------------------------------- similarity maps

def test_similarity_round_trip_on_matching_grids():
    # at t = 1/4 the xi-box of side 4 pi samples exactly the torus nodes
    n = 32
    g = torus(n)
    X = g.mesh()
    u = np.stack([np.sin(X[1]) * np.cos(X[2]), np.cos(X[0]), np.sin(X[0] + X[1])])
    U = ft.to_similarity(PhysicalField(g, 0.25, u), xi_box(n, 4 * math.pi))
    back = ft.from_similarity(U, g)
    assert np.max(np.abs(back.values - u)) < 1e-12


def test_similarity_round_trip_off_grid():
    g = torus(64)
    X = g.mesh()
    u = np.stack([np.sin(X[1]), np.cos(X[2]), np.sin(X[0])])
    U = ft.to_similarity(PhysicalField(g, 0.3, u), xi_box(64, 16.0))
    back = ft.from_similarity(U, g, on_truncation="ignore").values
    # trilinear interpolation twice: second order in the grid spacing
    assert np.max(np.abs(back - u)) < 0.05


def test_gaussian_profile_at_origin():
    # U = e^{-|xi|^2} e1 held fixed, t = 4, x = 0 -> u = 0.5 e1
    gi = xi_box(32, 16.0)
    U = ProfileField(gi, math.log(4.0), _gauss_profile(gi))
    # the torus only sees |xi| <= pi/2 at t = 4, so the tail is deliberately cut
    u = ft.from_similarity(U, torus(32), on_truncation="ignore").values
    c = 16  # torus node at x = 0
    assert u[:, c, c, c] == pytest.approx([0.5, 0.0, 0.0], abs=1e-14)


def test_velocity_l2_scaling():
    # ||u(., t)||_2 = t^{1/4} ||U||_2, t = 1/4, by quadrature on both grids
    n = 64
    gi = xi_box(n, 4 * math.pi)
    U = ProfileField(gi, math.log(0.25), _gauss_profile(gi))
    u = ft.from_similarity(U, torus(n))
    lu = ft.lp_norm(u.values, u.grid, 2)
    lU = ft.lp_norm(U.values, gi, 2)
    assert lu / lU == pytest.approx(0.25 ** 0.25, rel=1e-12)


def test_force_l2_scaling():
    # ||f(., t)||_2 = t^{-3/4} ||F||_2 at t = 1/16; oracle: ||e^{-|xi|^2}||_2 = (pi/2)^{3/4}
    n = 64
    gi = xi_box(n, 8 * math.pi)
    F = ProfileField(gi, math.log(1 / 16), _gauss_profile(gi))
    f = ft.force_from_similarity(F, torus(n))
    exact = (math.pi / 2) ** 0.75
    assert ft.lp_norm(f.values, f.grid, 2) / exact == pytest.approx(8.0, rel=1e-8)
    back = ft.force_to_similarity(f, gi, on_truncation="ignore")
    assert np.max(np.abs(back.values - F.values)) < 1e-12


def test_force_support_scales():
    gi = xi_box(32, 8.0)
    F = np.zeros((3,) + gi.shape)
    # support radius 1/2: trilinear taps reach sqrt(3) h_xi = 0.43 further, still inside B_1
    F[2] = np.where(gi.radius() < 0.5, 0.5 - gi.radius(), 0.0)
    t = 0.5
    f = ft.force_from_similarity(ProfileField(gi, math.log(t), F), torus(32)).values
    r = torus(32).radius()
    assert np.all(f[:, r > math.sqrt(t)] == 0.0)
    assert np.any(f != 0.0)


def test_truncation_raises():
    g = torus(16)
    u = np.ones((3,) + g.shape)
    with pytest.raises(ft.TruncationError):
        ft.to_similarity(PhysicalField(g, 0.01, u), xi_box(16, 4.0))
    with pytest.warns(ft.TruncationWarning):
        ft.to_similarity(PhysicalField(g, 0.01, u), xi_box(16, 4.0), on_truncation="warn")


# ---------------------------------------------------------------- cutoff

def test_cutoff_plateau_and_exterior():
    sp = CutoffSpec(0.01)
    t = 0.1
    s = t ** sp.gamma
    x = np.array([[s, 4 * s], [0.0, 0.0], [0.0, 0.0]])
    c = cutoff_eval(sp, x, t)
    assert c.eta[0] == 1.0
    assert c.eta[1] == 0.0
    assert np.all(c.grad[:, 1] == 0.0)


def test_cutoff_gradient_misses_core():
    # gamma = 0.01, t = e^-10: grad eta lives in 2t^g <= |x| <= 3t^g, the profile in B_sqrt(t)
    sp = CutoffSpec(0.01)
    t = math.exp(-10)
    g = torus(32)
    c = cutoff_eval(sp, g.mesh(), t)
    r = g.radius()
    gmag = np.sqrt(np.sum(c.grad ** 2, axis=0))
    on = gmag > 0
    assert on.any()
    assert r[on].min() >= 2 * t ** 0.01 - 1e-12 and r[on].max() <= 3 * t ** 0.01 + 1e-12
    gi = xi_box(32, 4.0)
    Ub = np.zeros((3,) + gi.shape)
    Ub[0] = np.where(gi.radius() < 1, (1 - gi.radius() ** 2) ** 3, 0.0)
    ub = ft.from_similarity(ProfileField(gi, -10.0, Ub), g, on_truncation="ignore").values
    phi = np.ones((3,) + g.shape)
    prod = np.einsum("j...,j...->...", ub, c.grad)[None] * phi
    assert np.all(prod == 0.0)
    assert ft.annulus_clear_of_core(sp, [t]).all()


def test_cutoff_derivatives_match_differences():
    sp = CutoffSpec(0.2)
    t = 0.3
    x = np.array([[0.9 * 2.2 * t ** 0.2], [0.3], [0.1]])
    h = 1e-5
    c = cutoff_eval(sp, x, t)
    num_grad = []
    for i in range(3):
        e = np.zeros((3, 1))
        e[i] = h
        num_grad.append((cutoff_eval(sp, x + e, t).eta - cutoff_eval(sp, x - e, t).eta)[0] / (2 * h))
    assert np.allclose(c.grad[:, 0], num_grad, atol=1e-7)
    lap = sum((cutoff_eval(sp, x + e, t).eta - 2 * c.eta + cutoff_eval(sp, x - e, t).eta)[0] / h ** 2
              for e in (np.eye(3)[:, [i]] * h for i in range(3)))
    assert c.lap[0] == pytest.approx(lap, rel=1e-4)
    dt = (cutoff_eval(sp, x, t + h).eta - cutoff_eval(sp, x, t - h).eta)[0] / (2 * h)
    assert c.dt[0] == pytest.approx(dt, rel=1e-6)


@settings(max_examples=60, deadline=None)
@given(gamma=st.floats(0.01, 0.45), tau=st.floats(-12.0, 0.0), seed=st.integers(0, 10 ** 6))
def test_similarity_cutoff_matches_physical(gamma, tau, seed):
    sp = CutoffSpec(gamma)
    xi = np.random.default_rng(seed).normal(scale=5.0, size=(3, 40))
    t = math.exp(tau)
    phys = cutoff_eval(sp, xi * math.sqrt(t), t).eta
    assert np.allclose(cutoff_N(sp, xi, tau), phys, atol=1e-12)
    assert np.all((phys >= 0) & (phys <= 1))


@settings(max_examples=40, deadline=None)
@given(r=st.lists(st.floats(0.0, 5.0), min_size=2, max_size=30))
def test_cutoff_radial_profile_monotone(r):
    r = np.sort(np.array(r))
    e0, e1, _ = CutoffSpec(0.1).radial(r)
    assert np.all(np.diff(e0) <= 1e-15)
    assert np.all(e1 <= 0)


# ---------------------------------------------------------------- weighted norms

def test_weighted_norm_zero():
    gi = xi_box(16, 8.0)
    assert ft.weighted_norm(ProfileField(gi, 0.0, np.zeros((3,) + gi.shape))) == 0.0


def test_weighted_norm_weight_cancels():
    gi = xi_box(32, 16.0)
    v = np.zeros((3,) + gi.shape)
    v[0] = (1 + gi.radius() ** 2) ** -2
    assert ft.weighted_norm(ProfileField(gi, 0.0, v)) == pytest.approx(1.0, abs=1e-14)


def test_weighted_norm_gaussian_against_1d_maximisation():
    # independent oracle: maximize (1 + r^2)^2 e^{-r^2} over r >= 0
    res = optimize.minimize_scalar(lambda r: -(1 + r * r) ** 2 * math.exp(-r * r), bounds=(0, 5),
                                   method="bounded", options={"xatol": 1e-12})
    oracle = -res.fun
    gi = xi_box(32, 16.0)  # spacing 1/2, so the node (1, 0, 0) sits on the maximiser
    val = ft.weighted_norm(ProfileField(gi, 0.0, _gauss_profile(gi)))
    assert val == pytest.approx(oracle, rel=1e-9)


def test_weighted_lp_matches_direct_sum():
    gi = xi_box(16, 8.0)
    v = np.random.default_rng(3).normal(size=(3,) + gi.shape)
    sp = WeightedNormSpec(4.0, 10.0)
    w = (1 + gi.radius() ** 2) ** 2 * np.sqrt(np.sum(v * v, axis=0))
    direct = (np.sum(w ** 10) * gi.dv) ** 0.1
    assert ft.weighted_norm_values(v, gi, sp) == pytest.approx(direct, rel=1e-12)


# ---------------------------------------------------------------- X and Y norms

def test_norm_X_weight_cancels_growth():
    gi = xi_box(16, 8.0)
    rho = np.zeros((3,) + gi.shape)
    rho[1] = (1 + gi.radius() ** 2) ** -2
    alpha = 9.4
    hist = [ProfileField(gi, tau, math.exp(alpha * tau) * rho) for tau in np.linspace(-2, 0, 9)]
    assert ft.norm_X(hist, alpha) == pytest.approx(1.0, rel=1e-12)


def test_norm_Y_zero():
    g = torus(8)
    hist = [PhysicalField(g, t, np.zeros((3,) + g.shape)) for t in (0.1, 0.2, 0.3)]
    assert ft.norm_Y(hist, 9.3, 100, 100) == 0.0


def test_norm_Y_power_law_against_quad():
    beta, r = 9.3, 100.0
    ts = np.geomspace(1e-4, 2.0 ** -6, 60)
    vals = ts ** (beta - 1 / r)
    # direct numeric time integral at the top time, then the sup weight
    s = ts[-1]
    # substitute t = s u so that the integrand does not underflow
    q = (beta - 1 / r) * r
    unit, _ = integrate.quad(lambda u: u ** q, 0, 1, epsabs=0, epsrel=1e-12)
    oracle = math.exp(((q + 1) * math.log(s) + math.log(unit)) / r - beta * math.log(s))
    assert ft.norm_Y((ts, vals), beta, r, 100) == pytest.approx(oracle, rel=1e-9)
    assert oracle == pytest.approx((beta * r) ** (-1 / r), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(e=st.floats(0.0, 20.0), r=st.floats(2.0, 200.0), t0=st.floats(1e-6, 1e-2))
def test_lr_quadrature_exact_for_power_laws(e, r, t0):
    ts = np.geomspace(t0, 1.0, 25)
    got = ft.lr_cumulative_log(ts, ts ** e, r)
    exact = (e * r + 1) * np.log(ts) - math.log(e * r + 1)
    assert np.allclose(got, exact, rtol=0, atol=1e-9 * max(1.0, e * r))


@settings(max_examples=30, deadline=None)
@given(c=st.floats(1e-6, 1e6), seed=st.integers(0, 1000))
def test_norms_are_homogeneous(c, seed):
    rng = np.random.default_rng(seed)
    taus = np.linspace(-1, 0, 8)
    vals = rng.uniform(0.1, 2.0, 8)
    assert ft.norm_X((taus, c * vals), 3.0) == pytest.approx(c * ft.norm_X((taus, vals), 3.0), rel=1e-12)
    ts = np.exp(taus)
    assert ft.norm_Y((ts, c * vals), 2.0, 10, 10) == pytest.approx(c * ft.norm_Y((ts, vals), 2.0, 10, 10),
                                                                   rel=1e-10)


# ---------------------------------------------------------------- dyadic bound

def test_dyadic_bare_sum_geometric_oracle():
    beta, r = 9.3, 100
    bp = beta - 1 / r
    direct = sum(2.0 ** ((beta - bp) * k * r) for k in range(0, -200, -1)) ** (1 / r)
    assert ft.dyadic_constant(beta, bp, r, shell=False) == pytest.approx(direct, rel=1e-12)
    assert direct == pytest.approx(2 ** 0.01, rel=1e-12)
    assert direct <= 1.007


def test_dyadic_ratio_below_constant():
    beta, r, p = 9.3, 100.0, 100.0
    bp = beta - 0.5 + 1.5 / p + 1 / r
    tt = np.geomspace(1e-3, 1.0, 400)
    for e in (beta - 1 / r, beta, beta + 1):
        ratio = ft.dyadic_Y_bound((tt, tt ** e), beta, bp, r, p)
        closed = ((e * r + 1) / ((e - bp) * r + 1)) ** (1 / r)
        assert ratio == pytest.approx(closed, rel=1e-6)
        assert ratio <= ft.dyadic_constant(beta, bp, r)


def test_dyadic_zero_and_bad_exponent():
    tt = np.geomspace(1e-3, 1.0, 10)
    assert ft.dyadic_Y_bound((tt, 0 * tt), 2.0, 1.0, 10, 10) == 0.0
    with pytest.raises(ValueError):
        ft.dyadic_Y_bound((tt, tt), 1.0, 2.0, 10, 10)


# ---------------------------------------------------------------- time grids and snapshots

@settings(max_examples=50, deadline=None)
@given(tb=st.floats(-8.0, 0.0), span=st.floats(0.05, 3.0), spu=st.integers(4, 128))
def test_tau_grid_ends_at_tau_bar(tb, span, spu):
    taus = ft.tau_grid(tb - span, tb, spu)
    assert taus[-1] == tb
    assert taus[0] <= tb - span + 1e-9
    assert np.allclose(np.diff(taus), 1.0 / spu)


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    gi = xi_box(8, 4.0)
    U = ProfileField(gi, -1.25, rng.normal(size=(3,) + gi.shape))
    back = ft.read_snapshot(ft.write_snapshot(tmp_path / "u.snap", U))
    assert back.grid == gi and back.tau == -1.25
    assert np.array_equal(back.values, U.values)
    g = torus(8)
    P = PhysicalField(g, 0.5, rng.normal(size=(3,) + g.shape))
    S = PhysicalField(g, 0.5, P.spectral_values(), spectral=True)
    back = ft.read_snapshot(ft.write_snapshot(tmp_path / "s.snap", S))
    assert back.spectral and np.allclose(back.physical_values(), P.values, atol=1e-14)


def test_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "x.snap"
    p.write_bytes(b"not a snapshot\n")
    with pytest.raises(ValueError):
        ft.read_snapshot(p)
