import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gluelab import spectral_torus as sp
from gluelab.fields_and_transforms import CutoffSpec, PhysicalField, cutoff_eval, lp_norm, torus


def _rand(n, seed, modes=4, comps=3):
    g = torus(n)
    X = g.mesh()
    rng = np.random.default_rng(seed)
    v = np.zeros((comps,) + g.shape)
    for _ in range(8):
        k = rng.integers(-modes, modes + 1, 3)
        ph = np.einsum("i,i...->...", k, X) + rng.uniform(0, 2 * np.pi)
        v += rng.normal(size=comps)[:, None, None, None] * np.cos(ph)
    return g, v


def test_leray_kills_gradients():
    g, q = _rand(32, 1, comps=1)
    ops = sp.ops_for(g)
    grad = ops.grad(q[0])
    P = sp.leray_project(PhysicalField(g, 1.0, grad)).values
    assert np.max(np.abs(P)) < 1e-12 * np.max(np.abs(grad))


def test_leray_keeps_solenoidal_and_is_idempotent():
    g, u = _rand(32, 2)
    ops = sp.ops_for(g)
    Pu = ops.leray(u)
    assert np.max(np.abs(ops.leray(Pu) - Pu)) < 1e-12
    assert np.max(np.abs(ops.div(Pu))) < 1e-12
    g, w = _rand(32, 3)
    curl = ops.curl(w)
    assert np.max(np.abs(ops.leray(curl) - curl)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_leray_self_adjoint(seed):
    rng = np.random.default_rng(seed)
    g = torus(16)
    ops = sp.ops_for(g)
    u, v = rng.normal(size=(2, 3) + g.shape)
    lhs, rhs = np.sum(ops.leray(u) * v), np.sum(u * ops.leray(v))
    assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(u) * np.linalg.norm(v)


def test_heat_identity_and_single_mode():
    g = torus(16)
    X = g.mesh()
    u = np.stack([np.sin(X[0]), np.cos(X[0]), np.zeros_like(X[0])])
    f = PhysicalField(g, 1.0, u)
    assert np.allclose(sp.heat_semigroup(f, 0.0).values, u, atol=1e-15)
    out = sp.heat_semigroup(f, 0.1).values
    assert np.allclose(out, math.exp(-0.1) * u, atol=1e-14)
    assert math.exp(-0.1) == pytest.approx(0.904837, abs=1e-6)
    with pytest.raises(ValueError):
        sp.heat_semigroup(f, -1.0)


@settings(max_examples=20, deadline=None)
@given(s1=st.floats(0.0, 1.0), s2=st.floats(0.0, 1.0), seed=st.integers(0, 1000))
def test_heat_semigroup_property_and_contraction(s1, s2, seed):
    g, u = _rand(16, seed)
    f = PhysicalField(g, 1.0, u)
    a = sp.heat_semigroup(sp.heat_semigroup(f, s1), s2).values
    b = sp.heat_semigroup(f, s1 + s2).values
    assert np.allclose(a, b, atol=1e-12)
    assert lp_norm(b, g, 2) <= lp_norm(u, g, 2) * (1 + 1e-12)


def test_heat_pdiv_variant():
    g, M = _rand(16, 4, comps=9)
    M = M.reshape((3, 3) + g.shape)
    ops = sp.ops_for(g)
    out = sp.heat_semigroup(PhysicalField(g, 1.0, M), 0.0, "Pdiv").values
    assert np.allclose(out, ops.leray(ops.div(M)), atol=1e-12)
    with pytest.raises(ValueError):
        sp.heat_semigroup(PhysicalField(g, 1.0, M), 0.1, "bogus")


def test_stokes_div_inverts_laplacian():
    g, q = _rand(32, 5, comps=1)
    ops = sp.ops_for(g)
    q = q[0] - q[0].mean()
    h = ops.lap(q)
    out = sp.stokes_div_solve(h, g).values
    assert np.allclose(out, ops.grad(q), atol=1e-11)
    # zero Leray projection, exact spectral divergence
    assert np.max(np.abs(ops.leray(out))) < 1e-12
    assert np.allclose(ops.div(out), h, atol=1e-11)


def test_stokes_div_mean_from_cutoff_is_zero():
    # h = div(eta phi) for divergence-free phi has zero torus mean
    g, w = _rand(32, 6)
    ops = sp.ops_for(g)
    phi = ops.curl(w)
    c = cutoff_eval(CutoffSpec(0.2), g.mesh(), 0.2)
    h = ops.div(c.eta * phi)
    assert abs(np.mean(h)) < 1e-12
    sp.stokes_div_solve(h, g)
    # the pointwise form grad eta . phi only has a small quadrature mean, which callers remove
    hp = np.einsum("i...,i...->...", c.grad, phi)
    assert abs(np.mean(hp)) < 1e-3 * np.max(np.abs(hp))


def test_stokes_div_rejects_mean():
    g = torus(8)
    with pytest.raises(sp.MeanError):
        sp.stokes_div_solve(np.ones(g.shape), g)


def test_stokes_div_lp_bound():
    g = torus(32)
    hs, times = [], [0.1, 0.2, 0.3, 0.4]
    worst = 0.0
    for seed in range(8):
        _, h = _rand(32, 100 + seed, modes=6, comps=1)
        h = h[0] - h[0].mean()
        out = sp.stokes_div_solve(h, g).values
        worst = max(worst, lp_norm(out, g, 10) / lp_norm(h, g, 10))
        hs.append(h)
    hist = sp.stokes_div_solve(hs[:4], g, times)
    assert [f.time for f in hist] == times
    assert worst <= 2.0


def test_step_outer_pure_heat():
    g = torus(16)
    X = g.mesh()
    u = np.stack([np.zeros_like(X[0]), np.zeros_like(X[0]), np.sin(2 * X[0])])
    psi = PhysicalField(g, 0.5, u)
    out = sp.step_outer(psi, lambda t, v: np.zeros_like(v), sp.StokesStepPlan(0.05))
    assert out.time == pytest.approx(0.55)
    assert np.allclose(out.values, math.exp(-4 * 0.05) * u, atol=1e-14)


def _manufactured_error(nsteps, scheme="if-heun"):
    # psi* = cos(t) v with v solenoidal; dpsi/dt = Lap psi - P F gives F = -(psi*_t - Lap psi*)
    g = torus(16)
    X = g.mesh()
    v = np.stack([np.sin(X[1]) + np.cos(2 * X[2]), np.zeros_like(X[0]), np.zeros_like(X[0])])
    lap_v = -np.stack([np.sin(X[1]) + 4 * np.cos(2 * X[2]), np.zeros_like(X[0]), np.zeros_like(X[0])])
    F = lambda t, u: -(-math.sin(t) * v - math.cos(t) * lap_v)
    t0, T = 0.2, 0.6
    dt = (T - t0) / nsteps
    psi = PhysicalField(g, t0, math.cos(t0) * v)
    for _ in range(nsteps):
        psi = sp.step_outer(psi, F, sp.StokesStepPlan(dt, scheme))
    return float(np.max(np.abs(psi.values - math.cos(T) * v)))


def test_step_outer_manufactured_second_order():
    e1, e2, e3 = (_manufactured_error(m) for m in (8, 16, 32))
    assert math.log2(e1 / e2) == pytest.approx(2.0, abs=0.25)
    assert math.log2(e2 / e3) == pytest.approx(2.0, abs=0.25)
    assert _manufactured_error(64, "imex") < 0.05


def test_step_outer_rejects_large_steps():
    g = torus(16)
    u = 100 * np.ones((3,) + g.shape)
    with pytest.raises(sp.StepRejected) as e:
        sp.step_outer(PhysicalField(g, 1.0, u), lambda t, v: 0 * v, sp.StokesStepPlan(1.0))
    assert e.value.suggested_dt < 1.0


def test_cutoff_terms_vanish_on_plateau():
    # forcing carried where eta = 1 only: the grad-eta pieces are identically zero there
    g = torus(32)
    ops = sp.ops_for(g)
    X = g.mesh()
    r = g.radius()
    phi = np.stack([np.exp(-20 * r * r)] * 3)
    cut = cutoff_eval(CutoffSpec(0.1), X, 0.5)
    terms = sp.outer_forcing_terms(ops, phi, phi, cut)
    plateau = cut.eta == 1.0
    assert np.all(terms["transport"][:, plateau] == 0.0)
    zone = np.sqrt(np.sum(cut.grad ** 2, axis=0)) > 0
    assert np.max(np.abs(terms["cutoff"][:, ~zone & (r < 1.0)])) < 1e-10


def test_nonlinear_div_zero_and_energy():
    g, w = _rand(32, 7, modes=3)
    ops = sp.ops_for(g)
    u = PhysicalField(g, 1.0, ops.curl(w))
    z = PhysicalField(g, 1.0, np.zeros((3,) + g.shape))
    assert np.all(sp.nonlinear_div(u, z).values == 0.0)
    out = sp.nonlinear_div(u, u).values
    scale = np.sum(np.abs(u.values) * np.abs(out))
    assert abs(np.sum(u.values * out)) <= 1e-10 * scale


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_nonlinear_div_bilinear(seed):
    g, a = _rand(16, seed)
    _, b = _rand(16, seed + 1)
    _, c = _rand(16, seed + 2)
    F = lambda x: PhysicalField(g, 1.0, x)
    lhs = sp.nonlinear_div(F(a), F(b + c)).values
    rhs = sp.nonlinear_div(F(a), F(b)).values + sp.nonlinear_div(F(a), F(c)).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_smoothing_ratio_trivial_cases():
    g, u = _rand(16, 8)
    ops = sp.ops_for(g)
    assert sp.smoothing_ratio(ops, [u], 0.0, "none", 2, 2) == pytest.approx(1.0)
    assert sp.smoothing_ratio(ops, [ops.leray(u)], 0.0, "P", 2, 2) == pytest.approx(1.0)
