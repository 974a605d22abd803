"""Picard iteration for the coupled inner/outer system and assembly of the glued field.

Unknowns: the inner perturbation profile ``Phi_per`` on a uniform tau grid
(xi-box) and the outer correction ``psi`` on the torus at the matching times
``t = e^tau``.  ``psi`` is stored as a solenoidal part plus the gradient part
``psi_div = -grad Lap^{-1} (grad eta . phi)``.

Each Picard step performs one forced linear inner evolution (RK4 on the box
operator) and one forced outer evolution (integrating factor on the heat
part), both driven by the previous iterate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import exponent_ledger as ledger
from .fields_and_transforms import (CutoffSpec, CutoffValues, Grid3, L_INF_W, PhysicalField, ProfileField,
                                    cutoff_N, cutoff_Ntilde, cutoff_eval, interpolate, lp_norm, norm_X,
                                    norm_Y, tau_grid, torus, weighted_norm_values)
from .inner_space import Background, box_for, evolve_linear
from .spectral_torus import StokesStepPlan, ops_for, outer_forcing_terms, step_outer

GATE_ROWS = ("Gi", "subcritical", "Bo_integrable")


class ContractionError(RuntimeError):
    def __init__(self, msg, diagnostics):
        super().__init__(msg)
        self.diagnostics = diagnostics


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class GluingConfig:
    params: ledger.ExponentParams
    background: Background
    cutoff: CutoffSpec
    tbar: float
    tau_min: float
    amplitude: float = 1e-3
    torus_n: int = 32
    steps_per_unit: int = 64
    fp_tol: float = 1e-6
    max_iter: int = 30
    min_iter: int = 3
    start: str = "zero"

    def __post_init__(self):
        if not 0 < self.tbar <= 1:
            raise ValueError("tbar must lie in (0, 1]")
        if not self.tau_min < math.log(self.tbar):
            raise ValueError("tau_min must lie below log(tbar)")
        if self.start not in ("zero", "G"):
            raise ValueError("start must be 'zero' or 'G'")
        if not self.background.has_eigenpair:
            raise ValueError("background needs an eigenpair")

    @property
    def tau_bar(self) -> float:
        return math.log(self.tbar)

    @property
    def taus(self) -> np.ndarray:
        return tau_grid(self.tau_min, self.tau_bar, self.steps_per_unit)

    @property
    def times(self) -> np.ndarray:
        return np.exp(self.taus)

    @property
    def torus_grid(self) -> Grid3:
        return torus(self.torus_n)

    def truncation_bound(self) -> float:
        """Relative size ``e^{2a (tau_min - tau_bar)}`` of the discarded forcing tail."""
        return math.exp(2 * float(self.params.a) * (self.tau_min - self.tau_bar))


def make_config(bg: Background, tbar: float, amplitude: float = 1e-3, r=100, p=100,
                floor_tol: float = 1e-6, a=None, **kw) -> GluingConfig:
    """Config with ``a`` taken from the background and ``tau_min`` set by the forcing-tail tolerance."""
    a = bg.a if a is None else a
    if not a > 0:
        raise ledger.LedgerError(f"background is not unstable (a = {a:.4g})")
    pr = ledger.derive(Fraction(repr(round(float(a), 6))), r, p)
    span = math.log(1.0 / floor_tol) / (2 * float(pr.a))
    tau_bar = math.log(tbar)
    spu = kw.get("steps_per_unit", 64)
    # snap the span to whole tau steps so grids match across tbar
    span = math.ceil(span * spu) / spu
    return GluingConfig(pr, bg, CutoffSpec(float(pr.gamma)), tbar, tau_bar - span, amplitude, **kw)


def check_gate(pr: ledger.ExponentParams, rows: Sequence[str] = GATE_ROWS) -> ledger.LedgerReport:
    rep = ledger.check_all(pr)
    bad = [n for n in rows if not rep[n].passed]
    if bad:
        raise ledger.LedgerError("ledger rows required by the solver fail: " + ", ".join(bad))
    return rep


# ---------------------------------------------------------------- inner pieces

def phi_lin(bg: Background, tau: float, amplitude: float = 1.0) -> ProfileField:
    """``amplitude * Re(e^{lam tau} rho)``."""
    v = amplitude * np.real(np.exp(bg.lam * tau) * bg.rho)
    return ProfileField(bg.grid, tau, v)


def _outer(a, b):
    return np.einsum("i...,j...->ij...", a, b)


def inner_terms(phi_l, phi_p, Psi, Ubar, N, Nt) -> dict:
    """Tensor pieces whose sum ``S`` drives ``d_tau Phi_per - Lss Phi_per = -P div S``.

    Keys follow the operator split: ``G`` forcing, ``L1``..``L3`` linear, ``B1``, ``B2`` bilinear.
    ``None`` arguments count as zero fields.
    """
    z = lambda v: v is None
    out = {"G": N * _outer(phi_l, phi_l)}
    out["L1"] = 0.0 if z(phi_p) else N * (_outer(phi_l, phi_p) + _outer(phi_p, phi_l))
    out["L2"] = 0.0 if z(Psi) else Nt * (_outer(phi_l, Psi) + _outer(Psi, phi_l))
    out["L3"] = 0.0 if z(Psi) else _outer(Ubar, Psi) + _outer(Psi, Ubar)
    out["B1"] = 0.0 if z(phi_p) else N * _outer(phi_p, phi_p)
    out["B2"] = 0.0 if (z(phi_p) or z(Psi)) else Nt * (_outer(phi_p, Psi) + _outer(Psi, phi_p))
    return out


def build_inner_rhs(phi_per: ProfileField | None, Psi: ProfileField | None, bg: Background, tau: float,
                    cutoff: CutoffSpec, amplitude: float = 1.0) -> ProfileField:
    """Sum of the inner tensor products at one time (see ``inner_terms``)."""
    g = bg.grid
    for f in (phi_per, Psi):
        if f is not None and f.grid != g:
            raise ValueError("grid mismatch between state and background")
    X = g.mesh()
    N = cutoff_N(cutoff, X, tau)
    Nt = cutoff_Ntilde(cutoff, X, tau)
    pl = phi_lin(bg, tau, amplitude).values
    terms = inner_terms(pl, None if phi_per is None else phi_per.values, None if Psi is None else Psi.values,
                        np.asarray(bg.Ubar.values), N, Nt)
    S = sum(v for v in terms.values() if not np.isscalar(v))
    return ProfileField(g, tau, S)


class _Lagrange:
    """Four-point Lagrange interpolation of samples on a uniform grid."""

    def __init__(self, samples: Sequence[np.ndarray], h: float):
        self.f = samples
        self.h = h
        self.m = len(samples)

    def __call__(self, s: float) -> np.ndarray:
        x = s / self.h
        k = int(math.floor(x))
        k = min(max(k, 0), self.m - 2)
        u = x - k
        if abs(u) < 1e-12:
            return self.f[k]
        if abs(u - 1) < 1e-12:
            return self.f[k + 1]
        lo = min(max(k - 1, 0), self.m - 4) if self.m >= 4 else 0
        idx = range(lo, min(lo + 4, self.m))
        out = 0.0
        for a, j in enumerate(idx):
            w = 1.0
            for b, i in enumerate(idx):
                if i != j:
                    w *= (x - i) / (j - i)
            out = out + w * self.f[j]
        return out


# ---------------------------------------------------------------- state

@dataclass
class GluingState:
    phi_per: list            # arrays on the xi-grid, one per tau
    psi_sol: list            # torus arrays, one per time
    psi_div: list
    iterate: int = 0
    norms: list = field(default_factory=list)        # (X, Y, Z) per iterate
    contraction: list = field(default_factory=list)  # successive-difference ratios
    diffs: list = field(default_factory=list)        # ||state_k - state_{k-1}||_Z
    div_means: list = field(default_factory=list)

    def psi(self, k) -> np.ndarray:
        return self.psi_sol[k] + self.psi_div[k]

    def copy_fields(self):
        return GluingState(list(self.phi_per), list(self.psi_sol), list(self.psi_div), self.iterate,
                           list(self.norms), list(self.contraction), list(self.diffs), list(self.div_means))


class Engine:
    """Precomputed per-time data for one configuration."""

    def __init__(self, cfg: GluingConfig):
        self.cfg = cfg
        bg = cfg.background
        self.bg = bg
        self.gi = bg.grid
        self.gt = cfg.torus_grid
        self.taus = cfg.taus
        self.times = cfg.times
        self.h_tau = 1.0 / cfg.steps_per_unit
        Xi = self.gi.mesh()
        self.N = [cutoff_N(cfg.cutoff, Xi, t) for t in self.taus]
        self.Nt = [cutoff_Ntilde(cfg.cutoff, Xi, t) for t in self.taus]
        self.phi_l = [phi_lin(bg, t, cfg.amplitude).values for t in self.taus]
        Xt = self.gt.mesh()
        self.cut = [cutoff_eval(cfg.cutoff, Xt, t) for t in self.times]
        self.box = box_for(self.gi)
        self.ops = ops_for(self.gt)
        self.Ubar = np.asarray(bg.Ubar.values)
        self.pr = cfg.params

    # transforms between the two grids
    def to_torus(self, Phi, k) -> np.ndarray:
        t = self.times[k]
        st = math.sqrt(t)
        tg = self.gt.coords / st
        return interpolate(Phi, self.gi, [tg, tg, tg], periodic=False) / st

    def to_xi(self, psi, k) -> np.ndarray:
        t = self.times[k]
        st = math.sqrt(t)
        tg = self.gi.coords * st
        return interpolate(psi, self.gt, [tg, tg, tg], periodic=True) * st

    # norms
    def x_norm(self, phis) -> float:
        vals = [weighted_norm_values(f, self.gi, L_INF_W) for f in phis]
        return norm_X((self.taus, vals), float(self.pr.alpha))

    def y_norm(self, psis) -> float:
        p, r = float(self.pr.p), float(self.pr.r)
        vals = [lp_norm(f, self.gt, p) for f in psis]
        return norm_Y((self.times, vals), float(self.pr.beta), r, p)

    def zero_state(self) -> GluingState:
        zi = np.zeros((3,) + self.gi.shape)
        zt = np.zeros((3,) + self.gt.shape)
        m = len(self.taus)
        return GluingState([zi] * m, [zt] * m, [zt] * m)

    # the two forced linear solves
    def inner_solve(self, S_hist) -> list:
        box, ops = self.box, self.box.ops
        forcing = [-box.project(ops.div(S)) for S in S_hist]
        f = _Lagrange(forcing, self.h_tau)
        V0 = np.zeros((3,) + self.gi.shape)
        span = self.taus[-1] - self.taus[0]
        return evolve_linear(self.gi, V0, span, self.bg, forcing=f, sample_every=self.h_tau)

    def psi_div_of(self, phi_t, k):
        """``-grad Lap^{-1} g`` with ``g = grad eta . phi`` after removing its mean; returns (field, mean)."""
        g = np.einsum("i...,i...->...", self.cut[k].grad, phi_t)
        m = float(np.mean(g))
        return -self.ops.inv_grad_div(g - m), m

    def outer_solve(self, F_hist) -> list:
        out = [np.zeros((3,) + self.gt.shape)]
        for k in range(len(self.times) - 1):
            t0, t1 = self.times[k], self.times[k + 1]
            F0, F1 = F_hist[k], F_hist[k + 1]
            fn = lambda t, u, t0=t0, F0=F0, F1=F1: F0 if t == t0 else F1
            cur = PhysicalField(self.gt, t0, out[-1])
            # forcing is frozen within one map application, so the step is a linear forced
            # heat step and stable for any dt; the advective guard does not apply
            nxt = step_outer(cur, fn, StokesStepPlan(t1 - t0, cfl=math.inf))
            out.append(np.asarray(nxt.values))
        return out


# ---------------------------------------------------------------- Picard map

def apply_map(eng: Engine, state: GluingState, parts: Sequence[str] = ("G", "L", "B")) -> GluingState:
    """``G + L[state] + B[state]`` (or any subset of the three) on the time grids."""
    keep = set(parts)
    S_hist, F_hist, divs, means = [], [], [], []
    for k, tau in enumerate(eng.taus):
        Pp = state.phi_per[k]
        psi = state.psi(k)
        Psi = eng.to_xi(psi, k) if np.any(psi) else None
        terms = inner_terms(eng.phi_l[k], Pp if np.any(Pp) else None, Psi, eng.Ubar, eng.N[k], eng.Nt[k])
        sel = {"G": ["G"], "L": ["L1", "L2", "L3"], "B": ["B1", "B2"]}
        S = np.zeros((3, 3) + eng.gi.shape)
        for grp in keep:
            for name in sel[grp]:
                if not np.isscalar(terms[name]):
                    S = S + terms[name]
        S_hist.append(S)
        # outer forcing: phi = phi_lin + phi_per mapped to the torus
        phl = eng.to_torus(eng.phi_l[k], k)
        php = eng.to_torus(Pp, k) if np.any(Pp) else 0.0 * phl
        cut = eng.cut[k]
        F = np.zeros((3,) + eng.gt.shape)
        if "G" in keep:
            F = F + outer_forcing_terms(eng.ops, phl, None, cut)["cutoff"]
        if "L" in keep and np.any(php):
            F = F + outer_forcing_terms(eng.ops, php, None, cut)["cutoff"]
        if np.any(psi):
            tr = outer_forcing_terms(eng.ops, phl + php, psi, cut)
            if "L" in keep:
                F = F + np.einsum("j...,j...->...", psi, cut.grad)[None] * phl
            if "B" in keep:
                F = F + tr["quadratic"] + np.einsum("j...,j...->...", psi, cut.grad)[None] * php
        F_hist.append(F)
        # gradient part from the same phi as the forcing
        if ("G" in keep) or ("L" in keep):
            src = (phl if "G" in keep else 0.0) + (php if "L" in keep else 0.0)
            d, m = eng.psi_div_of(src, k)
        else:
            d, m = np.zeros((3,) + eng.gt.shape), 0.0
        divs.append(d)
        means.append(m)
    phi_new = eng.inner_solve(S_hist)
    psi_new = eng.outer_solve(F_hist)
    out = GluingState(phi_new, psi_new, divs, state.iterate + 1, list(state.norms), list(state.contraction),
                      list(state.diffs), means)
    return out


def state_norms(eng: Engine, st: GluingState):
    X = eng.x_norm(st.phi_per)
    Y = eng.y_norm([st.psi(k) for k in range(len(eng.times))])
    return X, Y, X + Y


def state_distance(eng: Engine, a: GluingState, b: GluingState) -> float:
    X = eng.x_norm([p - q for p, q in zip(a.phi_per, b.phi_per)])
    Y = eng.y_norm([a.psi(k) - b.psi(k) for k in range(len(eng.times))])
    return X + Y


def picard_step(state: GluingState, eng: Engine) -> GluingState:
    new = apply_map(eng, state)
    X, Y, Z = state_norms(eng, new)
    new.norms.append((X, Y, Z))
    d = state_distance(eng, new, state)
    new.diffs.append(d)
    if len(state.diffs) and state.diffs[-1] > 0:
        new.contraction.append(d / state.diffs[-1])
    if not Z <= 1:
        first = "X (inner, Phi_per)" if not X <= 1 else ("Y (outer, psi)" if not Y <= 1 else "Z (sum)")
        raise ContractionError(f"iterate {new.iterate} leaves the unit ball: Z = {Z:.3e}; first violating norm {first}",
                               {"iterate": new.iterate, "X": X, "Y": Y, "Z": Z, "first": first,
                                "tbar": eng.cfg.tbar})
    return new


def solve(cfg: GluingConfig, eng: Engine | None = None, gate: Sequence[str] = GATE_ROWS):
    """Iterate to ``||state_k - state_{k-1}||_Z <= fp_tol``; returns ``(state, engine)``.

    At least ``min_iter`` steps are taken so that contraction ratios are observed.
    """
    check_gate(cfg.params, gate)
    eng = Engine(cfg) if eng is None else eng
    st = eng.zero_state()
    if cfg.start == "G":
        st = apply_map(eng, st, ("G",))
        st.iterate = 0
    st.norms.append(state_norms(eng, st))
    stalled = 0
    for _ in range(cfg.max_iter):
        st = picard_step(st, eng)
        if st.diffs[-1] <= cfg.fp_tol and st.iterate >= cfg.min_iter:
            return st, eng
        if st.contraction and st.contraction[-1] >= 1:
            stalled += 1
            if stalled >= 3:
                break
        else:
            stalled = 0
    raise ContractionError(f"no contraction after {st.iterate} iterations (tbar = {cfg.tbar})",
                           {"iterate": st.iterate, "diffs": st.diffs, "ratios": st.contraction,
                            "tbar": cfg.tbar, "first": "Z (no contraction)"})


def fixed_point_defect(eng: Engine, st: GluingState) -> float:
    return state_distance(eng, apply_map(eng, st), st)


# ---------------------------------------------------------------- assembly

def compute_forcing(bg: Background) -> ProfileField:
    """``P[-(1 + xi.grad) Ubar / 2 - Lap Ubar + Ubar.grad Ubar]`` on the box, exact drift."""
    g = bg.grid
    box = box_for(g, absorbing=False)
    U = np.asarray(bg.Ubar.values)
    o = box.ops
    dU = box.grad(U)
    r = -0.5 * U - 0.5 * np.einsum("j...,ji...->i...", g.mesh(), dU) - o.lap(U) \
        + np.einsum("j...,ji...->i...", U, dU)
    return ProfileField(g, bg.Ubar.tau, o.leray(r))


def physical_forcing(Fbar: ProfileField, grid: Grid3, t: float) -> np.ndarray:
    """``f(x, t) = t^{-3/2} F(x / sqrt t)`` sampled on ``grid`` (zero off the xi-box)."""
    st = math.sqrt(t)
    tg = np.asarray(grid.coords) / st
    return interpolate(np.asarray(Fbar.values), Fbar.grid, [tg, tg, tg], periodic=False) / t ** 1.5


@dataclass
class Assembled:
    times: np.ndarray
    u: list          # torus arrays, u = ubar + w + psi
    w: list          # torus representation of eta phi
    div_max: list    # spectral divergence of w + psi
    raw_div_max: list  # spectral divergence of eta phi + psi
    means: list


def assemble(eng: Engine, st: GluingState, every: int = 1) -> Assembled:
    """``u = ubar + eta phi + psi`` on the torus.

    ``eta phi`` is stored as ``w = P(eta phi) + grad Lap^{-1} g`` (``g`` as in
    ``psi_div``), which differs from ``eta phi`` by ``grad Lap^{-1}(eta div phi)``
    and makes ``div(w + psi)`` vanish to round-off.
    """
    ops = eng.ops
    ts, us, ws, dm, rdm, means = [], [], [], [], [], []
    for k in range(0, len(eng.times), every):
        t = eng.times[k]
        phi = eng.to_torus(eng.phi_l[k] + st.phi_per[k], k)
        eta = eng.cut[k].eta
        ep = eta * phi
        g = np.einsum("i...,i...->...", eng.cut[k].grad, phi)
        m = float(np.mean(g))
        w = ops.leray(ep) + ops.inv_grad_div(g - m)
        psi = st.psi_sol[k] - ops.inv_grad_div(g - m)
        ub = eng.to_torus(eng.Ubar, k)
        ts.append(t)
        us.append(ub + w + psi)
        ws.append(w)
        dm.append(float(np.max(np.abs(ops.div(w + psi)))))
        rdm.append(float(np.max(np.abs(ops.div(ep + psi)))))
        means.append(m)
    return Assembled(np.array(ts), us, ws, dm, rdm, means)


# ---------------------------------------------------------------- residual identities

def _conv(a, G):
    # (a . grad) b with G[j, i] = d_j b_i
    return np.einsum("j...,ji...->i...", a, G)


def splitting_identity(n: int = 32, t: float = 2.0 ** -6, gamma: float = 0.01, seed: int = 0,
                       modes: int = 3) -> dict:
    """Compare the full residual of ``u = ubar + phi eta + psi`` with its inner/outer split on random fields.

    All constituents are random trigonometric polynomials with an explicit time
    dependence; derivatives in time are exact, in space spectral.  Returns the
    relative gap between the directly computed full residual and
    ``eta R_in + R_out + (ubar.grad eta) phi + (1 - eta)(ubar.grad psi + psi.grad ubar)``.
    """
    g = torus(n)
    ops = ops_for(g)
    rng = np.random.default_rng(seed)
    X = g.mesh()

    def rand_field():
        A = np.zeros((3,) + g.shape)
        B = np.zeros((3,) + g.shape)
        for _ in range(6):
            k = rng.integers(-modes, modes + 1, 3)
            ph = np.einsum("i,i...->...", k, X) + rng.uniform(0, 2 * np.pi)
            A += rng.normal(size=3)[:, None, None, None] * np.cos(ph)
            B += rng.normal(size=3)[:, None, None, None] * np.sin(ph)
        return A, B

    # each constituent is A + s B with s = t (so d_t is B)
    ub, ubt = rand_field()
    ph, pht = rand_field()
    ps, pst = rand_field()
    ub0, ph0, ps0 = ub + t * ubt, ph + t * pht, ps + t * pst
    cut = cutoff_eval(CutoffSpec(gamma), X, t)
    eta = cut.eta
    G = ops.grad_vec
    lap = ops.lap
    # full residual of u, minus the background's own residual
    v = ph0 * eta + ps0
    vt = pht * eta + ph0 * cut.dt + pst
    Gv, Gub = G(v), G(ub0)
    full = vt - lap(v) + _conv(ub0, Gv) + _conv(v, Gub) + _conv(v, Gv)
    # inner and outer residuals as displayed (unprojected, convective form)
    Gph, Gps = G(ph0), G(ps0)
    Gphe = G(ph0 * eta)
    r_in = (pht - lap(ph0) + _conv(ub0, Gph) + _conv(ph0, Gub) + _conv(ph0, Gphe)
            + _conv(ph0, Gps) + _conv(ps0, Gph) + _conv(ub0, Gps) + _conv(ps0, Gub))
    gradeta_dot_gradphi = np.einsum("j...,ji...->i...", cut.grad, Gph)
    r_out = (pst - lap(ps0) + _conv(ps0, Gps) + ph0 * (cut.dt - cut.lap) - 2 * gradeta_dot_gradphi
             + np.einsum("j...,j...->...", ps0, cut.grad) * ph0)
    extra = np.einsum("j...,j...->...", ub0, cut.grad) * ph0 + (1 - eta) * (_conv(ub0, Gps) + _conv(ps0, Gub))
    split = eta * r_in + r_out + extra
    gap = float(np.sqrt(np.sum((full - split) ** 2)) / np.sqrt(np.sum(full ** 2)))
    ubar_eta_phi = float(np.max(np.abs(np.einsum("j...,j...->...", ub0, cut.grad))))
    return {"relative_gap": gap, "n": n, "full_l2": float(np.sqrt(np.sum(full ** 2) * g.dv)),
            "ubar_dot_grad_eta_max": ubar_eta_phi}


def full_residual(bg: Background, Fbar: ProfileField | None = None, tau: float = 0.0) -> float:
    """Projected similarity-variable residual of the steady background with its forcing.

    ``|| P[ (1 + xi.grad) U / 2 + Lap U - U.grad U + F ] ||_2 / ||F||_2``.
    """
    Fbar = compute_forcing(bg) if Fbar is None else Fbar
    g = bg.grid
    box = box_for(g, absorbing=False)
    U = np.asarray(bg.Ubar.values)
    dU = box.grad(U)
    o = box.ops
    r = 0.5 * U + 0.5 * np.einsum("j...,ji...->i...", g.mesh(), dU) + o.lap(U) \
        - np.einsum("j...,ji...->i...", U, dU) + np.asarray(Fbar.values)
    F = np.asarray(Fbar.values)
    den = np.linalg.norm(F)
    return float(np.linalg.norm(o.leray(r)) / den) if den > 0 else float(np.linalg.norm(o.leray(r)))


# ---------------------------------------------------------------- nontriviality

def nontriviality_margin(eng: Engine, st: GluingState | None, p: float | None = None,
                         stride: int = 4) -> list:
    """``(tau_k, ||Phi N + Psi||_{L^p} e^{-a tau_k})`` along the run's tau grid (every ``stride``-th point)."""
    p = float(eng.pr.p) if p is None else p
    a = eng.bg.a
    out = []
    for k in range(len(eng.taus) - 1, -1, -stride):
        tau = eng.taus[k]
        Phi = eng.phi_l[k] + (st.phi_per[k] if st is not None else 0.0)
        Psi = eng.to_xi(st.psi(k), k) if st is not None and np.any(st.psi(k)) else 0.0
        val = lp_norm(Phi * eng.N[k] + Psi, eng.gi, p) * math.exp(-a * tau)
        out.append((float(tau), float(val)))
    return out


def oscillation_subsequence(bg: Background, taus: np.ndarray) -> np.ndarray:
    """Mask selecting times where the phase of ``e^{i Im(lam) tau}`` is within pi/4 of the best phase.

    For real eigenvalues every time is kept.
    """
    w = float(np.imag(bg.lam))
    if abs(w) < 1e-12:
        return np.ones(len(taus), bool)
    ph = np.mod(w * np.asarray(taus), np.pi)
    return (ph < np.pi / 4) | (ph > 3 * np.pi / 4)
