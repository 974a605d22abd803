"""Similarity-variable operators on the truncated whole-space box.

The box operator is

    Lh V = mask P [ V/2 + (c . grad) V / 2 - sigma V + Lap V - (Ubar . grad) V - (V . grad) Ubar ]

where ``c`` equals ``xi`` in the interior and is tapered to zero in an absorbing
layer next to the box faces, and ``sigma`` is the damping rate of that layer.
With the layer switched off and ``Ubar = 0`` this is the drift operator
``V/2 + xi.grad V/2 + Lap V``.

Exact whole-space evolution of the drift operator is available through a
dilated Fourier transform (``oseen_response``); it needs no absorbing layer.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse.linalg as sla
from scipy import integrate

from .fields_and_transforms import (Grid3, ProfileField, TruncationWarning, WHOLE, L_INF_W, read_snapshot,
                                    smoothstep5, weighted_norm_values, write_snapshot, xi_box)
from .spectral_torus import SpectralOps, ops_for

LAYER_START = 0.6     # fraction of the half-side where the absorbing layer begins
LAYER_RATE = 4.0      # damping per unit of layer depth, summed over axes
SOLENOIDAL_SHIFT = 10.0
A_DRIFT = "A-drift"
LSS = "Lss"


class EigenSolveError(RuntimeError):
    def __init__(self, msg, ritz_history):
        super().__init__(msg)
        self.ritz_history = ritz_history


class StepSizeError(RuntimeError):
    pass


# ---------------------------------------------------------------- box machinery

class BoxOperator:
    """Discrete pieces of the similarity operators on one xi-grid."""

    def __init__(self, grid: Grid3, absorbing: bool = True):
        if grid.kind != WHOLE:
            raise ValueError("box operators need a truncated whole-space grid")
        self.grid = grid
        self.absorbing = absorbing
        self.ops: SpectralOps = ops_for(grid)
        X = grid.mesh()
        self.xi = X
        if absorbing:
            half = grid.side / 2
            start = LAYER_START * half
            s = smoothstep5((np.abs(X) - start) / (half - start))
            self.drift = X * (1 - s)
            self.sponge = LAYER_RATE * s.sum(axis=0)
        else:
            self.drift = np.array(X)
            self.sponge = np.zeros(grid.shape)
        ki = np.fft.fftfreq(grid.n, 1.0 / grid.n)
        self._kfull = 2 * np.pi / grid.side * ki

    # projections
    def project(self, V):
        o = self.ops
        return o.ifft(o.mask * o.leray_hat(o.fft(V)))

    def grad(self, V):
        return self.ops.grad_vec(V)

    def drift_part(self, V, dV=None):
        dV = self.grad(V) if dV is None else dV
        return 0.5 * V + 0.5 * np.einsum("j...,ji...->i...", self.drift, dV) - self.sponge * V

    def apply(self, V, Ub=None, dUb=None):
        o = self.ops
        vh = o.fft(V)
        dV = o.ifft(np.stack([1j * o.kd[j] * vh for j in range(3)]))
        r = 0.5 * V + 0.5 * np.einsum("j...,ji...->i...", self.drift, dV) - self.sponge * V
        if Ub is not None:
            r = r - np.einsum("j...,ji...->i...", Ub, dV) - np.einsum("j...,ji...->i...", V, dUb)
        rh = o.fft(r) - o.k2 * vh
        return o.ifft(o.mask * o.leray_hat(rh))

    def rate_bound(self, Ub=None, dUb=None) -> float:
        """Crude bound on the spectral radius of ``apply`` (used to pick RK4 steps)."""
        o = self.ops
        k2 = float(np.max(o.k2[o.mask]))
        kmax = math.sqrt(k2)
        cmax = float(np.max(np.sqrt(np.sum(self.drift ** 2, axis=0))))
        r = k2 + 0.5 * kmax * cmax + float(self.sponge.max()) + 0.5
        if Ub is not None:
            r += kmax * float(np.max(np.sqrt(np.sum(Ub ** 2, axis=0)))) + float(np.max(np.abs(dUb))) * 3
        return r


@lru_cache(maxsize=8)
def box_for(grid: Grid3, absorbing: bool = True) -> BoxOperator:
    return BoxOperator(grid, absorbing)


# ---------------------------------------------------------------- background

@dataclass(frozen=True, eq=False)
class Background:
    Ubar: ProfileField
    lam: complex = complex("nan")
    rho_re: ProfileField | None = None
    rho_im: ProfileField | None = None
    residual: float = math.nan
    family: str = "custom"
    amplitude: float = math.nan
    iterations: int = 0

    @property
    def grid(self) -> Grid3:
        return self.Ubar.grid

    @property
    def a(self) -> float:
        return float(np.real(self.lam))

    @property
    def has_eigenpair(self) -> bool:
        return self.rho_re is not None

    @property
    def rho(self) -> np.ndarray:
        im = 0.0 if self.rho_im is None else np.asarray(self.rho_im.values)
        return np.asarray(self.rho_re.values) + 1j * im

    def fields(self):
        """``(Ubar, grad Ubar)`` arrays, gradient cached on first use."""
        cache = self.__dict__.setdefault("_cache", {})
        if "d" not in cache:
            U = np.asarray(self.Ubar.values)
            cache["d"] = (U, box_for(self.grid).grad(U))
        return cache["d"]

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        write_snapshot(d / "ubar.snap", self.Ubar)
        if self.has_eigenpair:
            write_snapshot(d / "rho_re.snap", self.rho_re)
            write_snapshot(d / "rho_im.snap", self.rho_im)
        meta = {"format": "gluelab-background v1", "lambda_re": float(np.real(self.lam)),
                "lambda_im": float(np.imag(self.lam)), "residual": self.residual,
                "family": self.family, "amplitude": self.amplitude, "iterations": self.iterations}
        (d / "background.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
        return d

    @classmethod
    def load(cls, directory) -> "Background":
        d = Path(directory)
        meta = json.loads((d / "background.json").read_text())
        U = read_snapshot(d / "ubar.snap")
        re = im = None
        if (d / "rho_re.snap").exists():
            re = read_snapshot(d / "rho_re.snap")
            im = read_snapshot(d / "rho_im.snap")
        return cls(U, complex(meta["lambda_re"], meta["lambda_im"]), re, im, meta["residual"],
                   meta["family"], meta["amplitude"], meta.get("iterations", 0))


def _bump(r):
    return np.where(r < 1, (1 - np.minimum(r, 1) ** 2) ** 3, 0.0)


def synthetic_profile(family: str, amplitude: float, grid: Grid3) -> ProfileField:
    """Divergence-free profiles built from ``chi(|xi|) e3 x xi`` with ``chi = (1-|xi|^2)^3`` on the unit ball.

    ``swirl``: the azimuthal field itself; ``curl``: its curl (poloidal).
    Both are passed through the box projector so the grid divergence vanishes.
    """
    box = box_for(grid)
    X = grid.mesh()
    chi = _bump(grid.radius())
    V = np.stack([-X[1] * chi, X[0] * chi, np.zeros_like(chi)])
    if family == "swirl":
        U = box.project(V)
    elif family == "curl":
        U = box.project(box.ops.curl(V))
    elif family == "zero":
        U = np.zeros_like(V)
    else:
        raise ValueError(f"unknown background family {family!r}")
    return ProfileField(grid, 0.0, amplitude * U)


@dataclass(frozen=True)
class LinOpSpec:
    which: str
    grid: Grid3
    background: Background | None = None
    absorbing: bool = True

    def __post_init__(self):
        if self.which not in (A_DRIFT, LSS):
            raise ValueError(f"unknown operator {self.which!r}")
        if self.which == LSS and self.background is None:
            raise ValueError("the linearized operator needs a background")
        if self.grid.kind != WHOLE:
            raise ValueError("operators act on the truncated whole-space grid")


def apply_linop(spec: LinOpSpec, U: ProfileField, warn_tol: float = 1e-3) -> ProfileField:
    if U.grid != spec.grid:
        raise ValueError("profile grid does not match the operator grid")
    if U.edge_fraction() > warn_tol:
        warnings.warn("profile has mass near the box boundary", TruncationWarning, stacklevel=2)
    box = box_for(spec.grid, spec.absorbing)
    if spec.which == LSS:
        Ub, dUb = spec.background.fields()
        out = box.apply(np.asarray(U.values), Ub, dUb)
    else:
        out = box.apply(np.asarray(U.values))
    return ProfileField(U.grid, U.tau, out)


# ---------------------------------------------------------------- exact drift semigroup

@lru_cache(maxsize=32)
def _ft_matrices(n, side, scale):
    """Per-axis continuous Fourier transform at wavenumbers ``scale * k`` and the box inverse."""
    h = side / n
    x = -side / 2 + h * np.arange(n)
    k = 2 * np.pi / side * np.fft.fftfreq(n, 1.0 / n)
    fwd = h * np.exp(-1j * scale * np.outer(k, x))
    inv = np.exp(1j * np.outer(x, k)) / side
    return fwd, inv


def _apply_axes(f, mats):
    # contract the last three axes with the given matrices (out_index, in_index)
    for ax, m in zip((-3, -2, -1), mats):
        f = np.moveaxis(np.tensordot(f, m, axes=([ax], [1])), -1, ax)
    return f


def dilated_ft(values: np.ndarray, grid: Grid3, scale: float) -> np.ndarray:
    """``f_hat(scale * k)`` for the box wavenumbers ``k``; ``f`` taken as zero outside the box."""
    fwd, _ = _ft_matrices(grid.n, grid.side, float(scale))
    return _apply_axes(np.asarray(values, dtype=complex), (fwd, fwd, fwd))


def box_inverse(fhat: np.ndarray, grid: Grid3) -> np.ndarray:
    _, inv = _ft_matrices(grid.n, grid.side, 1.0)
    return _apply_axes(fhat, (inv, inv, inv)).real


def _wavevectors(grid: Grid3):
    k = 2 * np.pi / grid.side * np.fft.fftfreq(grid.n, 1.0 / grid.n)
    K = np.stack(np.meshgrid(k, k, k, indexing="ij"))
    return K, np.sum(K * K, axis=0)


def _proj_div_hat(Mhat, K, K2):
    # P(k) (i k . M)_i with (div M)_i = d_j M_ij
    v = 1j * np.einsum("ij...,j...->i...", Mhat, K)
    d = np.einsum("i...,i...->...", K, v) / np.where(K2 > 0, K2, 1.0)
    return v - K * d


def oseen_response(M: ProfileField, s: float) -> ProfileField:
    """``e^{s A} P div M`` on the whole space, via the exact Fourier form of the drift semigroup

        U_hat(k, s) = e^{-s} e^{-|k|^2 (1 - e^{-s})} V_hat(k e^{-s/2}),  V = P div M.
    """
    if s < 0:
        raise ValueError("duration must be non-negative")
    grid = M.grid
    vals = np.asarray(M.values)
    if vals.shape[:2] != (3, 3):
        raise ValueError("M must be a 3x3 tensor field")
    K, K2 = _wavevectors(grid)
    q = math.exp(-s / 2)
    Mh = dilated_ft(vals, grid, q)
    Vh = _proj_div_hat(Mh, K * q, K2 * q * q)
    Uh = math.exp(-s) * np.exp(-K2 * (1 - math.exp(-s))) * Vh
    return ProfileField(grid, M.tau + s, box_inverse(Uh, grid))


def drift_semigroup(V: ProfileField, s: float) -> ProfileField:
    """``e^{s A} V`` for a vector profile, exact in Fourier."""
    grid = V.grid
    K, K2 = _wavevectors(grid)
    Vh = dilated_ft(np.asarray(V.values), grid, math.exp(-s / 2))
    Uh = math.exp(-s) * np.exp(-K2 * (1 - math.exp(-s))) * Vh
    return ProfileField(grid, V.tau + s, box_inverse(Uh, grid))


# ---------------------------------------------------------------- time stepping

def _rk4(f, V, dt):
    k1 = f(V, 0.0)
    k2 = f(V + 0.5 * dt * k1, 0.5)
    k3 = f(V + 0.5 * dt * k2, 0.5)
    k4 = f(V + dt * k3, 1.0)
    return V + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


_RADIUS_CACHE: dict = {}


def spectral_radius(box: BoxOperator, Ub=None, dUb=None) -> float:
    """Largest eigenvalue modulus of the box operator, by a loose Arnoldi solve (cached)."""
    key = (box.grid, box.absorbing, None if Ub is None else hash(np.asarray(Ub).tobytes()))
    if key in _RADIUS_CACHE:
        return _RADIUS_CACHE[key]
    shape = (3,) + box.grid.shape
    N = int(np.prod(shape))
    op = sla.LinearOperator((N, N), matvec=lambda v: box.apply(v.reshape(shape), Ub, dUb).ravel(),
                            dtype=float)
    v0 = np.random.default_rng(1).standard_normal(N)
    try:
        w = sla.eigs(op, k=4, which="LM", tol=1e-3, v0=v0, return_eigenvectors=False, maxiter=2000)
        rad = float(np.max(np.abs(w))) * 1.05
    except sla.ArpackNoConvergence:
        rad = box.rate_bound(Ub, dUb)
    _RADIUS_CACHE[key] = rad
    return rad


def stable_dt(box: BoxOperator, Ub=None, dUb=None, safety: float = 2.2) -> float:
    """RK4 step with ``dt * |lambda|max = safety``; the RK4 region reaches 2.8 on both axes."""
    return safety / spectral_radius(box, Ub, dUb)


def evolve_linear(grid: Grid3, V0: np.ndarray, duration: float, bg: Background | None = None,
                  forcing: Callable[[float], np.ndarray] | None = None, dt: float | None = None,
                  absorbing: bool = True, sample_every: float | None = None):
    """RK4 for ``dV/ds = Lh V + g(s)`` from ``s = 0``.

    ``forcing(s)`` must already be projected.  With ``sample_every`` the states at
    multiples of that spacing are returned as a list (starting with ``V0``).
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    box = box_for(grid, absorbing)
    Ub, dUb = bg.fields() if bg is not None else (None, None)
    lim = stable_dt(box, Ub, dUb)
    if dt is None:
        dt = lim
    elif dt > lim * 1.25:
        raise StepSizeError(f"dt={dt:.3e} exceeds the stability estimate {lim:.3e}")
    V = np.array(V0, dtype=float)
    if sample_every is None:
        segments = [duration]
    else:
        m = int(round(duration / sample_every))
        if abs(m * sample_every - duration) > 1e-9 * max(1.0, duration):
            raise ValueError("duration must be a multiple of sample_every")
        segments = [sample_every] * m
    out = [V.copy()]
    s0 = 0.0
    for seg in segments:
        nsub = max(1, int(math.ceil(seg / dt - 1e-12)))
        h = seg / nsub
        for j in range(nsub):
            base = s0 + j * h
            if forcing is None:
                rhs = lambda W, frac: box.apply(W, Ub, dUb)
            else:
                rhs = lambda W, frac, base=base: box.apply(W, Ub, dUb) + forcing(base + frac * h)
            V = _rk4(rhs, V, h)
        s0 += seg
        out.append(V.copy())
    return out if sample_every is not None else V


def semigroup_Lss(V0: ProfileField, tau: float, bg: Background, dt: float | None = None,
                  absorbing: bool = True) -> ProfileField:
    """``e^{tau Lss} V0`` by RK4 on the box operator.

    The default step is half the stability step; at the full step the RK4
    error on the stiff modes reaches about 2e-6 relative by ``tau = 2``.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if V0.grid != bg.grid:
        raise ValueError("profile and background grids differ")
    if dt is None:
        dt = stable_dt(box_for(V0.grid, absorbing), *bg.fields(), safety=1.1)
    V = evolve_linear(V0.grid, np.asarray(V0.values), tau, bg, dt=dt, absorbing=absorbing)
    return ProfileField(V0.grid, V0.tau + tau, V)


def zero_background(grid: Grid3) -> Background:
    return Background(ProfileField(grid, 0.0, np.zeros((3,) + grid.shape)), family="zero", amplitude=0.0)


# ---------------------------------------------------------------- eigenpairs

@dataclass
class EigenReport:
    lam: complex
    residual: float
    matvecs: int
    ritz: list = field(default_factory=list)
    seconds: float = 0.0


def _residual(box, rho, lam, Ub, dUb):
    r = box.apply(rho.real, Ub, dUb) + 1j * box.apply(rho.imag, Ub, dUb) - lam * rho
    return float(np.sqrt(np.sum(np.abs(r) ** 2) / np.sum(np.abs(rho) ** 2)))


def dominant_eigenpair(Ubar: ProfileField, horizon: float = 1.0, tol: float = 1e-6, max_iter: int = 200,
                       seed: int = 0, nev: int = 6, ncv: int = 40, absorbing: bool = True):
    """Eigenvalue of largest real part of the box operator on solenoidal fields.

    Implicitly restarted Arnoldi on ``Lh - S (I - P)``, which pushes the
    non-solenoidal directions to ``-S``.  ``horizon`` only converts the result
    to the propagator multiplier ``mu = e^{horizon * lambda}`` reported in the
    Ritz history.  ``max_iter`` counts Arnoldi restarts.
    Returns ``(lam, rho, report)`` with ``rho`` complex, normalized to unit
    weighted sup-norm and phase-aligned so that its real part dominates.
    """
    import time
    grid = Ubar.grid
    box = box_for(grid, absorbing)
    Ub = np.asarray(Ubar.values)
    dUb = box.grad(Ub)
    shape = (3,) + grid.shape
    N = int(np.prod(shape))
    count = [0]

    def mv(v):
        count[0] += 1
        V = v.reshape(shape)
        return (box.apply(V, Ub, dUb) - SOLENOIDAL_SHIFT * (V - box.project(V))).ravel()

    op = sla.LinearOperator((N, N), matvec=mv, dtype=float)
    rng = np.random.default_rng(seed)
    v0 = box.project(rng.standard_normal(shape)).ravel()
    t0 = time.time()
    try:
        w, vecs = sla.eigs(op, k=nev, which="LR", v0=v0, tol=tol * 1e-2, ncv=ncv, maxiter=max_iter * ncv)
    except sla.ArpackNoConvergence as exc:
        ritz = [complex(z) for z in exc.eigenvalues]
        raise EigenSolveError(f"Arnoldi did not converge after {count[0]} applications", ritz) from None
    order = np.argsort(-w.real)
    w, vecs = w[order], vecs[:, order]
    lam = complex(w[0])
    rho = vecs[:, 0].reshape(shape)
    # align phase so that the real part carries the largest weighted norm
    phases = np.exp(-1j * np.linspace(0, np.pi, 64, endpoint=False))
    c = grid.coords
    best = max(phases, key=lambda ph: weighted_norm_values((rho * ph).real, grid, L_INF_W))
    rho = rho * best
    if abs(lam.imag) < 1e-10 * max(1.0, abs(lam)):
        lam = complex(lam.real, 0.0)
        rho = rho.real + 0j
    nrm = weighted_norm_values(np.abs(rho), grid, L_INF_W)
    rho = rho / nrm
    res = _residual(box, rho, lam, Ub, dUb)
    ritz = [(complex(z), complex(np.exp(horizon * z))) for z in w]
    report = EigenReport(lam, res, count[0], ritz, time.time() - t0)
    if res > tol:
        raise EigenSolveError(f"residual {res:.2e} above tolerance {tol:.1e}", ritz)
    return lam, rho, report


def compute_background(family: str, amplitude: float, grid: Grid3 | None = None, tol: float = 1e-6,
                       seed: int = 0, **kw) -> tuple[Background, EigenReport]:
    grid = xi_box(32, 4.0) if grid is None else grid
    U = synthetic_profile(family, amplitude, grid)
    lam, rho, rep = dominant_eigenpair(U, tol=tol, seed=seed, **kw)
    bg = Background(U, lam, ProfileField(grid, 0.0, rho.real), ProfileField(grid, 0.0, rho.imag),
                    rep.residual, family, amplitude, rep.matvecs)
    return bg, rep


def solenoidal_basis(grid: Grid3) -> np.ndarray:
    """Orthonormal real basis (columns, L2 of grid values) of the range of the box projector."""
    n = grid.n
    box = box_for(grid)
    o = box.ops
    ki = np.fft.fftfreq(n, 1.0 / n).astype(int)
    X = grid.mesh()
    cols = []
    for c in range(3):
        e = np.zeros((3,) + grid.shape)
        e[c] = 1.0
        cols.append(e.ravel())
    seen = set()
    lim = o.spec.dealias * (n / 2)
    for a in ki:
        for b in ki:
            for cc in ki:
                key = (int(a), int(b), int(cc))
                if key == (0, 0, 0) or a * a + b * b + cc * cc > lim * lim:
                    continue
                neg = (-key[0], -key[1], -key[2])
                if neg in seen:
                    continue
                seen.add(key)
                k = 2 * np.pi / grid.side * np.array(key, dtype=float)
                u = k / np.linalg.norm(k)
                # two unit vectors orthogonal to k
                t = np.array([1.0, 0, 0]) if abs(u[0]) < 0.9 else np.array([0, 1.0, 0])
                e1 = np.cross(u, t)
                e1 /= np.linalg.norm(e1)
                e2 = np.cross(u, e1)
                ph = np.einsum("i,i...->...", k, X)
                for e in (e1, e2):
                    for wave in (np.cos(ph), np.sin(ph)):
                        cols.append((e[:, None, None, None] * wave).ravel())
    Q = np.array(cols).T
    Q, _ = np.linalg.qr(Q)
    return Q


def dense_spectrum(Ubar: ProfileField, absorbing: bool = True) -> np.ndarray:
    """All eigenvalues of the box operator restricted to its solenoidal range, by dense solve.

    Meant for coarse grids (16^3): the range has dimension about 1.3e3 there.
    """
    grid = Ubar.grid
    box = box_for(grid, absorbing)
    Ub = np.asarray(Ubar.values)
    dUb = box.grad(Ub)
    Q = solenoidal_basis(grid)
    shape = (3,) + grid.shape
    AQ = np.empty_like(Q)
    for j in range(Q.shape[1]):
        AQ[:, j] = box.apply(Q[:, j].reshape(shape), Ub, dUb).ravel()
    B = Q.T @ AQ
    return np.linalg.eigvals(B)


def duhamel_eigenfunction(bg: Background, nodes: int = 24) -> np.ndarray:
    """Rebuild rho from its forcing through the whole-space heat flow:

        rho_hat(k) = int_0^1 e^{-|k|^2 (1-s)} s^{lam+1/2} P(k) i k . F_hat(k sqrt(s)) ds,
        F = -(Ubar (x) rho + rho (x) Ubar).
    """
    grid = bg.grid
    Ub = np.asarray(bg.Ubar.values)
    rho = bg.rho
    F = -(np.einsum("i...,j...->ij...", Ub, rho) + np.einsum("i...,j...->ij...", rho, Ub))
    K, K2 = _wavevectors(grid)
    xs, ws = np.polynomial.legendre.leggauss(nodes)
    s_nodes = 0.5 * (xs + 1)
    acc = np.zeros((3,) + grid.shape, dtype=complex)
    for s, w in zip(s_nodes, 0.5 * ws):
        Fh = dilated_ft(F, grid, math.sqrt(s))
        acc += w * np.exp(-K2 * (1 - s)) * s ** (bg.lam + 0.5) * _proj_div_hat(Fh, K, K2)
    _, inv = _ft_matrices(grid.n, grid.side, 1.0)
    return _apply_axes(acc, (inv, inv, inv))


def duhamel_check(bg: Background, nodes: int = 24) -> dict:
    """Relative weighted sup-norm gap between rho and its heat-flow reconstruction.

    ``interior`` restricts both norms to the cube inside the absorbing layer,
    ``full`` uses the whole box.
    """
    g = bg.grid
    rho = bg.rho
    R = duhamel_eigenfunction(bg, nodes)
    diff = R - rho
    inner = np.max(np.abs(g.mesh()), axis=0) <= LAYER_START * g.side / 2
    out = {}
    for name, m in (("full", np.ones(g.shape, bool)), ("interior", inner)):
        num = weighted_norm_values(np.abs(diff) * m, g, L_INF_W)
        den = weighted_norm_values(np.abs(rho) * m, g, L_INF_W)
        out[name] = num / den
    out["weighted_sup"] = weighted_norm_values(np.abs(rho), g, L_INF_W)
    return out


# ---------------------------------------------------------------- convolution inequality

def _bracket(z):
    return np.sqrt(1.0 + np.asarray(z) ** 2)


def _sphere_area(m):
    """Area of the unit sphere in R^m."""
    return 2 * math.pi ** (m / 2) / math.gamma(m / 2)


def _check_exponents(d, alpha, beta, delta):
    if d not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if alpha <= d or beta <= d:
        raise ValueError(f"need alpha, beta > d (got alpha={alpha}, beta={beta}, d={d}); the integral diverges")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")


def _ang_integral(d, f_of_dist, x, r, lo=0.0, hi=math.pi):
    """Angular integral over directions of y (|y| = r) of f(|x - y|), restricted to polar angle in [lo, hi]."""
    if d == 1:
        raise ValueError("no angular integral in one dimension")
    wgt = (lambda th: 1.0) if d == 2 else math.sin

    def g(th):
        dist = math.sqrt(max(x * x + r * r - 2 * x * r * math.cos(th), 0.0))
        return f_of_dist(dist) * wgt(th)

    if hi <= lo:
        return 0.0
    val, _ = integrate.quad(g, lo, hi, epsabs=0, epsrel=1e-10, limit=200)
    # circle: both half-planes; sphere: azimuthal factor 2 pi
    return 2 * val if d == 2 else 2 * math.pi * val


def convolution_regions(d: int, alpha: float, beta: float, delta: float, x: float) -> dict:
    """The integral split over R1 = {|y| <= |x|/2}, R2 = {|x-y| <= |x|/2} and the rest."""
    _check_exponents(d, alpha, beta, delta)
    x = abs(float(x))
    ka = lambda z: (1.0 + z * z) ** (-alpha / 2)
    kb = lambda r: (1.0 + (r / delta) ** 2) ** (-beta / 2)
    opts = dict(epsabs=0, epsrel=1e-11, limit=400)
    if d == 1:
        f = lambda y: ka(x - y) * kb(abs(y))
        if x == 0:
            tot = 2 * integrate.quad(lambda y: ka(y) * kb(y), 0, np.inf, **opts)[0]
            return {"R1": 0.0, "R2": 0.0, "R3": tot, "total": tot}
        r1 = integrate.quad(f, -x / 2, x / 2, points=[0.0], **opts)[0]
        r2 = integrate.quad(f, x / 2, 1.5 * x, points=[x], **opts)[0]
        r3 = (integrate.quad(f, 1.5 * x, np.inf, **opts)[0] + integrate.quad(f, -np.inf, -x / 2, **opts)[0])
        return {"R1": r1, "R2": r2, "R3": r3, "total": r1 + r2 + r3}
    ang = lambda r, lo=0.0, hi=math.pi: _ang_integral(d, ka, x, r, lo, hi)
    if x == 0:
        tot = _sphere_area(d) * integrate.quad(lambda r: r ** (d - 1) * ka(r) * kb(r), 0, np.inf,
                                               points=None, **opts)[0]
        return {"R1": 0.0, "R2": 0.0, "R3": tot, "total": tot}

    def split_angle(r):
        # polar angle below which |x - y| <= |x|/2
        c = (r * r + 0.75 * x * x) / (2 * x * r)
        return math.acos(min(1.0, max(-1.0, c)))

    def in_r2(r):
        return ang(r, 0.0, split_angle(r))

    def out_r2(r):
        return ang(r, split_angle(r), math.pi)

    pts = [delta] if delta < x / 2 else None
    r1 = integrate.quad(lambda r: r ** (d - 1) * kb(r) * ang(r), 0, x / 2, points=pts, **opts)[0]
    r2 = integrate.quad(lambda r: r ** (d - 1) * kb(r) * in_r2(r), x / 2, 1.5 * x, points=[x], **opts)[0]
    r3 = (integrate.quad(lambda r: r ** (d - 1) * kb(r) * out_r2(r), x / 2, 1.5 * x, points=[x], **opts)[0]
          + integrate.quad(lambda r: r ** (d - 1) * kb(r) * ang(r), 1.5 * x, np.inf, **opts)[0])
    return {"R1": r1, "R2": r2, "R3": r3, "total": r1 + r2 + r3}


def convolution_integral(d: int, alpha: float, beta: float, delta: float, x: float) -> float:
    """``int <x - y>^{-alpha} <y / delta>^{-beta} dy`` over R^d, by direct quadrature (no region split)."""
    _check_exponents(d, alpha, beta, delta)
    x = abs(float(x))
    ka = lambda z: (1.0 + z * z) ** (-alpha / 2)
    kb = lambda r: (1.0 + (r / delta) ** 2) ** (-beta / 2)
    opts = dict(epsabs=0, epsrel=1e-11, limit=400)
    if d == 1:
        pts = sorted({0.0, x})
        lo, hi = pts[0] - 1.0, pts[-1] + 1.0
        mid = integrate.quad(lambda y: ka(x - y) * kb(abs(y)), lo, hi, points=pts, **opts)[0]
        left = integrate.quad(lambda y: ka(x - y) * kb(abs(y)), -np.inf, lo, **opts)[0]
        right = integrate.quad(lambda y: ka(x - y) * kb(abs(y)), hi, np.inf, **opts)[0]
        return left + mid + right
    pts = [p for p in (delta, x) if p > 0]
    f = lambda r: r ** (d - 1) * kb(r) * _ang_integral(d, ka, x, r)
    top = max(pts) + 1.0
    return (integrate.quad(f, 0, top, points=pts, **opts)[0] + integrate.quad(f, top, np.inf, **opts)[0])


def convolution_bound_oracle(d: int, alpha: float, beta: float, delta: float, x: float) -> float:
    """Ratio of the integral to ``<x>^{-min(alpha, beta)} delta^d``."""
    val = convolution_integral(d, alpha, beta, delta, x)
    return val / (_bracket(x) ** (-min(alpha, beta)) * delta ** d)


def _sphere_rule(nr=64, nt=16, nphi=32):
    """Quadrature nodes and weights for functions on R^3 with algebraic decay.

    Radius mapped as ``r = u / (1 - u)`` with Gauss-Legendre in ``u``.
    """
    xu, wu = np.polynomial.legendre.leggauss(nr)
    u = 0.5 * (xu + 1)
    r = u / (1 - u)
    wr = 0.5 * wu / (1 - u) ** 2 * r * r
    xc, wc = np.polynomial.legendre.leggauss(nt)
    phi = 2 * np.pi * np.arange(nphi) / nphi
    st = np.sqrt(1 - xc * xc)
    dirs = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)), np.outer(xc, np.ones(nphi))])
    wd = np.outer(wc, np.full(nphi, 2 * np.pi / nphi))
    pts = r[None, :, None, None] * dirs[:, None, :, :]
    w = wr[:, None, None] * wd[None]
    return pts.reshape(3, -1), w.ravel()


def weighted_convolution(f: Callable[[np.ndarray], np.ndarray], delta: float, beta: float,
                         x_points: np.ndarray, rule=None) -> np.ndarray:
    """``int |f(x - y)| <y / delta>^{-beta} dy`` in R^3 at the given points (shape ``(3, m)``)."""
    if beta <= 3:
        raise ValueError("beta must exceed the dimension")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    z, w = _sphere_rule() if rule is None else rule
    kern = (1.0 + np.sum(z * z, axis=0)) ** (-beta / 2)
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    out = np.empty(x_points.shape[1])
    for j in range(x_points.shape[1]):
        y = delta * z
        out[j] = delta ** 3 * np.sum(w * kern * np.abs(f(x_points[:, j:j + 1] - y)))
    return out


def holder_bound_factor(zeta: float, beta: float, p: float, delta: float, x: float, d: int = 3) -> float:
    """``[I_{d, zeta p', beta p'}(delta)]^{1/p'}`` evaluated at ``x``."""
    if p <= 1:
        raise ValueError("p must exceed 1 here")
    pp = p / (p - 1) if math.isfinite(p) else 1.0
    return convolution_integral(d, zeta * pp, beta * pp, delta, x) ** (1.0 / pp)


@dataclass(frozen=True)
class GaussianMix:
    """Seeded sum of isotropic Gaussians in R^3, with its weighted L^p norm by quadrature."""
    centers: np.ndarray
    widths: np.ndarray
    amps: np.ndarray

    @classmethod
    def random(cls, seed: int, m: int = 6, spread: float = 1.5):
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0, spread, (3, m)), rng.uniform(0.3, 1.0, m), rng.uniform(-1, 1, m))

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[1:])
        for c, w, a in zip(self.centers.T, self.widths, self.amps):
            d2 = np.sum((pts - c.reshape((3,) + (1,) * (pts.ndim - 1))) ** 2, axis=0)
            out += a * np.exp(-d2 / (2 * w * w))
        return out

    def weighted_norm(self, zeta: float, p: float, n: int = 96, side: float = 24.0) -> float:
        h = side / n
        c = -side / 2 + h * (np.arange(n) + 0.5)
        X = np.stack(np.meshgrid(c, c, c, indexing="ij"))
        v = (1 + np.sum(X * X, axis=0)) ** (zeta / 2) * np.abs(self(X))
        if math.isinf(p):
            return float(v.max())
        return float((np.sum(v ** p) * h ** 3) ** (1 / p))
