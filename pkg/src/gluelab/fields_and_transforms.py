"""Grids, similarity-variable transforms, cutoffs, weighted norms and the X/Y/Z norms.

Conventions
-----------
* Vector fields are arrays of shape ``(3, n, n, n)``; tensors ``(3, 3, n, n, n)``.
* Torus grids cover ``[-pi, pi)^3`` (side ``2 pi``); truncated whole-space grids
  cover ``[-side/2, side/2)^3`` and fields are taken to vanish outside.
* Similarity variables: ``xi = x / sqrt(t)``, ``tau = log t``,
  ``u(x, t) = t^{-1/2} U(xi, tau)`` and ``f(x, t) = t^{-3/2} F(xi, tau)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels

TORUS = "torus"
WHOLE = "truncated-whole-space"
DIV_TOL = 1e-10
SUPPORT_FRACTION = 0.9


class TruncationError(RuntimeError):
    pass


class TruncationWarning(UserWarning):
    pass


# ---------------------------------------------------------------- grids

@dataclass(frozen=True)
class Grid3:
    n: int
    side: float = 2 * math.pi
    kind: str = TORUS

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.side > 0:
            raise ValueError("side must be positive")
        if self.kind not in (TORUS, WHOLE):
            raise ValueError(f"unknown grid kind {self.kind!r}")

    @property
    def h(self) -> float:
        return self.side / self.n

    @property
    def dv(self) -> float:
        return self.h ** 3

    @property
    def coords(self) -> np.ndarray:
        return _coords(self.n, self.side)

    def mesh(self) -> np.ndarray:
        return _mesh(self.n, self.side)

    def radius(self) -> np.ndarray:
        return _radius(self.n, self.side)

    @property
    def shape(self):
        return (self.n,) * 3


def torus(n: int = 32) -> Grid3:
    return Grid3(n, 2 * math.pi, TORUS)


def xi_box(n: int = 32, side: float = 16.0) -> Grid3:
    return Grid3(n, side, WHOLE)


@lru_cache(maxsize=32)
def _coords(n, side):
    c = -side / 2 + (side / n) * np.arange(n)
    c.setflags(write=False)
    return c


@lru_cache(maxsize=16)
def _mesh(n, side):
    c = _coords(n, side)
    m = np.stack(np.meshgrid(c, c, c, indexing="ij"))
    m.setflags(write=False)
    return m


@lru_cache(maxsize=16)
def _radius(n, side):
    m = _mesh(n, side)
    r = np.sqrt(np.einsum("c...,c...->...", m, m))
    r.setflags(write=False)
    return r


# ---------------------------------------------------------------- fields

def _frozen(a):
    v = np.asarray(a).view()
    v.flags.writeable = False
    return v


def spectral_divergence(values: np.ndarray, grid: Grid3) -> np.ndarray:
    """Pseudo-spectral divergence of a real vector field (Nyquist derivative set to zero)."""
    from scipy import fft as sfft
    k = _dk(grid.n, grid.side)
    vh = sfft.rfftn(values, axes=(1, 2, 3))
    dh = 1j * (k[0][:, None, None] * vh[0] + k[1][None, :, None] * vh[1] + k[2][None, None, :] * vh[2])
    return sfft.irfftn(dh, s=grid.shape, axes=(0, 1, 2))


@lru_cache(maxsize=16)
def _dk(n, side):
    k = 2 * np.pi / side * np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    kz = 2 * np.pi / side * np.fft.rfftfreq(n, 1.0 / n)
    kz[-1] = 0.0
    return k, k.copy(), kz


@dataclass(frozen=True, eq=False)
class PhysicalField:
    grid: Grid3
    time: float
    values: np.ndarray
    spectral: bool = False
    divfree: bool = False

    def __post_init__(self):
        if self.grid.kind != TORUS:
            raise ValueError("PhysicalField lives on a torus grid")
        if not self.time > 0:
            raise ValueError("time must be positive")
        object.__setattr__(self, "values", _frozen(self.values))
        if self.divfree:
            d = self.divergence_max()
            scale = max(float(np.max(np.abs(self.physical_values()))), 1e-300)
            if d > DIV_TOL * max(scale / self.grid.h, 1.0):
                raise ValueError(f"field flagged divergence-free has spectral divergence {d:.3e}")

    def physical_values(self) -> np.ndarray:
        if not self.spectral:
            return self.values
        from scipy import fft as sfft
        return sfft.irfftn(self.values, s=self.grid.shape, axes=(-3, -2, -1))

    def spectral_values(self) -> np.ndarray:
        if self.spectral:
            return self.values
        from scipy import fft as sfft
        return sfft.rfftn(self.values, axes=(-3, -2, -1))

    def to_physical(self) -> "PhysicalField":
        return self if not self.spectral else PhysicalField(self.grid, self.time, self.physical_values(),
                                                            False, False)

    def divergence_max(self) -> float:
        return float(np.max(np.abs(spectral_divergence(self.physical_values(), self.grid))))


@dataclass(frozen=True, eq=False)
class ProfileField:
    grid: Grid3
    tau: float
    values: np.ndarray

    def __post_init__(self):
        if self.grid.kind != WHOLE:
            raise ValueError("ProfileField lives on a truncated whole-space grid")
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def time(self) -> float:
        return math.exp(self.tau)

    def edge_fraction(self, frac: float = SUPPORT_FRACTION) -> float:
        """max |U| outside the box of half-side ``frac * side/2`` relative to max |U|."""
        return _edge_fraction(self.values, self.grid, frac)

    def check_support(self, rel_tol: float = 1e-6, frac: float = SUPPORT_FRACTION) -> float:
        e = self.edge_fraction(frac)
        if e > rel_tol:
            warnings.warn(f"profile has relative mass {e:.2e} beyond {frac:.0%} of the half-side",
                          TruncationWarning, stacklevel=2)
        return e


def _edge_fraction(values, grid, frac):
    mag = np.sqrt(np.sum(np.asarray(values).reshape((-1,) + grid.shape) ** 2, axis=0))
    top = float(mag.max())
    if top == 0.0:
        return 0.0
    m = grid.mesh()
    outside = np.max(np.abs(m), axis=0) > frac * grid.side / 2
    return float(mag[outside].max() / top) if outside.any() else 0.0


# ---------------------------------------------------------------- interpolation

def axis_stencil(src: Grid3, targets: np.ndarray, periodic: bool):
    """Two-tap linear interpolation stencil from ``src`` coordinates onto ``targets``."""
    h, n = src.h, src.n
    pos = (np.asarray(targets, dtype=float) + src.side / 2) / h
    i = np.floor(pos).astype(np.int64)
    f = pos - i
    idx = np.stack([i, i + 1], axis=1)
    w = np.stack([1.0 - f, f], axis=1)
    if periodic:
        idx %= n
    else:
        bad = (idx < 0) | (idx >= n)
        w[bad] = 0.0
        idx = np.clip(idx, 0, n - 1)
    return idx, w


def interpolate(values: np.ndarray, src: Grid3, targets: Sequence[np.ndarray], periodic: bool) -> np.ndarray:
    axes = [axis_stencil(src, t, periodic) for t in targets]
    return kernels.interp_tensor(values, axes)


def _covered_mask(grid: Grid3, half_width: float) -> np.ndarray:
    return np.max(np.abs(grid.mesh()), axis=0) <= half_width


def _truncation(kind: str, lost: float, what: str):
    msg = f"{what}: relative field magnitude {lost:.2e} falls outside the target grid"
    if kind == "raise":
        raise TruncationError(msg)
    if kind == "warn":
        warnings.warn(msg, TruncationWarning, stacklevel=3)


def _lost_fraction(values, grid, half_width):
    mag = np.sqrt(np.sum(values.reshape((-1,) + grid.shape) ** 2, axis=0))
    top = float(mag.max())
    if top == 0.0:
        return 0.0
    out = ~_covered_mask(grid, half_width)
    return float(mag[out].max() / top) if out.any() else 0.0


def _to_sim(u: PhysicalField, xi_grid: Grid3, power: float, on_truncation: str, rel_tol: float):
    t = u.time
    st = math.sqrt(t)
    vals = np.asarray(u.physical_values())
    reach = st * xi_grid.side / 2
    if reach < u.grid.side / 2 and on_truncation != "ignore":
        lost = _lost_fraction(vals, u.grid, reach - u.grid.h)
        if lost > rel_tol:
            _truncation(on_truncation, lost, "to_similarity")
    tg = xi_grid.coords * st
    out = interpolate(vals, u.grid, [tg, tg, tg], periodic=True)
    return ProfileField(xi_grid, math.log(t), t ** power * out)


def to_similarity(u: PhysicalField, xi_grid: Grid3, on_truncation: str = "raise",
                  rel_tol: float = 1e-8) -> ProfileField:
    """``U(xi) = sqrt(t) u(xi sqrt(t))`` sampled on ``xi_grid`` (trilinear, periodic source)."""
    return _to_sim(u, xi_grid, 0.5, on_truncation, rel_tol)


def force_to_similarity(f: PhysicalField, xi_grid: Grid3, on_truncation: str = "raise",
                        rel_tol: float = 1e-8) -> ProfileField:
    """``F(xi) = t^{3/2} f(xi sqrt(t))``."""
    return _to_sim(f, xi_grid, 1.5, on_truncation, rel_tol)


def _from_sim(U: ProfileField, grid: Grid3, power: float, on_truncation: str, rel_tol: float):
    t = U.time
    st = math.sqrt(t)
    vals = np.asarray(U.values)
    reach = grid.side / 2 / st
    if reach < U.grid.side / 2 and on_truncation != "ignore":
        lost = _lost_fraction(vals, U.grid, reach - U.grid.h)
        if lost > rel_tol:
            _truncation(on_truncation, lost, "from_similarity")
    tg = grid.coords / st
    out = interpolate(vals, U.grid, [tg, tg, tg], periodic=False)
    return PhysicalField(grid, t, t ** (-power) * out)


def from_similarity(U: ProfileField, grid: Grid3, on_truncation: str = "raise",
                    rel_tol: float = 1e-8) -> PhysicalField:
    """``u(x) = t^{-1/2} U(x / sqrt(t))``; zero where ``x/sqrt(t)`` leaves the xi-box."""
    return _from_sim(U, grid, 0.5, on_truncation, rel_tol)


def force_from_similarity(F: ProfileField, grid: Grid3, on_truncation: str = "raise",
                          rel_tol: float = 1e-8) -> PhysicalField:
    return _from_sim(F, grid, 1.5, on_truncation, rel_tol)


# ---------------------------------------------------------------- cutoff

def smoothstep5(u):
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10 - 15 * u + 6 * u * u)


def _smoothstep5_d(u):
    inside = (u > 0) & (u < 1)
    u = np.clip(u, 0.0, 1.0)
    d1 = 30 * u * u * (1 - u) ** 2
    d2 = 60 * u * (1 - u) * (1 - 2 * u)
    return np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


@dataclass(frozen=True)
class CutoffSpec:
    gamma: float
    r0: float = 2.0
    r1: float = 3.0

    def __post_init__(self):
        if not 0 < self.gamma < 0.5:
            raise ValueError("gamma must lie in (0, 1/2)")
        if not 0 < self.r0 < self.r1:
            raise ValueError("need 0 < r0 < r1")

    def radial(self, s):
        """Profile value and first two radial derivatives at radius ``s``."""
        w = self.r1 - self.r0
        u = (np.asarray(s, dtype=float) - self.r0) / w
        d1, d2 = _smoothstep5_d(u)
        return 1.0 - smoothstep5(u), -d1 / w, -d2 / (w * w)


@dataclass(frozen=True)
class CutoffValues:
    eta: np.ndarray
    grad: np.ndarray
    lap: np.ndarray
    dt: np.ndarray


def cutoff_eval(spec: CutoffSpec, x: np.ndarray, t: float) -> CutoffValues:
    """``eta = eta0(x / t^gamma)`` and its derivatives at points ``x`` (shape ``(3, ...)``)."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    g = spec.gamma
    sc = t ** g
    y = x / sc
    s = np.sqrt(np.sum(y * y, axis=0))
    e0, e1, e2 = spec.radial(s)
    safe = np.where(s > 0, s, 1.0)
    unit = np.where(s > 0, y / safe, 0.0)
    grad = (e1 / sc) * unit
    # radial Laplacian e'' + 2 e'/s; e' vanishes near s = 0 so the quotient is harmless
    lap = (e2 + 2 * np.where(s > 0, e1 / safe, 0.0)) / sc ** 2
    dt = -g / t * s * e1
    return CutoffValues(e0, grad, lap, dt)


def cutoff_N(spec: CutoffSpec, xi: np.ndarray, tau: float) -> np.ndarray:
    """``N(xi, tau) = eta0(xi e^{tau (1/2 - gamma)})``."""
    s = np.sqrt(np.sum(np.asarray(xi, dtype=float) ** 2, axis=0)) * math.exp(tau * (0.5 - spec.gamma))
    return spec.radial(s)[0]


def cutoff_Ntilde(spec: CutoffSpec, xi: np.ndarray, tau: float) -> np.ndarray:
    return cutoff_N(spec, np.asarray(xi) / 3.0, tau)


def annulus_clear_of_core(spec: CutoffSpec, times) -> np.ndarray:
    """True where the cutoff transition region misses the ball of radius sqrt(t)."""
    t = np.asarray(times, dtype=float)
    return spec.r0 * t ** (spec.gamma - 0.5) > 1.0


# ---------------------------------------------------------------- weighted norms

@dataclass(frozen=True)
class WeightedNormSpec:
    zeta: float = 4.0
    p: float = math.inf

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.zeta < 0:
            raise ValueError("zeta must be non-negative")


L_INF_W = WeightedNormSpec(4.0, math.inf)


def weighted_norm_values(values: np.ndarray, grid: Grid3, spec: WeightedNormSpec) -> float:
    c = grid.coords
    if math.isinf(spec.p):
        return kernels.weighted_max(values, c, c, c, spec.zeta)
    scale = kernels.weighted_max(values, c, c, c, spec.zeta)
    if scale == 0.0:
        return 0.0
    s = kernels.weighted_lp_sum(values, c, c, c, spec.zeta, spec.p, scale)
    return scale * (s * grid.dv) ** (1.0 / spec.p)


def weighted_norm(U, spec: WeightedNormSpec = L_INF_W) -> float:
    """Midpoint quadrature of ``||<xi>^zeta U||_{L^p}``; ``p = inf`` is the grid max."""
    return weighted_norm_values(np.asarray(U.values), U.grid, spec)


def lp_norm(values: np.ndarray, grid: Grid3, p: float) -> float:
    return weighted_norm_values(values, grid, WeightedNormSpec(0.0, p))


# ---------------------------------------------------------------- time grids

def tau_grid(tau_min: float, tau_bar: float, steps_per_unit: int = 64) -> np.ndarray:
    """Uniform tau grid ending exactly at ``tau_bar`` with spacing ``1/steps_per_unit``."""
    m = int(math.ceil((tau_bar - tau_min) * steps_per_unit - 1e-9))
    return tau_bar - (m - np.arange(m + 1)) / steps_per_unit


def dyadic_times(t_min: float, tbar: float, per_octave: int = 8) -> np.ndarray:
    """Geometric grid in t ending at ``tbar`` with ``per_octave`` points per factor of two."""
    m = int(math.ceil(math.log2(tbar / t_min) * per_octave - 1e-9))
    return tbar * 2.0 ** (-(m - np.arange(m + 1)) / per_octave)


# ---------------------------------------------------------------- X, Y, Z norms

def _as_norm_series(history, norm):
    if isinstance(history, tuple) and len(history) == 2:
        ts, vals = history
        return np.asarray(ts, dtype=float), np.asarray(vals, dtype=float)
    hist = list(history)
    if not hist:
        raise ValueError("empty history")
    return np.array([norm(h)[0] for h in hist]), np.array([norm(h)[1] for h in hist])


def norm_X(history, alpha: float, spec: WeightedNormSpec = L_INF_W) -> float:
    """``sup_tau e^{-alpha tau} ||Phi(tau)||``; history of ProfileFields or ``(taus, norms)``."""
    taus, vals = _as_norm_series(history, lambda U: (U.tau, weighted_norm(U, spec)))
    if taus.size == 0:
        raise ValueError("empty history")
    with np.errstate(divide="ignore"):
        lv = np.log(vals)
    return float(np.exp(np.max(lv - alpha * taus)))


def _log_expm1_ratio(D):
    """``log((e^D - 1) / D)``, stable for all real D."""
    D = np.asarray(D, dtype=float)
    out = np.empty_like(D)
    small = np.abs(D) < 1e-8
    pos = (D > 0) & ~small
    neg = (D < 0) & ~small
    out[small] = D[small] / 2
    out[pos] = D[pos] + np.log(-np.expm1(-D[pos])) - np.log(D[pos])
    out[neg] = np.log(-np.expm1(D[neg])) - np.log(-D[neg])
    return out


def lr_cumulative_log(times: np.ndarray, vals: np.ndarray, r: float) -> np.ndarray:
    """log of ``int_0^{t_j} v(t)^r dt``.

    Between positive samples ``v^r`` is interpolated as a power of ``t``, which is
    exact for power laws; segments touching a zero sample use the trapezoid rule.
    The leading piece on ``(0, t_0]`` extends the first power law to ``t = 0`` when
    that is integrable, and is a trapezoid with ``v(0) = 0`` otherwise.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(vals, dtype=float)
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("times must be increasing and positive")
    with np.errstate(divide="ignore"):
        lv = r * np.log(v)
    lt = np.log(t)
    A = lt[:-1] + lv[:-1]
    B = lt[1:] + lv[1:]
    ok = np.isfinite(A) & np.isfinite(B)
    piece = np.full(len(t) - 1, -np.inf)
    D = np.where(ok, B - A, 0.0)
    dl = np.diff(lt)
    piece[ok] = A[ok] + _log_expm1_ratio(D[ok]) + np.log(dl[ok])
    bad = ~ok
    if np.any(bad):
        piece[bad] = np.log(np.diff(t)[bad] / 2) + np.logaddexp(lv[:-1][bad], lv[1:][bad])
    first = np.log(t[0] / 2) + lv[0]
    if len(t) > 1 and np.all(np.isfinite(lv[:2])):
        c1 = (lv[1] - lv[0]) / dl[0] + 1.0
        if c1 > 0:
            first = lt[0] + lv[0] - math.log(c1)
    return np.logaddexp.accumulate(np.concatenate([[first], piece]))


def lr_lp(times, lp_vals, r: float) -> float:
    """``||psi||_{L^r_t L^p_x(0, t_last)}`` from sampled spatial norms."""
    return float(np.exp(lr_cumulative_log(times, lp_vals, r)[-1] / r))


def norm_Y(history, beta: float, r: float, p: float) -> float:
    """``sup_s s^{-beta} ||psi||_{L^r_t L^p_x(0, s)}``; history of PhysicalFields or ``(times, norms)``."""
    ts, vals = _as_norm_series(history, lambda u: (u.time, lp_norm(u.physical_values(), u.grid, p)))
    if ts.size == 0:
        raise ValueError("empty history")
    if not np.any(vals > 0):
        return 0.0
    cum = lr_cumulative_log(ts, vals, r)
    return float(np.exp(np.max(cum / r - beta * np.log(ts))))


def norm_Z(x_norm: float, y_norm: float) -> float:
    return x_norm + y_norm


def dyadic_constant(beta: float, beta_prime: float, r: float, shell: bool = True) -> float:
    """Constant of ``||t^{-beta'} psi||_{L^r(0,1)} <= C ||psi||_{Y^beta}``.

    Splitting (0, 1] into shells (2^{k-1}, 2^k] gives ``2^{beta'} (sum_{k<=0} 2^{(beta-beta') k r})^{1/r}``;
    the factor ``2^{beta'}`` bounds ``t^{-beta'}`` on a shell by its lower end.  ``shell=False``
    drops that factor and returns the bare dyadic sum.
    """
    q = 2.0 ** (-(beta - beta_prime) * r)
    s = (1.0 / (1.0 - q)) ** (1.0 / r)
    return 2.0 ** beta_prime * s if shell else s


def dyadic_Y_bound(history, beta: float, beta_prime: float, r: float, p: float) -> float:
    """Ratio ``||t^{-beta'} psi||_{L^r_t L^p_x(0, tbar)} / ||psi||_{Y^beta}``."""
    if not beta_prime < beta:
        raise ValueError("need beta' < beta")
    ts, vals = _as_norm_series(history, lambda u: (u.time, lp_norm(u.physical_values(), u.grid, p)))
    y = norm_Y((ts, vals), beta, r, p)
    if y == 0.0:
        return 0.0
    weighted = vals * ts ** (-beta_prime)
    return lr_lp(ts, weighted, r) / y


def change_of_measure_norm(psi_history: Sequence[PhysicalField], xi_grid: Grid3, cutoff: CutoffSpec,
                           beta_prime: float, r: float, p: float) -> float:
    """``||e^{tau(-beta'-1/2+3/(2p)+1/r)} Psi Ntilde||_{L^r_tau L^p_xi}`` over the sampled taus."""
    taus, vals = [], []
    m = xi_grid.mesh()
    for u in psi_history:
        U = to_similarity(u, xi_grid, on_truncation="ignore")
        nt = cutoff_Ntilde(cutoff, m, U.tau)
        taus.append(U.tau)
        vals.append(lp_norm(np.asarray(U.values) * nt, xi_grid, p)
                    * math.exp(U.tau * (-beta_prime - 0.5 + 1.5 / p + 1.0 / r)))
    taus, vals = np.array(taus), np.array(vals)
    if taus.size < 2:
        raise ValueError("need at least two samples")
    with np.errstate(divide="ignore"):
        lv = r * np.log(vals)
    piece = np.log(np.diff(taus) / 2) + np.logaddexp(lv[:-1], lv[1:])
    return float(np.exp(np.logaddexp.reduce(piece) / r))


# ---------------------------------------------------------------- snapshots

SNAP_MAGIC = "gluelab-snapshot v1"


def write_snapshot(path, field, extra: dict | None = None) -> Path:
    """Text header then raw little-endian float64 data, x index fastest."""
    path = Path(path)
    g = field.grid
    if isinstance(field, ProfileField):
        time, spectral = field.time, False
        vals = np.asarray(field.values)
    else:
        time, spectral = field.time, field.spectral
        vals = np.asarray(field.values)
    if spectral:
        vals = np.stack([vals.real, vals.imag], axis=1)
    header = [SNAP_MAGIC, f"kind {g.kind}", f"n {g.n}", f"side {g.side!r}", f"time {time!r}",
              f"repr {'spectral' if spectral else 'physical'}",
              f"shape {' '.join(str(s) for s in vals.shape)}"]
    if isinstance(field, ProfileField):
        header.append(f"tau {field.tau!r}")
    for k, v in (extra or {}).items():
        header.append(f"{k} {v}")
    header.append("end")
    # reverse axes so that the first spatial index varies fastest
    data = np.ascontiguousarray(np.transpose(vals, tuple(range(vals.ndim - 1, -1, -1))), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode())
        fh.write(data.tobytes())
    return path


def read_snapshot(path, with_header: bool = False):
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    head = {}
    pos = 0
    first = True
    while True:
        nl = blob.index(b"\n", pos)
        line = blob[pos:nl].decode()
        pos = nl + 1
        if first:
            if line != SNAP_MAGIC:
                raise ValueError(f"{path}: not a snapshot file")
            first = False
            continue
        if line == "end":
            break
        key, _, val = line.partition(" ")
        head[key] = val
    shape = tuple(int(s) for s in head["shape"].split())
    raw = np.frombuffer(blob, dtype="<f8", offset=pos)
    if raw.size != int(np.prod(shape)):
        raise ValueError(f"{path}: payload size mismatch")
    vals = np.transpose(raw.reshape(shape[::-1]), tuple(range(len(shape) - 1, -1, -1))).astype(np.float64)
    grid = Grid3(int(head["n"]), float(head["side"]), head["kind"])
    spectral = head["repr"] == "spectral"
    if spectral:
        vals = vals[:, 0] + 1j * vals[:, 1]
    if grid.kind == WHOLE:
        tau = float(head["tau"]) if "tau" in head else math.log(float(head["time"]))
        fld = ProfileField(grid, tau, vals)
    else:
        fld = PhysicalField(grid, float(head["time"]), vals, spectral=spectral)
    return (fld, head) if with_header else fld
