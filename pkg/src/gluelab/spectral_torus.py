"""Pseudo-spectral operators on the periodic box and outer-equation time stepping.

First derivatives use wavenumbers with the Nyquist entry set to zero; the Leray
projector is built from the same wavenumbers so that ``div(P u) = 0`` holds to
round-off on the grid.  Products are dealiased by spherical truncation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft

from .fields_and_transforms import DIV_TOL, Grid3, PhysicalField, WHOLE, CutoffValues


class StepRejected(RuntimeError):
    def __init__(self, msg, suggested_dt):
        super().__init__(msg)
        self.suggested_dt = suggested_dt


class MeanError(ValueError):
    def __init__(self, mean):
        super().__init__(f"divergence datum has nonzero mean {mean:.3e}")
        self.mean = mean


@dataclass(frozen=True)
class SpectralOperatorSpec:
    dealias: float = 2.0 / 3.0
    div_tol: float = DIV_TOL

    def __post_init__(self):
        if not 0 < self.dealias <= 1:
            raise ValueError("dealias fraction must lie in (0, 1]")


@dataclass(frozen=True)
class StokesStepPlan:
    dt: float
    scheme: str = "if-heun"   # integrating factor on the heat part, Heun on the rest
    cfl: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("if-heun", "imex"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def stability_bound(self, umax: float, h: float) -> float:
        return self.cfl * h / max(umax, 1e-300)


class SpectralOps:
    """FFT plans and multipliers for one grid (either torus or xi-box)."""

    def __init__(self, grid: Grid3, spec: SpectralOperatorSpec = SpectralOperatorSpec()):
        self.grid = grid
        self.spec = spec
        n, L = grid.n, grid.side
        k = 2 * np.pi / L * np.fft.fftfreq(n, 1.0 / n)
        kz = 2 * np.pi / L * np.fft.rfftfreq(n, 1.0 / n)
        kd, kdz = k.copy(), kz.copy()
        kd[n // 2] = 0.0
        kdz[-1] = 0.0
        self.kd = (kd[:, None, None], kd[None, :, None], kdz[None, None, :])
        self.k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + kz[None, None, :] ** 2
        self.kd2 = self.kd[0] ** 2 + self.kd[1] ** 2 + self.kd[2] ** 2
        self._kd2i = np.where(self.kd2 > 0, 1.0 / np.where(self.kd2 > 0, self.kd2, 1.0), 0.0)
        ki = np.fft.fftfreq(n, 1.0 / n)
        kiz = np.fft.rfftfreq(n, 1.0 / n)
        rad = np.sqrt(ki[:, None, None] ** 2 + ki[None, :, None] ** 2 + kiz[None, None, :] ** 2)
        self.mask = rad <= spec.dealias * (n / 2)
        self.shape = grid.shape

    # transforms
    def fft(self, v):
        return sfft.rfftn(v, axes=(-3, -2, -1))

    def ifft(self, vh):
        return sfft.irfftn(vh, s=self.shape, axes=(-3, -2, -1))

    # spectral-side operators
    def leray_hat(self, vh):
        d = self.kd[0] * vh[0] + self.kd[1] * vh[1] + self.kd[2] * vh[2]
        d = d * self._kd2i
        return np.stack([vh[0] - self.kd[0] * d, vh[1] - self.kd[1] * d, vh[2] - self.kd[2] * d])

    def div_hat(self, vh):
        """Divergence; for tensors ``T[i, j]`` contracts the last index."""
        if vh.ndim == 5:
            return np.stack([self.div_hat(vh[i]) for i in range(3)])
        return 1j * (self.kd[0] * vh[0] + self.kd[1] * vh[1] + self.kd[2] * vh[2])

    def grad_hat(self, sh):
        return np.stack([1j * self.kd[0] * sh, 1j * self.kd[1] * sh, 1j * self.kd[2] * sh])

    # physical-side conveniences
    def leray(self, v):
        return self.ifft(self.leray_hat(self.fft(v)))

    def div(self, v):
        return self.ifft(self.div_hat(self.fft(v)))

    def grad(self, s):
        return self.ifft(self.grad_hat(self.fft(s)))

    def grad_vec(self, v):
        """``G[j, i] = d_j v_i``."""
        vh = self.fft(v)
        return self.ifft(np.stack([1j * self.kd[j] * vh for j in range(3)]))

    def lap(self, v):
        return self.ifft(-self.k2 * self.fft(v))

    def curl(self, v):
        vh = self.fft(v)
        kx, ky, kz = self.kd
        return self.ifft(1j * np.stack([ky * vh[2] - kz * vh[1], kz * vh[0] - kx * vh[2], kx * vh[1] - ky * vh[0]]))

    def heat(self, v, s):
        if s < 0:
            raise ValueError("duration must be non-negative")
        return self.ifft(np.exp(-self.k2 * s) * self.fft(v))

    def dealiased(self, v):
        return self.ifft(self.mask * self.fft(v))

    def product_div(self, u, v):
        """Dealiased ``P div(u (x) v)`` with ``div(u (x) v)_i = d_j(u_i v_j)``."""
        ud = self.dealiased(u)
        vd = self.dealiased(v)
        th = self.fft(np.einsum("i...,j...->ij...", ud, vd)) * self.mask
        return self.ifft(self.leray_hat(self.div_hat(th)))

    def inv_grad_div(self, h):
        """``grad Delta^{-1} h`` built so that its spectral divergence equals ``h`` (mean removed)."""
        hh = self.fft(h)
        return self.ifft(np.stack([-1j * self.kd[i] * hh * self._kd2i for i in range(3)]))

    def mean(self, s) -> float:
        return float(np.mean(s))


@lru_cache(maxsize=16)
def ops_for(grid: Grid3, dealias: float = 2.0 / 3.0) -> SpectralOps:
    return SpectralOps(grid, SpectralOperatorSpec(dealias=dealias))


def _vals(u):
    return np.asarray(u.physical_values() if isinstance(u, PhysicalField) else u)


# ---------------------------------------------------------------- public operations

def leray_project(u: PhysicalField) -> PhysicalField:
    ops = ops_for(u.grid)
    return PhysicalField(u.grid, u.time, ops.leray(_vals(u)))


def heat_semigroup(u: PhysicalField, s: float, variant: str | None = None) -> PhysicalField:
    """``e^{s Delta}``; ``variant='P'`` post-composes the Leray projector and ``'Pdiv'``
    takes a tensor field ``M[i, j]`` and returns ``e^{s Delta} P div M``."""
    if s < 0:
        raise ValueError("duration must be non-negative")
    ops = ops_for(u.grid)
    vh = ops.fft(_vals(u))
    if variant == "Pdiv":
        vh = ops.leray_hat(ops.div_hat(vh))
    elif variant == "P":
        vh = ops.leray_hat(vh)
    elif variant is not None:
        raise ValueError(f"unknown variant {variant!r}")
    return PhysicalField(u.grid, u.time + s if s > 0 else u.time, ops.ifft(np.exp(-ops.k2 * s) * vh))


def stokes_div_solve(h, grid: Grid3, times: Sequence[float] | None = None, tol: float | None = None):
    """``psi_div = grad Delta^{-1} h`` for one scalar field or a history of them.

    Raises ``MeanError`` when some ``h`` has mean above ``tol`` times its max.
    """
    ops = ops_for(grid)
    single = np.asarray(h).ndim == 3
    hs = [np.asarray(h)] if single else [np.asarray(x) for x in h]
    tol = ops.spec.div_tol if tol is None else tol
    times = [1.0] * len(hs) if times is None else list(times)
    out = []
    for hk, tk in zip(hs, times):
        m = float(np.mean(hk))
        scale = max(float(np.max(np.abs(hk))), 1e-300)
        if abs(m) > tol * scale and abs(m) > 1e-300:
            raise MeanError(m)
        out.append(PhysicalField(grid, tk, ops.inv_grad_div(hk)))
    return out[0] if single else out


def nonlinear_div(u: PhysicalField, v: PhysicalField) -> PhysicalField:
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    return PhysicalField(u.grid, u.time, ops_for(u.grid).product_div(_vals(u), _vals(v)))


def outer_forcing_terms(ops: SpectralOps, phi: np.ndarray, psi: np.ndarray | None,
                        cut: CutoffValues, phi_lin: np.ndarray | None = None) -> dict:
    """Unprojected pieces of the outer forcing at one time.

    ``cutoff``: ``phi (d_t + Delta) eta - 2 div(phi (x) grad eta)``
    ``transport``: ``(psi . grad eta) phi``
    ``quadratic``: ``div(psi (x) psi)`` (dealiased)
    All three vanish off the cutoff transition region except ``quadratic``.
    """
    g = cut.grad
    lin = phi * (cut.dt + cut.lap)[None] - 2 * ops.div(np.einsum("i...,j...->ij...", phi, g))
    out = {"cutoff": lin}
    if psi is not None:
        out["transport"] = np.einsum("j...,j...->...", psi, g)[None] * phi
        ud = ops.dealiased(psi)
        out["quadratic"] = ops.ifft(ops.div_hat(ops.fft(np.einsum("i...,j...->ij...", ud, ud)) * ops.mask))
    return out


def step_outer(psi: PhysicalField, forcing: Callable[[float, np.ndarray], np.ndarray],
               plan: StokesStepPlan) -> PhysicalField:
    """One step of ``d_t psi = Delta psi - P F(t, psi)`` for the divergence-free part of psi.

    The heat part is integrated exactly by the factor ``e^{-|k|^2 dt}``; the
    forcing by Heun's rule (trapezoid when ``F`` does not depend on psi).
    """
    ops = ops_for(psi.grid)
    u = _vals(psi)
    umax = float(np.max(np.abs(u)))
    lim = plan.stability_bound(umax, psi.grid.h)
    if plan.dt > lim:
        raise StepRejected(f"dt={plan.dt:.3e} exceeds the advective bound {lim:.3e}", suggested_dt=lim)
    t0, dt = psi.time, plan.dt
    E = np.exp(-ops.k2 * dt)
    uh = ops.fft(u)
    f0 = ops.leray_hat(ops.fft(forcing(t0, u)))
    if plan.scheme == "imex":
        # backward Euler on diffusion, forward Euler on forcing (first order, robust)
        new = (uh - dt * f0) / (1 + ops.k2 * dt)
        return PhysicalField(psi.grid, t0 + dt, ops.ifft(new))
    pred = E * (uh - dt * f0)
    f1 = ops.leray_hat(ops.fft(forcing(t0 + dt, ops.ifft(pred))))
    new = E * uh - 0.5 * dt * (E * f0 + f1)
    return PhysicalField(psi.grid, t0 + dt, ops.ifft(new))


def smoothing_ratio(ops: SpectralOps, inputs: Sequence[np.ndarray], s: float, variant: str,
                    p: float, q: float) -> float:
    """Max over the ensemble of ``||e^{s Delta} T v||_{L^q} / ||v||_{L^p}`` (grid quadrature)."""
    from .fields_and_transforms import lp_norm
    best = 0.0
    for v in inputs:
        vh = ops.fft(v)
        if variant == "Pdiv":
            vh = ops.leray_hat(ops.div_hat(vh))
        elif variant == "P":
            vh = ops.leray_hat(vh)
        w = ops.ifft(np.exp(-ops.k2 * s) * vh)
        best = max(best, lp_norm(w, ops.grid, q) / lp_norm(v, ops.grid, p))
    return best
