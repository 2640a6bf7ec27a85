"""Conformal maps acting on (u, psi): blow-up rescaling, Kelvin inversion and
stereographic pullback to the round sphere.

Under each map the densities ``e^{2u} dx`` and ``|psi|^4 dx`` are preserved;
values are transported by bilinear interpolation from the source grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import DomainError
from .fields import ScalarField, SpinorField


def _active(grid):
    """Nodes whose values matter downstream: inside the domain or carrying weight."""
    return grid.inside | (grid.weights > 0)


def _pull(u, psi, target, px, py, check_mask):
    """Interpolate source fields at mapped points; points outside the source
    node box are allowed only off ``check_mask`` (they become NaN / zero)."""
    src = u.grid
    eps = 1e-9 * src.h
    ok = ((px >= src.xs[0] - eps) & (px <= src.xs[-1] + eps)
          & (py >= src.ys[0] - eps) & (py <= src.ys[-1] + eps))
    if np.any(check_mask & ~ok):
        raise DomainError("target window leaves the source grid")
    uvals = np.full(target.shape, np.nan)
    if not u.vanished:
        uvals[ok] = src.interpolate(u.values, px[ok], py[ok], check=False)
    pvals = np.zeros((2,) + target.shape, dtype=complex)
    for k in range(2):
        pvals[k][ok] = src.interpolate(psi.values[k], px[ok], py[ok], check=False)
    return uvals, pvals


def rescale(u, psi, x0, lam, target):
    """Blow-up rescaling onto ``target``::

        u~(x) = u(lam x + x0) + ln lam,   psi~(x) = lam^{1/2} psi(lam x + x0)
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    px = lam * target.x + x0[0]
    py = lam * target.y + x0[1]
    uv, pv = _pull(u, psi, target, px, py, _active(target))
    out_u = ScalarField.vanishing(target) if u.vanished else ScalarField(target, uv + math.log(lam))
    return out_u, SpinorField(target, math.sqrt(lam) * pv)


def kelvin(u, psi, target):
    """Kelvin inversion onto an annular ``target`` grid (0 excluded)::

        u1(x) = u(x/|x|^2) - 2 ln|x|,   psi1(x) = |x|^{-1} psi(x/|x|^2)

    Only target nodes inside the annulus are required to map into the source;
    the others are filled with NaN (u) and 0 (psi).
    """
    dom = target.domain
    if dom.kind != "annulus" or np.hypot(*dom.center) > 1e-14:
        raise ValueError("Kelvin target must be an annulus centred at the origin")
    r2 = target.x ** 2 + target.y ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        px = np.where(r2 > 0, target.x / r2, np.inf)
        py = np.where(r2 > 0, target.y / r2, np.inf)
    need = target.inside
    uv, pv = _pull(u, psi, target, px, py, need)
    r = np.sqrt(r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = uv - 2 * np.log(r)
        pv = np.where(r > 0, pv / np.where(r > 0, r, 1.0), 0)
    pv = np.nan_to_num(pv)
    out_u = ScalarField.vanishing(target) if u.vanished else ScalarField(target, uv)
    return out_u, SpinorField(target, pv)


@dataclass(frozen=True)
class SphereSample:
    """Product quadrature on the cap ``theta >= theta_min`` of the unit sphere.

    Gauss-Legendre in ``cos(theta)`` times the uniform rule in ``phi``. The
    stereographic chart sends ``(theta, phi)`` to ``cot(theta/2) (cos phi, sin phi)``,
    so the north pole goes to infinity and the conformal factor is
    ``1 / (1 - cos theta)``.
    """

    n_theta: int = 96
    n_phi: int = 128
    theta_min: float = 0.05

    def __post_init__(self):
        if not 0 < self.theta_min < math.pi:
            raise ValueError("theta_min must lie in (0, pi)")

    def nodes(self):
        t, wt = np.polynomial.legendre.leggauss(self.n_theta)
        cmax = math.cos(self.theta_min)
        # map [-1, 1] onto cos(theta) in [-1, cmax]
        c = -1 + (t + 1) * (cmax + 1) / 2
        wc = wt * (cmax + 1) / 2
        theta = np.arccos(c)
        phi = 2 * math.pi * np.arange(self.n_phi) / self.n_phi
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        w = np.outer(wc, np.full(self.n_phi, 2 * math.pi / self.n_phi))
        return th, ph, w

    @staticmethod
    def conformal_factor(theta):
        return 1.0 / (1.0 - np.cos(theta))

    @staticmethod
    def chart(theta, phi):
        rho = 1.0 / np.tan(theta / 2)
        return rho * np.cos(phi), rho * np.sin(phi)


@dataclass
class SpherePullback:
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    v: np.ndarray | None
    spinor: np.ndarray
    e2v_integral: float
    phi4_integral: float
    pole_sup: float

    def to_json(self):
        return {"e2v_integral": self.e2v_integral, "phi4_integral": self.phi4_integral,
                "pole_sup_abs_v": self.pole_sup}


def stereographic_pullback(u, psi, sample=SphereSample(), pole_band=0.1):
    """Pull planar fields back to the sphere::

        v = u o f + ln L,   phi = L^{1/2} psi o f,   L = 1/(1 - cos theta)

    Spinor components are transported per chart without a frame rotation;
    only ``|phi|`` is meaningful. ``pole_sup`` is ``max |v|`` over samples with
    ``theta <= pole_band`` (NaN if the band holds no samples).
    """
    th, ph, w = sample.nodes()
    px, py = sample.chart(th, ph)
    grid = u.grid
    try:
        grid.check_points(px, py)
    except DomainError:
        raise DomainError("sphere samples leave the planar grid; raise theta_min") from None
    if not np.all(grid.domain.contains_points(px, py, tol=1e-12)):
        raise DomainError("sphere samples leave the planar domain; raise theta_min")
    lam = sample.conformal_factor(th)
    comps = np.stack([grid.interpolate(psi.values[k], px, py, check=False) for k in range(2)])
    spinor = np.sqrt(lam) * comps
    phi4 = float(np.sum(w * (np.sum(np.abs(spinor) ** 2, axis=0)) ** 2))
    if u.vanished:
        v = None
        e2v = 0.0
        pole = float("nan")
    else:
        v = grid.interpolate(u.values, px, py, check=False) + np.log(lam)
        e2v = float(np.sum(w * np.exp(2 * v)))
        band = th <= pole_band
        pole = float(np.max(np.abs(v[band]))) if band.any() else float("nan")
    return SpherePullback(th, ph, w, v, spinor, e2v, phi4, pole)
