"""Blow-up diagnostics: Pohozaev constants, local masses, slope identities,
logarithmic fits, singularity and Brezis-Merle classification, neck scans."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .grid import Circle, Domain, DomainError, dyadic_annuli, region_inside
from .fields import GridMismatchError
from .spin2d import DEFAULT_REP, clifford_mul

CSV_HEADER = ("index", "mass", "pohozaev", "neck_sup", "a_n", "label")


# --- Pohozaev constant ------------------------------------------------------------


def pohozaev_constant(u, psi, F, center, R, singular=None, rep=DEFAULT_REP):
    """Pohozaev constant of ``(u, psi)`` on ``B_R(center)``::

        C = R int_{dB}(|d_nu u|^2 - |grad u|^2/2) ds
            - int_B (2e^{2u} - e^u|psi|^2 - |psi|^4 x.grad F)
            + R int_{dB}(e^{2u} + F|psi|^4) ds
            - int_{dB} Re<x.psi, d_nu psi> ds

    with ``x`` measured from ``center``. Gradients are centered differences
    interpolated onto the circle. ``singular`` is the growth exponent ``s`` of
    the area integrand near ``center`` (integrand ~ ``r**-s``) when the centre
    is a marked singular point; None for smooth data.
    """
    grid = u.grid
    if not R > 0:
        raise ValueError("radius must be positive")
    margin = 2 * grid.h
    if not region_inside(Circle(R + margin, center), grid.domain, slack=1e-9 * grid.h):
        raise DomainError(f"R={R} too close to the grid boundary")
    h = grid.h
    cx, cy = center
    px, py, _ = grid.circle_points(center, R)
    nx_, ny_ = (px - cx) / R, (py - cy) / R
    ds = 2 * math.pi * R / px.size
    n2 = psi.norm2()
    eu = u.exp()
    e2u = eu * eu

    # boundary terms in u
    bnd = 0.0
    if not u.vanished:
        gx, gy = kernels.gradient(u.values, h)
        ux = grid.interpolate(gx, px, py)
        uy = grid.interpolate(gy, px, py)
        dnu = ux * nx_ + uy * ny_
        bnd += R * np.sum(dnu ** 2 - 0.5 * (ux ** 2 + uy ** 2)) * ds
    # potential boundary term
    pot = e2u + F.values * n2 * n2
    bnd += R * np.sum(grid.interpolate(pot, px, py)) * ds
    # spinor boundary term
    if np.any(psi.values != 0):
        comps = []
        for k in range(2):
            dx_r, dy_r = kernels.gradient(psi.values[k].real, h)
            dx_i, dy_i = kernels.gradient(psi.values[k].imag, h)
            dnp = ((grid.interpolate(dx_r, px, py) + 1j * grid.interpolate(dx_i, px, py)) * nx_
                   + (grid.interpolate(dy_r, px, py) + 1j * grid.interpolate(dy_i, px, py)) * ny_)
            comps.append(dnp)
        dnpsi = np.stack(comps)
        ps = np.stack([grid.interpolate(psi.values[k].real, px, py)
                       + 1j * grid.interpolate(psi.values[k].imag, px, py) for k in range(2)])
        xpsi = clifford_mul((px - cx, py - cy), ps, rep)
        bnd -= np.sum(np.sum((xpsi.conj() * dnpsi).real, axis=0)) * ds

    # area term
    xgF = (grid.x - cx) * F.grad[0] + (grid.y - cy) * F.grad[1]
    dens = 2 * e2u - eu * n2 - n2 * n2 * xgF
    disk = Domain.disk(R, center)
    sing = None if singular is None else (tuple(center), float(singular))
    area = grid.integrate(np.nan_to_num(dens, nan=0.0, posinf=0.0), disk, singular=sing)
    return float(bnd - area)


# --- masses and flux ------------------------------------------------------------


def mass_density(u, psi):
    """``2e^{2u} - e^u|psi|^2`` (zero for vanished u)."""
    if u.vanished:
        return np.zeros(u.grid.shape)
    eu = u.exp()
    return 2 * eu * eu - eu * psi.norm2()


def local_mass(u, psi, center, delta, singular=None):
    """``int_{B_delta(center)} (2e^{2u} - e^u|psi|^2)``; exactly 0 for vanished u."""
    if u.vanished:
        return 0.0
    grid = u.grid
    sing = None if singular is None else (tuple(center), float(singular))
    return grid.integrate(mass_density(u, psi), Domain.disk(delta, center), singular=sing)


def circle_mean(values, grid, center, r):
    return grid.integrate(values, Circle(r, center)) / (2 * math.pi * r)


def radial_slope_identity(u, psi, center, r):
    """Discrete slope law for circle means.

    ``lhs = r (ubar(r+h) - ubar(r-h)) / 2h`` and
    ``rhs = -local_mass(center, r) / 2pi``; they agree to O(h) for smooth
    solutions and differ by the point flux at a puncture.
    """
    grid = u.grid
    h = grid.h
    if r - h <= 0:
        raise ValueError("need r > h")
    if u.vanished:
        return 0.0, 0.0
    lhs = r * (circle_mean(u.values, grid, center, r + h) - circle_mean(u.values, grid, center, r - h)) / (2 * h)
    rhs = -local_mass(u, psi, center, r) / (2 * math.pi)
    return float(lhs), float(rhs)


def log_coefficient_fit(u, center, annulus):
    """Least-squares fit ``u ~ c ln|x - center| + offset`` on annulus nodes.

    ``annulus`` is ``(r_in, r_out)``. Returns ``(c, offset, rms residual)``;
    the implied point mass is ``-2 pi c``.
    """
    grid = u.grid
    r_in, r_out = annulus
    if not 0 < r_in < r_out:
        raise ValueError("annulus needs 0 < r_in < r_out")
    grid.check_region(Domain.annulus(r_in, r_out, center))
    r = grid.radius_from(center)
    sel = (r >= r_in) & (r <= r_out) & grid.inside
    if sel.sum() < 16:
        raise ValueError(f"degenerate annulus: {int(sel.sum())} nodes (< 16)")
    A = np.column_stack([np.log(r[sel]), np.ones(int(sel.sum()))])
    coef, *_ = np.linalg.lstsq(A, u.values[sel], rcond=None)
    res = A @ coef - u.values[sel]
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res ** 2)))


# --- singularity type ------------------------------------------------------------


@dataclass
class SingularityReport:
    a: list
    classification: str
    threshold: float
    tail_min: float

    def to_json(self):
        return {"a_n": [None if not np.isfinite(v) else v for v in self.a],
                "classification": self.classification, "threshold": self.threshold,
                "tail_min": self.tail_min if np.isfinite(self.tail_min) else None}


def _tail(n):
    """Index of the first member of the observed tail (the last half)."""
    return n // 2


def singularity_statistic(u, psi, probe):
    """``max u - 2 ln(1 + max|psi|)`` over probe nodes (``-inf`` if u vanished)."""
    grid = u.grid
    w = grid.region_weights(probe) if probe is not None else grid.weights
    sel = (w > 0) & grid.inside
    if u.vanished:
        return -math.inf
    mpsi = float(np.sqrt(np.max(psi.norm2()[sel])))
    return float(np.max(u.values[sel]) - 2 * math.log1p(mpsi))


def classify_singularity(family, probe=None, threshold=10.0):
    """First type iff ``min`` of the statistic over the last half of the
    family is ``>= -threshold``; otherwise second type."""
    family = list(family)
    if not family:
        raise ValueError("empty family")
    if len(family) < 3:
        raise ValueError("need at least 3 family members")
    a = [singularity_statistic(u, p, probe) for u, p in family]
    tmin = min(a[_tail(len(a)):])
    label = "first" if tmin >= -threshold else "second"
    return SingularityReport(a, label, float(threshold), float(tmin))


# --- neck scan ---------------------------------------------------------------------


@dataclass
class NeckScan:
    t: list
    energies: list
    sup: float
    decay: list

    def to_json(self):
        return asdict(self)


def neck_scan(u, psi, center, r_min, r_max):
    """Energies ``E(B_{2t} \\ B_t)`` on dyadic annuli between ``r_min`` and
    ``r_max`` and the decay statistic ``max_{|x-c|=t}(u + ln|x - c|)``."""
    grid = u.grid
    annuli = dyadic_annuli(center, r_min, r_max)
    dens = u.exp(2.0) + psi.norm2() ** 2
    ts, es, dec = [], [], []
    for ann in annuli:
        ts.append(ann.t)
        es.append(grid.integrate(dens, ann))
        if u.vanished:
            dec.append(-math.inf)
        else:
            px, py, _ = grid.circle_points(center, ann.t)
            dec.append(float(np.max(grid.interpolate(u.values, px, py)) + math.log(ann.t)))
    return NeckScan(ts, es, float(max(es, default=0.0)), dec)


# --- Brezis-Merle alternatives --------------------------------------------------------


@dataclass
class BMClassification:
    case: str
    sigma: list
    energies: list
    off_sigma_trend: str
    off_sigma_max: list = field(default_factory=list)
    psi_max: list = field(default_factory=list)

    def __post_init__(self):
        if self.case == "c" and not self.sigma:
            raise ValueError("case c requires a nonempty blow-up set")

    def to_json(self):
        fix = lambda v: v if np.isfinite(v) else None
        return {"case": self.case, "sigma": [list(p) for p in self.sigma], "energies": self.energies,
                "off_sigma_trend": self.off_sigma_trend,
                "off_sigma_max": [fix(v) for v in self.off_sigma_max],
                "psi_max": [fix(v) for v in self.psi_max]}


def _disk_kernel(radius, h):
    n = int(math.floor(radius / h + 1e-9))
    i, j = np.mgrid[-n:n + 1, -n:n + 1]
    return (np.hypot(i, j) * h <= radius + 1e-9 * h).astype(float)


def ball_energies(u, psi, radius):
    """``E(u, psi; B_radius(x))`` at every node by node quadrature."""
    grid = u.grid
    dens = (u.exp(2.0) + psi.norm2() ** 2) * grid.weights
    return ndimage.convolve(dens, _disk_kernel(radius, grid.h), mode="constant", cval=0.0)


def diverges_down(series, level=-20.0):
    """Finite proxy for ``-> -inf``: last value below ``level`` and strictly
    decreasing over the last three members."""
    s = list(series)
    if len(s) < 3 or not s[-1] < level:
        return False
    return bool(s[-3] > s[-2] > s[-1])


def brezis_merle_classify(family, epsilon1=0.1, radii=None, exclusion=None):
    """Classify a family into the alternatives (a) bounded, (b) uniformly
    divergent to ``-inf``, (c) concentration on a finite set.

    Blow-up cells are nodes where the tail infimum of the ball energy is at
    least ``epsilon1`` for every radius in ``radii`` (default ``2h, 4h, 8h``).
    Off-set statistics exclude balls of radius ``exclusion`` (default twice
    the largest radius) around the detected points.
    """
    family = list(family)
    if len(family) < 3:
        raise ValueError("need at least 3 family members")
    grid = family[0][0].grid
    for u, p in family:
        if u.grid is not grid or p.grid is not grid:
            g2 = u.grid
            if (g2.h, g2.nx, g2.ny, g2.x0, g2.y0) != (grid.h, grid.nx, grid.ny, grid.x0, grid.y0) \
                    or p.grid is not u.grid:
                raise GridMismatchError("family members live on different grids")
    h = grid.h
    radii = radii or [2 * h, 4 * h, 8 * h]
    exclusion = exclusion if exclusion is not None else 2 * max(radii)
    start = _tail(len(family))
    hot = grid.inside.copy()
    last_small = None
    for r in radii:
        inf_e = None
        for u, p in family[start:]:
            e = ball_energies(u, p, r)
            inf_e = e if inf_e is None else np.minimum(inf_e, e)
        hot &= inf_e >= epsilon1
        if last_small is None:
            last_small = ball_energies(*family[-1], r)
    big = ball_energies(*family[-1], max(radii))
    labels, nlab = ndimage.label(hot)
    sigma, energies = [], []
    for k in range(1, nlab + 1):
        sel = labels == k
        w = last_small[sel]
        xs, ys = grid.x[sel], grid.y[sel]
        wt = w / w.sum() if w.sum() > 0 and np.isfinite(w.sum()) else np.full(w.size, 1 / w.size)
        pt = (float(np.sum(wt * xs)), float(np.sum(wt * ys)))
        sigma.append(pt)
        energies.append(float(np.max(big[sel])))
    off = grid.inside.copy()
    for pt in sigma:
        off &= grid.radius_from(pt) > exclusion
    off_max, psi_max = [], []
    for u, p in family:
        if u.vanished or not off.any():
            off_max.append(-math.inf)
        else:
            off_max.append(float(np.max(u.values[off])))
        psi_max.append(float(np.sqrt(np.max(p.norm2()[off]))) if off.any() else 0.0)
    trend = "-inf" if (diverges_down(off_max) or all(v == -math.inf for v in off_max[start:])) \
        else "bounded"
    if sigma:
        case = "c"
    else:
        case = "b" if trend == "-inf" else "a"
    return BMClassification(case, sigma, energies, trend, off_max, psi_max)


# --- tabular output ------------------------------------------------------------------


def write_csv(rows, stream=None, header=CSV_HEADER):
    """Write rows (dicts or sequences) as CSV with a header row; returns the text
    when no stream is given."""
    out = stream if stream is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(k, "") for k in header]
        w.writerow([_fmt(v) for v in row])
    if stream is None:
        return out.getvalue()
    return None


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if np.isfinite(v) else ("-inf" if v < 0 else "inf" if v > 0 else "nan")
    return v


def family_table(family, center, delta, R, r_min, r_max, F=None, probe=None, threshold=10.0):
    """Per-index rows ``(index, mass, pohozaev, neck_sup, a_n, label)``."""
    from .fields import CouplingField

    family = list(family)
    rep = classify_singularity(family, probe, threshold) if len(family) >= 3 else None
    rows = []
    for n, (u, p) in enumerate(family):
        FF = F if F is not None else CouplingField.const(u.grid, 0.0)
        rows.append({
            "index": n,
            "mass": local_mass(u, p, center, delta),
            "pohozaev": pohozaev_constant(u, p, FF, center, R),
            "neck_sup": neck_scan(u, p, center, r_min, r_max).sup,
            "a_n": singularity_statistic(u, p, probe),
            "label": rep.classification if rep else "",
        })
    return rows
