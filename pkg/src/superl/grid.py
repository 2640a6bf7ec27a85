"""Planar domains, uniform node grids, quadrature and dyadic annuli.

Nodes live at ``center + (j*h, i*h)`` for disks and annuli (the center is
always a node), and at ``corner + (j*h, i*h)`` for rectangles. Every node owns
the square cell of side ``h`` around it; its quadrature weight is ``h**2``
times the exact covered area fraction of that cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels


class ConfigurationError(ValueError):
    """Invalid grid or run configuration."""


class DomainError(ValueError):
    """A region or sample point falls outside the grid that carries the data."""


@dataclass(frozen=True)
class Domain:
    """Disk, annulus or rectangle.

    ``radii`` is ``(R,)`` for a disk and ``(r_in, r_out)`` for an annulus;
    ``extents`` is ``(width, height)`` for a rectangle centred at ``center``.
    """

    kind: str
    center: tuple = (0.0, 0.0)
    radii: tuple = ()
    extents: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        if self.kind == "disk":
            if len(self.radii) != 1 or self.radii[0] <= 0:
                raise ConfigurationError(f"disk needs one positive radius, got {self.radii}")
        elif self.kind == "annulus":
            if len(self.radii) != 2 or not 0 < self.radii[0] < self.radii[1]:
                raise ConfigurationError(f"annulus needs 0 < r_in < r_out, got {self.radii}")
        elif self.kind == "rectangle":
            if len(self.extents) != 2 or min(self.extents) <= 0:
                raise ConfigurationError(f"rectangle needs positive extents, got {self.extents}")
        else:
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def disk(cls, radius, center=(0.0, 0.0)):
        return cls("disk", center, (radius,))

    @classmethod
    def annulus(cls, r_in, r_out, center=(0.0, 0.0)):
        return cls("annulus", center, (r_in, r_out))

    @classmethod
    def rectangle(cls, x0, x1, y0, y1):
        return cls("rectangle", ((x0 + x1) / 2, (y0 + y1) / 2), extents=(x1 - x0, y1 - y0))

    @property
    def outer_radius(self):
        return self.radii[-1]

    @property
    def smallest_dimension(self):
        if self.kind == "disk":
            return 2 * self.radii[0]
        if self.kind == "annulus":
            return self.radii[1] - self.radii[0]
        return min(self.extents)

    @property
    def area(self):
        if self.kind == "disk":
            return math.pi * self.radii[0] ** 2
        if self.kind == "annulus":
            return math.pi * (self.radii[1] ** 2 - self.radii[0] ** 2)
        return self.extents[0] * self.extents[1]

    def bbox(self):
        cx, cy = self.center
        if self.kind == "rectangle":
            w, h = self.extents
            return cx - w / 2, cx + w / 2, cy - h / 2, cy + h / 2
        r = self.radii[-1]
        return cx - r, cx + r, cy - r, cy + r

    def contains_points(self, x, y, tol=0.0):
        cx, cy = self.center
        if self.kind == "rectangle":
            x0, x1, y0, y1 = self.bbox()
            return (x >= x0 - tol) & (x <= x1 + tol) & (y >= y0 - tol) & (y <= y1 + tol)
        r = np.hypot(x - cx, y - cy)
        inside = r <= self.radii[-1] + tol
        if self.kind == "annulus":
            inside &= r >= self.radii[0] - tol
        return inside

    def to_json(self):
        d = {"kind": self.kind, "center": list(self.center)}
        if self.kind == "rectangle":
            d["extents"] = list(self.extents)
        else:
            d["radii"] = list(self.radii)
        return d

    @classmethod
    def from_json(cls, d):
        return cls(d["kind"], tuple(d.get("center", (0.0, 0.0))), tuple(d.get("radii", ())),
                   tuple(d.get("extents", ())))


@dataclass(frozen=True)
class Circle:
    """Integration contour ``|x - center| = radius``."""

    radius: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise ConfigurationError("circle radius must be positive")


@dataclass(frozen=True)
class Annulus:
    """Dyadic annulus ``B_{2t}(center) minus B_t(center)``."""

    center: tuple
    t: float

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("annulus inner radius must be positive")

    @property
    def inner(self):
        return self.t

    @property
    def outer(self):
        return 2 * self.t

    def as_domain(self):
        return Domain.annulus(self.t, 2 * self.t, self.center)


# --- exact cell/disk overlap -------------------------------------------------


def _circ_antiderivative(x, r):
    """Antiderivative of sqrt(r^2 - x^2) on [-r, r]."""
    x = np.clip(x, -r, r)
    return 0.5 * (x * np.sqrt(np.maximum(r * r - x * x, 0.0)) + r * r * np.arcsin(x / r))


def square_disk_area(x0, x1, y0, y1, r):
    """Exact area of ``[x0,x1] x [y0,y1]`` intersected with the disk ``|p| <= r``.

    Vectorised over the box arrays. Integrates the vertical chord length
    ``min(y1, s) - max(y0, -s)`` with ``s = sqrt(r^2 - x^2)`` piecewise in
    closed form between its breakpoints.
    """
    scalar = all(np.ndim(a) == 0 for a in (x0, x1, y0, y1))
    x0, x1, y0, y1 = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (x0, x1, y0, y1))
    x0, x1, y0, y1 = np.broadcast_arrays(x0, x1, y0, y1)
    a = np.clip(x0, -r, r)
    b = np.clip(x1, -r, r)
    cand = [a, b]
    for yy in (y0, y1):
        ok = np.abs(yy) < r
        xb = np.where(ok, np.sqrt(np.maximum(r * r - yy * yy, 0.0)), a)
        cand.append(np.clip(xb, a, b))
        cand.append(np.clip(-xb, a, b))
    pts = np.sort(np.stack(cand, axis=-1), axis=-1)
    area = np.zeros(a.shape)
    for k in range(pts.shape[-1] - 1):
        p, q = pts[..., k], pts[..., k + 1]
        width = q - p
        mid = 0.5 * (p + q)
        s_mid = np.sqrt(np.maximum(r * r - mid * mid, 0.0))
        upper_is_s = s_mid < y1
        lower_is_s = -s_mid > y0
        live = (np.minimum(y1, s_mid) - np.maximum(y0, -s_mid) > 0) & (width > 0)
        g = _circ_antiderivative(q, r) - _circ_antiderivative(p, r)
        upper = np.where(upper_is_s, g, y1 * width)
        lower = np.where(lower_is_s, -g, y0 * width)
        area += np.where(live, upper - lower, 0.0)
    return float(area[0]) if scalar else area


def _interval_overlap(a0, a1, b0, b1):
    return np.maximum(0.0, np.minimum(a1, b1) - np.maximum(a0, b0))


# --- grids -------------------------------------------------------------------


@dataclass(eq=False)
class Grid:
    """Uniform node grid over a domain.

    Attributes
    ----------
    x, y : 2-D arrays of node coordinates, shape ``(ny, nx)``.
    inside : nodes lying in the closed domain.
    interior : inside nodes whose four axis neighbours are inside too.
    boundary : inside nodes that are not interior (Dirichlet nodes).
    weights : area quadrature weights (cut cells), summing to the domain area.
    """

    domain: Domain
    h: float
    x0: float
    y0: float
    nx: int
    ny: int
    _weight_cache: dict = field(default_factory=dict, repr=False)

    @cached_property
    def xs(self):
        return self.x0 + self.h * np.arange(self.nx)

    @cached_property
    def ys(self):
        return self.y0 + self.h * np.arange(self.ny)

    @cached_property
    def _mesh(self):
        return np.meshgrid(self.xs, self.ys)

    @property
    def x(self):
        return self._mesh[0]

    @property
    def y(self):
        return self._mesh[1]

    @property
    def shape(self):
        return (self.ny, self.nx)

    @cached_property
    def inside(self):
        m = self.domain.contains_points(self.x, self.y, tol=1e-12 * self.h)
        m.setflags(write=False)
        return m

    @cached_property
    def interior(self):
        ins = self.inside
        m = np.zeros_like(ins)
        m[1:-1, 1:-1] = (
            ins[1:-1, 1:-1] & ins[1:-1, 2:] & ins[1:-1, :-2] & ins[2:, 1:-1] & ins[:-2, 1:-1]
        )
        m.setflags(write=False)
        return m

    @cached_property
    def boundary(self):
        m = self.inside & ~self.interior
        m.setflags(write=False)
        return m

    @property
    def weights(self):
        return self.region_weights(self.domain)

    def radius_from(self, center):
        return np.hypot(self.x - center[0], self.y - center[1])

    def node_index(self, point):
        """Index ``(i, j)`` of the node nearest to ``point``."""
        j = int(round((point[0] - self.x0) / self.h))
        i = int(round((point[1] - self.y0) / self.h))
        return min(max(i, 0), self.ny - 1), min(max(j, 0), self.nx - 1)

    # -- quadrature weights --

    def region_weights(self, region):
        """Cut-cell weights of ``region`` on this grid's nodes (cached)."""
        w = self._weight_cache.get(region)
        if w is None:
            w = self._compute_weights(region)
            w.setflags(write=False)
            self._weight_cache[region] = w
        return w

    def _cells(self):
        hh = 0.5 * self.h
        return self.x - hh, self.x + hh, self.y - hh, self.y + hh

    def _disk_cover(self, center, r):
        cx0, cx1, cy0, cy1 = self._cells()
        dx0, dx1 = cx0 - center[0], cx1 - center[0]
        dy0, dy1 = cy0 - center[1], cy1 - center[1]
        # Farthest / nearest corner distances decide full or empty cells cheaply.
        far = np.hypot(np.maximum(np.abs(dx0), np.abs(dx1)), np.maximum(np.abs(dy0), np.abs(dy1)))
        nx_ = np.where((dx0 <= 0) & (dx1 >= 0), 0.0, np.minimum(np.abs(dx0), np.abs(dx1)))
        ny_ = np.where((dy0 <= 0) & (dy1 >= 0), 0.0, np.minimum(np.abs(dy0), np.abs(dy1)))
        near = np.hypot(nx_, ny_)
        cover = np.where(far <= r, self.h * self.h, 0.0)
        cut = (near < r) & (far > r)
        if cut.any():
            cover[cut] = square_disk_area(dx0[cut], dx1[cut], dy0[cut], dy1[cut], r)
        return cover

    def _compute_weights(self, region):
        if isinstance(region, Annulus):
            region = region.as_domain()
        if region.kind == "disk":
            return self._disk_cover(region.center, region.radii[0])
        if region.kind == "annulus":
            return (self._disk_cover(region.center, region.radii[1])
                    - self._disk_cover(region.center, region.radii[0]))
        rx0, rx1, ry0, ry1 = region.bbox()
        cx0, cx1, cy0, cy1 = self._cells()
        return _interval_overlap(cx0, cx1, rx0, rx1) * _interval_overlap(cy0, cy1, ry0, ry1)

    # -- containment --

    def check_region(self, region):
        """Raise DomainError unless ``region`` lies inside the grid domain."""
        if not region_inside(region, self.domain, slack=1e-9 * self.h):
            raise DomainError(f"region {region} exceeds grid domain {self.domain}")

    def check_points(self, px, py):
        """Raise DomainError if any point lies outside the node bounding box."""
        px = np.asarray(px)
        py = np.asarray(py)
        eps = 1e-9 * self.h
        if (px.min(initial=np.inf) < self.xs[0] - eps or px.max(initial=-np.inf) > self.xs[-1] + eps
                or py.min(initial=np.inf) < self.ys[0] - eps or py.max(initial=-np.inf) > self.ys[-1] + eps):
            raise DomainError("sample points leave the grid")

    def interpolate(self, values, px, py, check=True):
        """Bilinear interpolation of node values at arbitrary points."""
        if check:
            self.check_points(px, py)
        return kernels.bilinear(values, self.x0, self.y0, self.h, px, py)

    # -- integrals --

    def integrate(self, values, region=None, *, singular=None):
        """Integrate node values over a region or along a circle.

        Parameters
        ----------
        values : array of shape ``grid.shape``
        region : Domain, Annulus, Circle or None (whole grid domain)
        singular : optional ``(center, growth)``. The integrand is assumed to
            behave like ``c |x - center|**(-growth)`` near ``center`` (growth < 2);
            nodes in ``B_{2h}(center)`` are dropped and the excised ball is
            replaced by the power law fitted on the rings ``r = 2h, 3h``.
        """
        if region is None:
            region = self.domain
        if isinstance(region, Circle):
            return self._circle_integral(values, region)
        if isinstance(region, Annulus):
            region = region.as_domain()
        self.check_region(region)
        w = self.region_weights(region)
        values = np.asarray(values)
        if singular is None:
            return float(_masked_sum(w, values))
        center, growth = singular
        if growth >= 2:
            raise ValueError("growth exponent must be < 2 for an integrable singularity")
        rho = 2 * self.h
        hole = Domain.disk(rho, center)
        if not region_inside(hole, region, slack=1e-12):
            return float(_masked_sum(w, values))
        w = w - self.region_weights(hole)
        body = _masked_sum(w, values)
        means = []
        for r in (2 * self.h, 3 * self.h):
            th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
            means.append(np.mean(self.interpolate(values, center[0] + r * np.cos(th),
                                                  center[1] + r * np.sin(th))))
        # mean(r) = c r^{-s}; two rings give a least-squares estimate of c.
        radii = np.array([2 * self.h, 3 * self.h])
        basis = radii ** (-growth)
        c = float(np.dot(basis, means) / np.dot(basis, basis))
        return float(body + 2 * np.pi * c * rho ** (2 - growth) / (2 - growth))

    def _circle_integral(self, values, circle):
        if not region_inside(circle, self.domain, slack=1e-9 * self.h):
            raise DomainError(f"circle {circle} exceeds grid domain {self.domain}")
        n = circle_samples(circle.radius, self.h)
        th = 2 * np.pi * np.arange(n) / n
        px = circle.center[0] + circle.radius * np.cos(th)
        py = circle.center[1] + circle.radius * np.sin(th)
        vals = self.interpolate(values, px, py)
        return float(np.sum(vals) * (2 * np.pi * circle.radius / n))

    def circle_points(self, center, radius):
        n = circle_samples(radius, self.h)
        th = 2 * np.pi * np.arange(n) / n
        return center[0] + radius * np.cos(th), center[1] + radius * np.sin(th), th

    def to_json(self):
        d = self.domain.to_json()
        d.update(h=self.h, nx=self.nx, ny=self.ny, x0=self.x0, y0=self.y0)
        return d


def _masked_sum(w, values):
    live = w > 0
    return np.sum(w[live] * values[live])


def circle_samples(radius, h):
    return max(64, int(math.ceil(2 * math.pi * radius / h)))


def region_inside(region, domain, slack=0.0):
    """Geometric containment of a disk/annulus/rectangle/circle in a domain."""
    if isinstance(region, Annulus):
        region = region.as_domain()
    cx, cy = domain.center
    if isinstance(region, Circle) or region.kind in ("disk", "annulus"):
        if isinstance(region, Circle):
            rc, r_out, r_in_region = region.center, region.radius, region.radius
        else:
            rc, r_out = region.center, region.radii[-1]
            r_in_region = region.radii[0] if region.kind == "annulus" else 0.0
        if domain.kind == "rectangle":
            x0, x1, y0, y1 = domain.bbox()
            return (rc[0] - r_out >= x0 - slack and rc[0] + r_out <= x1 + slack
                    and rc[1] - r_out >= y0 - slack and rc[1] + r_out <= y1 + slack)
        d = math.hypot(rc[0] - cx, rc[1] - cy)
        if d + r_out > domain.radii[-1] + slack:
            return False
        if domain.kind == "annulus":
            r_hole = domain.radii[0]
            if isinstance(region, Circle) or region.kind == "annulus":
                # the region's own hole may contain the domain's hole
                if d + r_hole <= r_in_region + slack:
                    return True
                return d - r_out >= r_hole - slack
            return d - r_out >= r_hole - slack
        return True
    # rectangle region
    x0, x1, y0, y1 = region.bbox()
    corners = np.array([[x0, y0], [x0, y1], [x1, y0], [x1, y1]])
    if domain.kind == "rectangle":
        X0, X1, Y0, Y1 = domain.bbox()
        return x0 >= X0 - slack and x1 <= X1 + slack and y0 >= Y0 - slack and y1 <= Y1 + slack
    ok = np.all(np.hypot(corners[:, 0] - cx, corners[:, 1] - cy) <= domain.radii[-1] + slack)
    if domain.kind == "annulus":
        # nearest point of the rectangle to the annulus center must clear the hole
        nxp = min(max(cx, x0), x1)
        nyp = min(max(cy, y0), y1)
        ok = ok and math.hypot(nxp - cx, nyp - cy) >= domain.radii[0] - slack
    return bool(ok)


def make_grid(domain, h):
    """Build the node grid for ``domain`` with spacing ``h``.

    Raises ConfigurationError when fewer than 8 cells fit across the smallest
    dimension of the domain.
    """
    h = float(h)
    if not h > 0:
        raise ConfigurationError("grid spacing must be positive")
    if domain.smallest_dimension / h < 8:
        raise ConfigurationError(
            f"h={h} too coarse: fewer than 8 nodes across {domain.kind} "
            f"(smallest dimension {domain.smallest_dimension})")
    if domain.kind == "rectangle":
        x0, x1, y0, y1 = domain.bbox()
        nx = int(math.floor((x1 - x0) / h + 1e-9)) + 1
        ny = int(math.floor((y1 - y0) / h + 1e-9)) + 1
        # pad to cover the far edge when extents are not multiples of h
        if x0 + (nx - 1) * h < x1 - 1e-9 * h:
            nx += 1
        if y0 + (ny - 1) * h < y1 - 1e-9 * h:
            ny += 1
        return Grid(domain, h, x0, y0, nx, ny)
    n = int(math.ceil(domain.radii[-1] / h)) + 1
    cx, cy = domain.center
    return Grid(domain, h, cx - n * h, cy - n * h, 2 * n + 1, 2 * n + 1)


def integrate(field, region=None, *, singular=None):
    """Integrate a ScalarField-like object (``.grid`` and ``.values``) or a
    ``(grid, values)`` pair over ``region``."""
    if isinstance(field, tuple):
        grid, values = field
    else:
        grid, values = field.grid, field.values
    return grid.integrate(values, region, singular=singular)


def dyadic_annuli(center, r_min, r_max):
    """Annuli ``B_{2t} minus B_t`` with ``t = r_min 2^k`` and ``2t <= r_max``."""
    if not 0 < r_min < r_max:
        raise ValueError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    ratio = r_max / (2.0 * r_min)
    if ratio < 1:
        return []
    kmax = int(math.floor(math.log2(ratio) + 1e-12))
    return [Annulus(tuple(center), r_min * 2 ** k) for k in range(kmax + 1)]
