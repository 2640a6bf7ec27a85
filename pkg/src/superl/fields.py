"""Field containers, the energy and action functionals, and system residuals.

The coupled system on a flat chart reads::

    -Lap u = 2 e^{2u} - e^u |psi|^2
    D psi  = -e^u psi - 2 F |psi|^2 psi

and the residuals returned by :func:`residuals` are
``res_u = -Lap u - 2e^{2u} + e^u|psi|^2`` and
``res_psi = D psi + e^u psi + 2F|psi|^2 psi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, integrate
from .spin2d import DEFAULT_REP, dirac_apply, laplacian_apply


class GridMismatchError(ValueError):
    pass


@dataclass(eq=False)
class ScalarField:
    """Sampled log-density ``u``. ``vanished=True`` means ``u = -inf``
    identically (``e^u`` is exactly zero and ``values`` is ignored)."""

    grid: Grid
    values: np.ndarray
    vanished: bool = False

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros(self.grid.shape)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    @classmethod
    def vanishing(cls, grid):
        return cls(grid, np.zeros(grid.shape), vanished=True)

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)))

    def exp(self, factor=1.0, clamp=None):
        """``e^{factor*u}``; exactly 0 for a vanished field."""
        if self.vanished:
            return np.zeros(self.grid.shape)
        u = self.values if clamp is None else np.minimum(self.values, clamp)
        with np.errstate(over="ignore"):
            return np.exp(factor * u)

    def copy(self):
        return ScalarField(self.grid, self.values.copy(), self.vanished)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self, other)
            return ScalarField(self.grid, self.values + other.values, self.vanished)
        return ScalarField(self.grid, self.values + other, self.vanished)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self, other)
            return ScalarField(self.grid, self.values - other.values, self.vanished)
        return ScalarField(self.grid, self.values - other, self.vanished)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * c, self.vanished)

    __rmul__ = __mul__


@dataclass(eq=False)
class SpinorField:
    """Two complex components per node, stored as ``values[k, iy, ix]``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros((2,) + self.grid.shape, dtype=complex)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (2,) + self.grid.shape:
            raise ValueError(f"spinor values must have shape (2, ny, nx), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spinor values must be finite")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((2,) + grid.shape, dtype=complex))

    @classmethod
    def constant(cls, grid, s):
        s = np.asarray(s, dtype=complex)
        return cls(grid, np.broadcast_to(s[:, None, None], (2,) + grid.shape).copy())

    def norm2(self):
        """Pointwise ``|psi|^2``."""
        v = self.values
        return v[0].real ** 2 + v[0].imag ** 2 + v[1].real ** 2 + v[1].imag ** 2

    def as_real(self):
        """The four real arrays ``(Re psi1, Re psi2, Im psi1, Im psi2)``."""
        return np.concatenate([self.values.real, self.values.imag])

    @classmethod
    def from_real(cls, grid, arr):
        return cls(grid, arr[:2] + 1j * arr[2:])

    def copy(self):
        return SpinorField(self.grid, self.values.copy())

    def __add__(self, other):
        _same_grid(self, other)
        return SpinorField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return SpinorField(self.grid, self.values - other.values)

    def __mul__(self, c):
        return SpinorField(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(eq=False)
class CouplingField:
    """Coupling ``F`` with its gradient. ``constant`` holds mu when F is constant."""

    grid: Grid
    values: np.ndarray
    grad: np.ndarray
    constant: float | None = None

    @classmethod
    def const(cls, grid, mu):
        return cls(grid, np.full(grid.shape, float(mu)), np.zeros((2,) + grid.shape), float(mu))

    @classmethod
    def from_function(cls, grid, f, grad_f=None):
        """Sample ``f(x, y)``; the gradient comes from ``grad_f`` when given,
        otherwise from centered differences of the samples."""
        vals = np.asarray(f(grid.x, grid.y), dtype=float) * np.ones(grid.shape)
        if grad_f is not None:
            gx, gy = grad_f(grid.x, grid.y)
            grad = np.stack([gx * np.ones(grid.shape), gy * np.ones(grid.shape)])
        else:
            from . import kernels

            grad = np.stack(kernels.gradient(vals, grid.h))
        return cls(grid, vals, grad)


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f is not None and f.grid is not g:
            raise GridMismatchError("fields live on different grids")


def energy(u, psi, region=None):
    """``E = int_region (e^{2u} + |psi|^4)``; a vanished u contributes 0."""
    _same_grid(u, psi)
    dens = u.exp(2.0)
    if psi is not None:
        dens = dens + psi.norm2() ** 2
    return integrate((u.grid, dens), region)


def grad_sq(u):
    """Node-wise ``|grad u|^2`` averaged over forward and backward differences.

    Its discrete first variation is exactly ``-Lap_5 u`` at nodes whose
    neighbourhood carries uniform weights, which makes the discrete action
    and the five-point residual mutually consistent.
    """
    h = u.grid.h
    out = np.zeros(u.grid.shape)
    for axis in (0, 1):
        d = np.diff(u.values, axis=axis) / h
        sq = np.zeros(u.grid.shape)
        cnt = np.zeros(u.grid.shape)
        lo = [slice(None)] * 2
        hi = [slice(None)] * 2
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        sq[tuple(lo)] += d * d
        cnt[tuple(lo)] += 1
        sq[tuple(hi)] += d * d
        cnt[tuple(hi)] += 1
        out += sq / cnt
    return out


def action(u, psi, F, region=None, rep=DEFAULT_REP):
    """``int (1/2|grad u|^2 + Re<(D + e^u) psi, psi> + F|psi|^4 - e^{2u})``."""
    if u.vanished:
        raise ValueError("action is undefined when the function part vanishes")
    _same_grid(u, psi, F)
    eu = u.exp()
    dpsi = dirac_apply(psi, rep).values + eu * psi.values
    pair = np.sum((dpsi * psi.values.conj()).real, axis=0)
    n2 = psi.norm2()
    dens = 0.5 * grad_sq(u) + pair + F.values * n2 * n2 - eu * eu
    return integrate((u.grid, dens), region)


def residuals(u, psi, F, rep=DEFAULT_REP, clamp=None):
    """Residuals of the system at interior nodes (zero elsewhere).

    Returns ``(res_u, res_psi)``; ``res_u`` is None when u is vanished.
    """
    _same_grid(u, psi, F)
    grid = u.grid
    interior = grid.interior
    eu = u.exp(clamp=clamp)
    n2 = psi.norm2()
    rpsi = dirac_apply(psi, rep).values + (eu + 2.0 * F.values * n2) * psi.values
    rpsi[:, ~interior] = 0.0
    res_psi = SpinorField(grid, rpsi)
    if u.vanished:
        return None, res_psi
    ru = -laplacian_apply(u).values - 2.0 * eu * eu + eu * n2
    ru[~interior] = 0.0
    return ScalarField(grid, ru), res_psi


def pairing(res_u, res_psi, du, dpsi, region=None):
    """``int res_u du + 2 Re<res_psi, dpsi>``."""
    grid = du.grid
    dens = np.zeros(grid.shape)
    if res_u is not None:
        dens += res_u.values * du.values
    dens += 2.0 * np.sum((res_psi.values * dpsi.values.conj()).real, axis=0)
    return integrate((grid, dens), region)


def variational_check(u, psi, F, direction, step, region=None, rep=DEFAULT_REP):
    """Central difference of the action along ``direction`` vs the residual pairing.

    Returns ``(fd, pairing)``. The two agree to O(step^2) for directions
    supported away from the boundary of ``region``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if u.vanished:
        raise ValueError("variational check needs a non-vanished u")
    du, dpsi = direction
    _same_grid(u, psi, F, du, dpsi)
    plus = action(u + du * step, psi + dpsi * step, F, region, rep)
    minus = action(u - du * step, psi - dpsi * step, F, region, rep)
    fd = (plus - minus) / (2 * step)
    ru, rpsi = residuals(u, psi, F, rep)
    return fd, pairing(ru, rpsi, du, dpsi, region)
