"""Clifford algebra of the Euclidean plane and flat-chart Dirac/Laplace stencils."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class CliffordRep:
    """Pair of 2x2 complex matrices with g_i g_j + g_j g_i = -2 delta_ij.

    The default is ``g1 = i sigma_1, g2 = i sigma_2``. Any unitarily
    equivalent pair may be passed; ``validate`` checks the relations.
    """

    gamma1: np.ndarray
    gamma2: np.ndarray

    def validate(self, atol=1e-14):
        g = (self.gamma1, self.gamma2)
        eye = np.eye(2)
        for i in range(2):
            if not np.allclose(g[i].conj().T, -g[i], atol=atol):
                raise ValueError(f"gamma{i + 1} is not skew-Hermitian")
            for j in range(2):
                anti = g[i] @ g[j] + g[j] @ g[i]
                if not np.allclose(anti, -2.0 * (i == j) * eye, atol=atol):
                    raise ValueError(f"Clifford relation fails for ({i + 1}, {j + 1})")
        return self

    def of(self, v):
        """Matrix of Clifford multiplication by the vector ``v``."""
        return v[0] * self.gamma1 + v[1] * self.gamma2


DEFAULT_REP = CliffordRep(1j * SIGMA1, 1j * SIGMA2).validate()


def clifford_mul(v, s, rep=DEFAULT_REP):
    """Clifford product ``(v1 g1 + v2 g2) s``.

    ``v`` may be a fixed 2-vector or a pair of arrays (one vector per node);
    ``s`` has shape ``(2, ...)``.
    """
    s = np.asarray(s, dtype=complex)
    v0, v1 = v[0], v[1]
    g1, g2 = rep.gamma1, rep.gamma2
    shape = np.broadcast_shapes(s.shape[1:], np.shape(v0), np.shape(v1))
    out = np.empty((2,) + shape, dtype=complex)
    for k in range(2):
        out[k] = (v0 * (g1[k, 0] * s[0] + g1[k, 1] * s[1])
                  + v1 * (g2[k, 0] * s[0] + g2[k, 1] * s[1]))
    return out


def _require_size(grid):
    if min(grid.nx, grid.ny) < 5:
        raise ValueError("stencils need at least 5 nodes per axis")


def dirac_apply(psi, rep=DEFAULT_REP):
    """Flat Dirac operator ``g1 d1 + g2 d2`` on a SpinorField.

    Centered differences at nodes with both neighbours, second-order
    one-sided differences on the array edges.
    """
    from .fields import SpinorField

    _require_size(psi.grid)
    return SpinorField(psi.grid, kernels.dirac(psi.values, rep.gamma1, rep.gamma2, psi.grid.h))


def laplacian_apply(f):
    """Five-point Laplacian of a ScalarField or SpinorField.

    Values on the outermost ring of the node array are zero (no stencil there);
    results are meaningful on ``grid.interior``.
    """
    from .fields import ScalarField, SpinorField

    _require_size(f.grid)
    h = f.grid.h
    if isinstance(f, SpinorField):
        return SpinorField(f.grid, np.stack([kernels.laplacian5(f.values[k], h) for k in range(2)]))
    if f.vanished:
        raise ValueError("laplacian of a vanished scalar field is undefined")
    return ScalarField(f.grid, kernels.laplacian5(f.values, h))


def dirac_matrix(grid, rows_mask, rep=DEFAULT_REP):
    """Sparse complex Dirac matrix acting on ``[psi1; psi2]`` restricted to the
    ``rows_mask`` nodes (rows and columns both use that node set).

    Rows whose node has both axis neighbours in the set use centered
    differences; otherwise second-order one-sided differences when two nodes
    are available in that direction, else first order; isolated nodes borrow
    an adjacent grid line.
    """
    import scipy.sparse as sp

    dx, dy = derivative_matrices(grid, rows_mask)
    g1, g2 = rep.gamma1, rep.gamma2
    blocks = [[g1[k, j] * dx + g2[k, j] * dy for j in range(2)] for k in range(2)]
    return sp.bmat(blocks, format="csr")


def derivative_matrices(grid, mask):
    """First-derivative matrices on the node set ``mask`` (see dirac_matrix).

    A node with no neighbour along an axis uses the central difference on an
    adjacent grid line (first order, exact on linear data).
    """
    import scipy.sparse as sp

    idx = -np.ones(grid.shape, dtype=np.int64)
    ii, jj = np.nonzero(mask)
    n = ii.size
    idx[ii, jj] = np.arange(n)
    inv2h = 0.5 / grid.h
    invh = 1.0 / grid.h

    def lookup(i, j):
        ok = (i >= 0) & (i < grid.ny) & (j >= 0) & (j < grid.nx)
        out = -np.ones_like(i)
        out[ok] = idx[i[ok], j[ok]]
        return out

    mats = []
    for di, dj in ((0, 1), (1, 0)):
        p1 = lookup(ii + di, jj + dj)
        m1 = lookup(ii - di, jj - dj)
        p2 = lookup(ii + 2 * di, jj + 2 * dj)
        m2 = lookup(ii - 2 * di, jj - 2 * dj)
        rows, cols, vals = [], [], []
        me = np.arange(n)

        def add(sel, col, v):
            rows.append(me[sel])
            cols.append(col[sel])
            vals.append(np.full(int(sel.sum()), v))

        central = (p1 >= 0) & (m1 >= 0)
        add(central, p1, inv2h)
        add(central, m1, -inv2h)
        fwd2 = ~central & (p1 >= 0) & (p2 >= 0)
        add(fwd2, me, -3 * inv2h)
        add(fwd2, p1, 4 * inv2h)
        add(fwd2, p2, -inv2h)
        bwd2 = ~central & ~fwd2 & (m1 >= 0) & (m2 >= 0)
        add(bwd2, me, 3 * inv2h)
        add(bwd2, m1, -4 * inv2h)
        add(bwd2, m2, inv2h)
        fwd1 = ~central & ~fwd2 & ~bwd2 & (p1 >= 0)
        add(fwd1, me, -invh)
        add(fwd1, p1, invh)
        bwd1 = ~central & ~fwd2 & ~bwd2 & ~fwd1 & (m1 >= 0)
        add(bwd1, me, invh)
        add(bwd1, m1, -invh)
        # no neighbour along this axis: central difference on an adjacent line
        lone = ~central & ~fwd2 & ~bwd2 & ~fwd1 & ~bwd1
        for si, sj in ((dj, di), (-dj, -di)):
            sp1 = lookup(ii + si + di, jj + sj + dj)
            sm1 = lookup(ii + si - di, jj + sj - dj)
            use = lone & (sp1 >= 0) & (sm1 >= 0)
            add(use, sp1, inv2h)
            add(use, sm1, -inv2h)
            lone &= ~use
        mats.append(sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                  shape=(n, n)))
    return mats[0], mats[1]
