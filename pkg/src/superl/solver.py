"""Damped Newton solver for the coupled system on a disk or annulus.

Unknowns are ``u`` on interior nodes (Dirichlet data on boundary nodes) and
both spinor components on every inside node, split into real and imaginary
parts. At boundary nodes the spinor obeys the local chiral-bag condition
``P psi = P g`` with ``P = (I - i nu.gamma)/2`` built from the outward normal
``nu``; the complementary component satisfies the projected Dirac equation
with one-sided differences. This boundary condition is an engineering choice
that makes the discrete first-order system square.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import ScalarField, SpinorField
from .spin2d import DEFAULT_REP, dirac_apply, dirac_matrix, laplacian_apply


class SolverError(RuntimeError):
    pass


class LinearSolveError(SolverError):
    pass


class SingularJacobianError(SolverError):
    pass


@dataclass
class SolverConfig:
    tol: float = 1e-9
    max_iter: int = 30
    backtrack: float = 0.5
    min_step: float = 1e-8
    linear_tol: float = 1e-12
    armijo: float = 1e-4
    exp_clamp: float = 50.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)
    converged: bool = False
    residual_u: float = math.nan
    residual_psi: float = math.nan
    message: str = ""
    min_pivot: float = math.nan

    def to_json(self):
        return asdict(self)


# --- linear pieces ------------------------------------------------------------


def _index(mask):
    idx = -np.ones(mask.shape, dtype=np.int64)
    ii, jj = np.nonzero(mask)
    idx[ii, jj] = np.arange(ii.size)
    return idx, ii, jj


def laplacian_blocks(grid):
    """Five-point Laplacian on interior rows, split as ``(L_II, L_IB)``.

    ``L_IB`` acts on the full node array (flattened) so that Dirichlet data
    can be supplied on any non-interior node.
    """
    idx, ii, jj = _index(grid.interior)
    n = ii.size
    inv = 1.0 / grid.h ** 2
    rows_i, cols_i, vals_i = [np.arange(n)], [np.arange(n)], [np.full(n, -4 * inv)]
    rows_b, cols_b = [], []
    for di, dj in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        ni, nj = ii + di, jj + dj
        k = idx[ni, nj]
        inner = k >= 0
        rows_i.append(np.arange(n)[inner])
        cols_i.append(k[inner])
        vals_i.append(np.full(int(inner.sum()), inv))
        rows_b.append(np.arange(n)[~inner])
        cols_b.append(ni[~inner] * grid.nx + nj[~inner])
    L_II = sp.csr_matrix((np.concatenate(vals_i), (np.concatenate(rows_i), np.concatenate(cols_i))),
                         shape=(n, n))
    rb = np.concatenate(rows_b)
    L_IB = sp.csr_matrix((np.full(rb.size, inv), (rb, np.concatenate(cols_b))),
                         shape=(n, grid.nx * grid.ny))
    return L_II, L_IB


def linear_poisson_solve(rhs, bc, tol=1e-12):
    """Solve ``-Lap u = rhs`` on interior nodes with ``u = bc`` elsewhere."""
    grid = bc.grid
    rhs_vals = rhs.values if isinstance(rhs, ScalarField) else np.broadcast_to(rhs, grid.shape)
    L_II, L_IB = laplacian_blocks(grid)
    mask = grid.interior
    b = -rhs_vals[mask] - L_IB @ bc.values.ravel()
    try:
        ui = spla.splu(L_II.tocsc()).solve(b)
    except RuntimeError as exc:
        raise LinearSolveError(f"Poisson factorization failed: {exc}") from exc
    res = np.max(np.abs(L_II @ ui - b), initial=0.0)
    scale = max(np.max(np.abs(b), initial=0.0), 1.0)
    if not np.isfinite(res) or res > max(tol, 1e-10) * scale * 1e3:
        raise LinearSolveError(f"Poisson solve residual {res:.3e} exceeds tolerance")
    out = bc.values.copy()
    out[mask] = ui
    return ScalarField(grid, out)


def bag_projector(nu, rep=DEFAULT_REP):
    """``P = (I - i nu.gamma)/2`` for one unit normal."""
    return 0.5 * (np.eye(2) - 1j * rep.of(nu))


def outward_normals(grid, nodes_i, nodes_j):
    dom = grid.domain
    cx, cy = dom.center
    dx = grid.xs[nodes_j] - cx
    dy = grid.ys[nodes_i] - cy
    r = np.hypot(dx, dy)
    if dom.kind == "disk":
        sgn = np.ones_like(r)
    elif dom.kind == "annulus":
        sgn = np.where(r > 0.5 * (dom.radii[0] + dom.radii[1]), 1.0, -1.0)
    else:
        raise ValueError("Newton solver supports disk and annulus domains")
    return sgn * dx / r, sgn * dy / r


def _realify(M):
    M = sp.csr_matrix(M)
    return sp.bmat([[M.real, -M.imag], [M.imag, M.real]], format="csr")


class _System:
    """Discrete residual map and its sparse Jacobian on one grid."""

    def __init__(self, grid, F, bc_u, bc_psi, rep):
        self.grid = grid
        self.F = F
        self.rep = rep
        self.imask = grid.interior
        self.amask = grid.inside
        self.aidx, ai, aj = _index(self.amask)
        self.nA = ai.size
        self.iidx, ii, ij = _index(self.imask)
        self.nI = ii.size
        self.ai, self.aj = ai, aj
        # interior nodes among the A-ordering
        self.a_is_int = self.imask[ai, aj]
        self.a_to_i = self.iidx[ai, aj]
        self.bc_u = bc_u
        self.bc_psi = bc_psi
        self.L_II, self.L_IB = laplacian_blocks(grid)
        self.lap_bc = self.L_IB @ bc_u.values.ravel()
        self.D = dirac_matrix(grid, self.amask, rep).tocsr()
        # boundary projections
        bsel = ~self.a_is_int
        bi, bj = ai[bsel], aj[bsel]
        nux, nuy = outward_normals(grid, bi, bj)
        M = 1j * (nux[:, None, None] * rep.gamma1 + nuy[:, None, None] * rep.gamma2)
        _, vecs = np.linalg.eigh(M)
        self.e = vecs[:, :, 0]  # eigenvalue -1: range of P
        self.f = vecs[:, :, 1]  # eigenvalue +1: range of I - P
        self.nu = (nux, nuy)
        self.bpos = np.nonzero(bsel)[0]
        nA = self.nA
        rows, cols, vals = [], [], []
        brows, bcols, bvals = [], [], []
        ints = np.nonzero(self.a_is_int)[0]
        for k in range(2):
            rows.append(k * nA + ints)
            cols.append(k * nA + ints)
            vals.append(np.ones(ints.size, dtype=complex))
            for j in range(2):
                rows.append(1 * nA + self.bpos)
                cols.append(j * nA + self.bpos)
                vals.append(self.f[:, j].conj())
                brows.append(0 * nA + self.bpos)
                bcols.append(j * nA + self.bpos)
                bvals.append(self.e[:, j].conj())
        shape = (2 * nA, 2 * nA)
        self.Q = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=shape)
        self.B = sp.csr_matrix((np.concatenate(bvals), (np.concatenate(brows), np.concatenate(bcols))),
                               shape=shape)
        self.RQ = _realify(self.Q)
        self.RD = _realify(self.D)
        self.RB = _realify(self.B)
        self.Fa = F.values[ai, aj]
        self.g = bc_psi.values[:, ai, aj].reshape(-1)
        self.n = self.nI + 4 * nA

    # state <-> vector
    def pack(self, u, psi):
        z = psi.values[:, self.ai, self.aj].reshape(-1)
        return np.concatenate([u.values[self.imask], z.real, z.imag])

    def unpack(self, x):
        uvals = self.bc_u.values.copy()
        uvals[self.imask] = x[: self.nI]
        z = x[self.nI: self.nI + 2 * self.nA] + 1j * x[self.nI + 2 * self.nA:]
        pvals = self.bc_psi.values.copy()
        pvals[:, self.ai, self.aj] = z.reshape(2, self.nA)
        return ScalarField(self.grid, uvals), SpinorField(self.grid, pvals)

    def _pieces(self, x, clamp=None):
        uI = x[: self.nI]
        ua = self.bc_u.values[self.ai, self.aj].copy()
        ua[self.a_is_int] = uI[self.a_to_i[self.a_is_int]]
        if clamp is not None:
            ua = np.minimum(ua, clamp)
        with np.errstate(over="ignore"):
            ea = np.exp(ua)
        re = x[self.nI: self.nI + 2 * self.nA].reshape(2, self.nA)
        im = x[self.nI + 2 * self.nA:].reshape(2, self.nA)
        n2 = np.sum(re * re + im * im, axis=0)
        return ua, ea, re, im, n2

    def residual(self, x, clamp=None):
        ua, ea, re, im, n2 = self._pieces(x, clamp)
        uI = x[: self.nI]
        eI = ea[self.a_is_int]
        # a_is_int rows are ordered like the interior index
        order = np.argsort(self.a_to_i[self.a_is_int])
        eI = eI[order]
        n2I = n2[self.a_is_int][order]
        ru = -(self.L_II @ uI + self.lap_bc) - 2 * eI * eI + eI * n2I
        z = (re + 1j * im).reshape(-1)
        coef = np.tile(ea + 2 * self.Fa * n2, 2)
        inner = self.D @ z + coef * z
        rpsi = self.Q @ inner + self.B @ (z - self.g)
        return np.concatenate([ru, rpsi.real, rpsi.imag])

    def jacobian(self, x):
        ua, ea, re, im, n2 = self._pieces(x)
        nA, nI = self.nA, self.nI
        int_pos = np.nonzero(self.a_is_int)[0]
        i_of = self.a_to_i[int_pos]
        # u-u block
        diag = np.zeros(nI)
        diag[i_of] = -4 * ea[int_pos] ** 2 + ea[int_pos] * n2[int_pos]
        Juu = -self.L_II + sp.diags(diag)
        # u-psi block: 2 e^u (Re psi . dRe + Im psi . dIm)
        rows, cols, vals = [], [], []
        for part, arr in ((0, re), (1, im)):
            for k in range(2):
                rows.append(i_of)
                cols.append(part * 2 * nA + k * nA + int_pos)
                vals.append(2 * ea[int_pos] * arr[k, int_pos])
        Jup = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(nI, 4 * nA))
        # psi-u block before projection: e^u psi at interior nodes
        rows, cols, vals = [], [], []
        for part, arr in ((0, re), (1, im)):
            for k in range(2):
                rows.append(part * 2 * nA + k * nA + int_pos)
                cols.append(i_of)
                vals.append(ea[int_pos] * arr[k, int_pos])
        E = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(4 * nA, nI))
        # pointwise nonlinear block: (e^u + 2F|psi|^2) I + 4F v v^T per node
        v = np.stack([re[0], re[1], im[0], im[1]])
        offs = np.array([0, nA, 2 * nA, 3 * nA])
        base = np.arange(nA)
        rows, cols, vals = [], [], []
        c = ea + 2 * self.Fa * n2
        for p in range(4):
            for q in range(4):
                rows.append(offs[p] + base)
                cols.append(offs[q] + base)
                vals.append(4 * self.Fa * v[p] * v[q] + (c if p == q else 0.0))
        N = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(4 * nA, 4 * nA))
        Jpp = self.RQ @ (self.RD + N) + self.RB
        Jpu = self.RQ @ E
        return sp.bmat([[Juu, Jup], [Jpu, Jpp]], format="csc")

    def split_norms(self, r):
        ru = np.max(np.abs(r[: self.nI]), initial=0.0)
        rp = np.max(np.abs(r[self.nI:]), initial=0.0)
        return float(ru), float(rp)


# --- field-level linearization -----------------------------------------------


def jacobian_matvec(u, psi, F, direction, rep=DEFAULT_REP):
    """Linearization of :func:`superl.fields.residuals` applied to ``direction``.

    Returns ``(d res_u, d res_psi)`` on interior nodes (zero elsewhere)::

        d res_u   = -Lap du - 4e^{2u} du + e^u|psi|^2 du + 2 e^u Re<psi, dpsi>
        d res_psi = D dpsi + e^u dpsi + e^u psi du
                    + 2F(|psi|^2 dpsi + 2 Re<psi, dpsi> psi)
    """
    du, dpsi = direction
    grid = u.grid
    eu = u.exp()
    n2 = psi.norm2()
    dot = np.sum((psi.values.conj() * dpsi.values).real, axis=0)
    ru = (-laplacian_apply(du).values - 4 * eu * eu * du.values + eu * n2 * du.values
          + 2 * eu * dot)
    rp = (dirac_apply(dpsi, rep).values + eu * dpsi.values + eu * psi.values * du.values
          + 2 * F.values * (n2 * dpsi.values + 2 * dot * psi.values))
    mask = ~grid.interior
    ru[mask] = 0.0
    rp[:, mask] = 0.0
    return ScalarField(grid, ru), SpinorField(grid, rp)


# --- Newton ---------------------------------------------------------------------


def _as_scalar(grid, bc):
    if isinstance(bc, ScalarField):
        return bc
    return ScalarField(grid, np.broadcast_to(np.asarray(bc, dtype=float), grid.shape).copy())


def newton_solve(u0, psi0, F, bc_u, bc_psi=None, config=None, rep=DEFAULT_REP):
    """Damped Newton iteration for the discrete coupled system.

    Parameters
    ----------
    u0, psi0 : initial guess (u0 must not be vanished)
    F : CouplingField
    bc_u : ScalarField or constant; its values on non-interior nodes are the
        Dirichlet data.
    bc_psi : SpinorField or None; the bag data are ``P g`` at boundary nodes.
    config : SolverConfig

    Returns ``(u, psi, report)``. When the iteration fails the best iterate is
    returned with ``report.converged = False``.
    """
    if u0.vanished:
        raise ValueError("Newton solver needs a non-vanished initial u")
    config = config or SolverConfig()
    grid = u0.grid
    bc_u = _as_scalar(grid, bc_u)
    bc_psi = bc_psi if bc_psi is not None else SpinorField.zeros(grid)
    sysm = _System(grid, F, bc_u, bc_psi, rep)
    x = sysm.pack(u0, psi0)
    report = SolveReport()
    r = sysm.residual(x)
    rn = float(np.max(np.abs(r)))
    report.residual_history.append(rn)
    best = (rn, x.copy())
    for it in range(config.max_iter):
        if rn < config.tol:
            report.converged = True
            break
        if not np.isfinite(rn):
            report.message = "non-finite residual"
            break
        J = sysm.jacobian(x)
        try:
            lu = spla.splu(J)
        except RuntimeError as exc:
            raise SingularJacobianError(f"Jacobian factorization failed at iteration {it}: {exc}") from exc
        piv = np.abs(lu.U.diagonal())
        report.min_pivot = float(piv.min())
        if report.min_pivot <= 1e-14 * piv.max():
            raise SingularJacobianError(
                f"Jacobian numerically singular at iteration {it} "
                f"(smallest pivot {report.min_pivot:.3e}, largest {piv.max():.3e})")
        dx = lu.solve(-r)
        t = 1.0
        while True:
            trial = x + t * dx
            rt = sysm.residual(trial, clamp=config.exp_clamp)
            rtn = float(np.max(np.abs(rt)))
            if np.isfinite(rtn) and rtn <= (1 - config.armijo * t) * rn:
                break
            t *= config.backtrack
            if t < config.min_step:
                break
        report.iterations = it + 1
        if t < config.min_step:
            report.message = f"damping floor reached at iteration {it}"
            break
        x = trial
        r = sysm.residual(x)
        rn = float(np.max(np.abs(r)))
        report.residual_history.append(rn)
        report.step_history.append(t)
        if rn < best[0]:
            best = (rn, x.copy())
    else:
        if rn < config.tol:
            report.converged = True
        else:
            report.message = f"no convergence in {config.max_iter} iterations"
    if report.converged:
        best = (rn, x)
        report.message = report.message or "converged"
    report.residual_u, report.residual_psi = sysm.split_norms(sysm.residual(best[1]))
    u, psi = sysm.unpack(best[1])
    return u, psi, report


def stacked_residual(u, psi, F, bc_u, bc_psi=None, rep=DEFAULT_REP):
    """Residual vector of the solver's square system (diagnostics/tests)."""
    grid = u.grid
    sysm = _System(grid, F, _as_scalar(grid, bc_u), bc_psi or SpinorField.zeros(grid), rep)
    return sysm.residual(sysm.pack(u, psi))
