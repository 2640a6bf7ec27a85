import json

import numpy as np
import pytest

from superl import solver
from superl.exact import liouville_bubble, yamabe_bubble
from superl.fields import CouplingField, ScalarField, SpinorField, residuals
from superl.grid import Domain, make_grid
from superl.solver import (SingularJacobianError, SolverConfig, bag_projector,
                           jacobian_matvec, linear_poisson_solve, newton_solve)


def test_poisson_exact_on_quadratic(disk32):
    g = disk32
    bc = ScalarField(g, g.x ** 2 + g.y ** 2)
    u = linear_poisson_solve(ScalarField.constant(g, -4.0), bc)
    assert np.max(np.abs(u.values - bc.values)[g.inside]) < 1e-10


def test_poisson_maximum_principle(disk32, rng):
    g = disk32
    bc = ScalarField(g, np.cos(3 * g.x + rng.uniform()) * np.sinh(g.y) + rng.standard_normal())
    u = linear_poisson_solve(ScalarField.constant(g, 0.0), bc)
    b = bc.values[g.boundary]
    assert b.min() - 1e-12 <= u.values[g.inside].min()
    assert u.values[g.inside].max() <= b.max() + 1e-12


def test_poisson_liouville_second_order():
    errs = []
    for h in (1 / 32, 1 / 64):
        g = make_grid(Domain.disk(1.0), h)
        ue, _ = liouville_bubble(2.0, (0, 0), g)
        u = linear_poisson_solve(ScalarField(g, 2 * ue.exp(2.0)), ue)
        errs.append(np.max(np.abs(u.values - ue.values)[g.inside]))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
    with pytest.raises(ValueError):
        SolverConfig(backtrack=1.0)


def test_projector_is_idempotent(rng):
    for _ in range(5):
        th = rng.uniform(0, 2 * np.pi)
        P = bag_projector((np.cos(th), np.sin(th)))
        assert np.allclose(P @ P, P, atol=1e-15)
        assert np.linalg.matrix_rank(P) == 1


@pytest.fixture(scope="module")
def recovered():
    g = make_grid(Domain.disk(1.0), 1 / 32)
    ue, pe = liouville_bubble(2.0, (0, 0), g)
    bump = np.exp(-4 * (g.x ** 2 + g.y ** 2))
    u0 = ScalarField(g, ue.values * (1 + 0.01 * bump))
    u, psi, rep = newton_solve(u0, pe, CouplingField.const(g, 0.0), ue, pe)
    return g, ue, u, psi, rep


def test_newton_recovers_exact_bubble(recovered):
    g, ue, u, psi, rep = recovered
    assert rep.converged and rep.iterations <= 12
    assert rep.residual_history[-1] < 1e-9
    assert np.max(np.abs(u.values - ue.values)[g.inside]) <= 5 * g.h ** 2
    assert np.max(np.abs(psi.values)) < 1e-12


def test_newton_history_and_quadratic_tail(recovered):
    rep = recovered[-1]
    hist = rep.residual_history
    assert all(b <= a for a, b in zip(hist, hist[1:]))
    tail = [(a, b) for a, b in zip(hist, hist[1:]) if a < 1e-3 and b > 1e-13]
    assert all(b / a ** 2 <= 1e2 for a, b in tail)


def test_report_serializes(recovered):
    rep = recovered[-1]
    d = json.loads(json.dumps(rep.to_json()))
    assert d["converged"] is True and d["iterations"] == rep.iterations


def test_subcritical_solution(disk32):
    g = disk32
    u, psi, rep = newton_solve(ScalarField.constant(g, 0.0), SpinorField.zeros(g),
                               CouplingField.const(g, 0.0), -5.0)
    assert rep.converged and rep.residual_history[-1] < 1e-9
    ru, _ = residuals(u, psi, CouplingField.const(g, 0.0))
    assert np.max(np.abs(ru.values)) < 1e-9
    assert np.max(u.values[g.inside]) < -4.9


def test_far_start_fails_gracefully(disk32):
    g = disk32
    u, psi, rep = newton_solve(ScalarField.constant(g, 8.0), SpinorField.zeros(g),
                               CouplingField.const(g, 0.0), 8.0, config=SolverConfig(max_iter=30))
    assert not rep.converged
    assert rep.message
    assert len(rep.residual_history) >= 1


def test_coupled_bag_solve(disk32):
    g = disk32
    _, py = yamabe_bubble(1.0, -0.5, (1, 0), None, (0, 0), g)
    F = CouplingField.const(g, -0.5)
    u, psi, rep = newton_solve(ScalarField.constant(g, -1.0), py, F, -1.0, py)
    assert rep.converged
    ru, rp = residuals(u, psi, F)
    assert np.max(np.abs(ru.values)) < 1e-9 and np.max(np.abs(rp.values)) < 1e-9
    # bag condition P psi = P g at boundary nodes
    bi, bj = np.nonzero(g.boundary)
    nux, nuy = solver.outward_normals(g, bi, bj)
    worst = 0.0
    for k in range(bi.size):
        P = bag_projector((nux[k], nuy[k]))
        d = P @ (psi.values[:, bi[k], bj[k]] - py.values[:, bi[k], bj[k]])
        worst = max(worst, np.max(np.abs(d)))
    assert worst <= 1e-12


def test_vanished_start_rejected(disk32):
    with pytest.raises(ValueError):
        newton_solve(ScalarField.vanishing(disk32), SpinorField.zeros(disk32),
                     CouplingField.const(disk32, 0), 0.0)


def test_singular_jacobian_reported(disk32, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("Factor is exactly singular")

    monkeypatch.setattr(solver.spla, "splu", boom)
    with pytest.raises(SingularJacobianError):
        newton_solve(ScalarField.constant(disk32, 0.0), SpinorField.zeros(disk32),
                     CouplingField.const(disk32, 0), -5.0)


def smooth_state(g, rng):
    u = ScalarField(g, 0.4 * np.sin(rng.uniform(1, 2) * g.x + g.y) - 0.2)
    psi = SpinorField(g, np.stack([np.cos(g.x + rng.uniform()) + 0.3j * g.y,
                                   0.5 * g.x * g.y + 1j * np.sin(rng.uniform(1, 2) * g.y)]))
    return u, psi


def test_jacobian_zero_direction(disk32, rng):
    u, psi = smooth_state(disk32, rng)
    du, dp = jacobian_matvec(u, psi, CouplingField.const(disk32, 0.3),
                             (ScalarField.constant(disk32, 0), SpinorField.zeros(disk32)))
    assert np.all(du.values == 0) and np.all(dp.values == 0)


def test_jacobian_block_structure_at_zero_spinor(disk32, rng):
    u, _ = liouville_bubble(2.0, (0, 0), disk32)
    dpsi = SpinorField(disk32, rng.standard_normal((2,) + disk32.shape) + 0j)
    du, _ = jacobian_matvec(u, SpinorField.zeros(disk32), CouplingField.const(disk32, 0),
                            (ScalarField.constant(disk32, 0), dpsi))
    assert np.all(du.values == 0)


@pytest.mark.parametrize("seed", range(10))
def test_jacobian_matches_finite_differences(disk32, seed):
    g = disk32
    rng = np.random.default_rng(seed)
    u, psi = smooth_state(g, rng)
    F = CouplingField.from_function(g, lambda x, y: 0.5 + 0.2 * x * y, lambda x, y: (0.2 * y, 0.2 * x))
    du = ScalarField(g, np.cos(rng.uniform(1, 3) * g.x) * g.y)
    dp = SpinorField(g, np.stack([np.exp(0.5 * g.x) + 0j, 1j * np.sin(rng.uniform(1, 3) * g.y)]))
    eps = 1e-5
    plus = residuals(u + du * eps, psi + dp * eps, F)
    minus = residuals(u - du * eps, psi - dp * eps, F)
    fu = (plus[0].values - minus[0].values) / (2 * eps)
    fp = (plus[1].values - minus[1].values) / (2 * eps)
    ju, jp = jacobian_matvec(u, psi, F, (du, dp))
    assert np.max(np.abs(ju.values - fu)) <= 1e-5 * np.max(np.abs(fu))
    assert np.max(np.abs(jp.values - fp)) <= 1e-5 * np.max(np.abs(fp))
