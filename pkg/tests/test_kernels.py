import numpy as np
import pytest

from superl import _kernels_py, kernels
from superl.spin2d import DEFAULT_REP

try:
    from superl import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_backend_flag_is_known():
    assert kernels.BACKEND in ("python", "cython")


def test_laplacian_exact_on_quadratics(backend):
    h = 0.1
    y, x = np.mgrid[0:12, 0:15] * h
    f = 3 * x ** 2 - 2 * x * y + 5 * y ** 2 + x
    lap = kernels.laplacian5(f, h)
    assert np.allclose(lap[1:-1, 1:-1], 6 + 10, atol=1e-10)
    assert np.all(lap[0] == 0) and np.all(lap[:, -1] == 0)


def test_gradient_matches_numpy(backend, rng):
    f = rng.standard_normal((9, 11))
    gx, gy = kernels.gradient(f, 0.3)
    ey, ex = np.gradient(f, 0.3, edge_order=2)
    assert np.allclose(gx, ex) and np.allclose(gy, ey)


def test_gradient_complex(backend, rng):
    f = rng.standard_normal((7, 8)) + 1j * rng.standard_normal((7, 8))
    gx, _ = kernels.gradient(f, 0.5)
    assert np.allclose(gx, np.gradient(f, 0.5, axis=1, edge_order=2))


def test_dirac_matches_gradient_assembly(backend, rng):
    psi = rng.standard_normal((2, 10, 9)) + 1j * rng.standard_normal((2, 10, 9))
    g1, g2 = DEFAULT_REP.gamma1, DEFAULT_REP.gamma2
    out = kernels.dirac(psi, g1, g2, 0.2)
    d = [np.gradient(psi[k], 0.2, edge_order=2) for k in range(2)]
    ref = np.stack([sum(g1[k, j] * d[j][1] + g2[k, j] * d[j][0] for j in range(2)) for k in range(2)])
    assert np.allclose(out, ref)


def test_bilinear_reproduces_bilinear_functions(backend, rng):
    h = 0.25
    y, x = np.mgrid[0:9, 0:9] * h - 1.0
    f = 1 + 2 * x - 3 * y + 0.5 * x * y
    px = rng.uniform(-1, 1, 50)
    py = rng.uniform(-1, 1, 50)
    got = kernels.bilinear(f, -1.0, -1.0, h, px, py)
    assert np.allclose(got, 1 + 2 * px - 3 * py + 0.5 * px * py)


@needs_c
def test_backends_agree(rng):
    f = rng.standard_normal((33, 29))
    z = rng.standard_normal((2, 33, 29)) + 1j * rng.standard_normal((2, 33, 29))
    h = 0.07
    assert np.allclose(_ckernels.laplacian5(f, h), _kernels_py.laplacian5(f, h), atol=1e-12)
    for a, b in zip(_ckernels.gradient(f, h), _kernels_py.gradient(f, h)):
        assert np.allclose(a, b, atol=1e-12)
    g1, g2 = DEFAULT_REP.gamma1, DEFAULT_REP.gamma2
    assert np.allclose(_ckernels.dirac(z, g1, g2, h), _kernels_py.dirac(z, g1, g2, h), atol=1e-12)
    px = rng.uniform(0, 28 * h, 100)
    py = rng.uniform(0, 32 * h, 100)
    assert np.allclose(_ckernels.bilinear(f, 0.0, 0.0, h, px, py),
                       _kernels_py.bilinear(f, 0.0, 0.0, h, px, py), atol=1e-12)
