"""Kernel backend selection and compiled/pure-numpy equivalence."""

import numpy as np
import pytest

from ringkinetics.domain import build_grid, gaussian_ring_ic
from ringkinetics.errors import BackendError, CflError
from ringkinetics.kernels import (
    BACKEND_ENV_VAR,
    HAS_NUMBA,
    active_backend,
    lagrange_weights,
    requested_backend,
    sl_transport,
)

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba not importable")


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------

def test_requested_backend_default_is_auto(monkeypatch):
    monkeypatch.delenv(BACKEND_ENV_VAR, raising=False)
    assert requested_backend() == "auto"
    assert active_backend() in ("numba", "numpy")


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv(BACKEND_ENV_VAR, "numpy")
    assert requested_backend() == "numpy"
    assert active_backend() == "numpy"


@needs_numba
def test_env_flag_selects_numba(monkeypatch):
    monkeypatch.setenv(BACKEND_ENV_VAR, "numba")
    assert active_backend() == "numba"


def test_env_flag_rejects_unknown(monkeypatch):
    monkeypatch.setenv(BACKEND_ENV_VAR, "fortran")
    with pytest.raises(BackendError, match="must be auto, numba, or numpy"):
        requested_backend()


def test_override_beats_environment(monkeypatch):
    monkeypatch.setenv(BACKEND_ENV_VAR, "numpy")
    if HAS_NUMBA:
        assert active_backend("numba") == "numba"
    assert active_backend("numpy") == "numpy"
    with pytest.raises(BackendError, match="unknown backend"):
        active_backend("fortran")


# ---------------------------------------------------------------------------
# Interpolation weights
# ---------------------------------------------------------------------------

def test_lagrange_weights_partition_of_unity(rng):
    t = rng.uniform(0.0, 1.0, size=64)
    w0, w1, w2, w3 = lagrange_weights(t)
    np.testing.assert_allclose(w0 + w1 + w2 + w3, 1.0, rtol=1e-13)
    # reproduce cubics exactly: nodes at -1, 0, 1, 2
    for coeffs in ((0.0, 0.0, 1.0, 0.0), (1.0, -2.0, 0.5, 3.0)):
        poly = np.polynomial.Polynomial(coeffs)
        interp = (w0 * poly(-1.0) + w1 * poly(0.0) + w2 * poly(1.0)
                  + w3 * poly(2.0))
        np.testing.assert_allclose(interp, poly(t), rtol=1e-12, atol=1e-13)


def test_lagrange_weights_collocate_at_nodes():
    w = lagrange_weights(np.array([0.0, 1.0]))
    np.testing.assert_allclose([w[1][0], w[2][1]], [1.0, 1.0], atol=1e-15)
    np.testing.assert_allclose([w[0][0], w[2][0], w[3][0]], 0.0, atol=1e-15)


# ---------------------------------------------------------------------------
# Kernel equivalence and guards
# ---------------------------------------------------------------------------

def _kernel_inputs(annulus, rng):
    grid = build_grid(annulus, 24, 13, 0.5)
    f = gaussian_ring_ic(grid, 2.0, 0.12, 0.15, 1.0, 0.4)
    n = grid.Nr + 1
    er = 0.2 * rng.normal(size=n)
    eth = 0.2 * rng.normal(size=n)
    bav = 0.2 * rng.normal(size=n)
    bext = 0.1 * rng.normal(size=8 * grid.Nr + 1)
    return grid, f, er, eth, bav, bext


@needs_numba
def test_backends_agree(annulus, rng):
    grid, f, er, eth, bav, bext = _kernel_inputs(annulus, rng)
    dt = 0.8 * grid.dr
    out_nb, leaks_nb = sl_transport(f.values, grid.r, grid.p, dt, er, eth, bav,
                                    bext, backend="numba")
    out_np, leaks_np = sl_transport(f.values, grid.r, grid.p, dt, er, eth, bav,
                                    bext, backend="numpy")
    assert leaks_nb == leaks_np
    np.testing.assert_allclose(out_nb, out_np, rtol=1e-12, atol=1e-14)


def test_kernel_rejects_oversized_step(annulus, rng):
    grid, f, er, eth, bav, bext = _kernel_inputs(annulus, rng)
    with pytest.raises(CflError, match="dt"):
        sl_transport(f.values, grid.r, grid.p, 1.5 * grid.dr, er, eth, bav,
                     bext, backend="numpy")


def test_kernel_rejects_misaligned_external_table(annulus, rng):
    grid, f, er, eth, bav, _ = _kernel_inputs(annulus, rng)
    bad = np.zeros(8 * grid.Nr + 2)
    with pytest.raises(CflError, match="integer factor"):
        sl_transport(f.values, grid.r, grid.p, 0.5 * grid.dr, er, eth, bav,
                     bad, backend="numpy")


def test_kernel_pins_boundary_rows(annulus, rng):
    grid, f, er, eth, bav, bext = _kernel_inputs(annulus, rng)
    out, _ = sl_transport(f.values, grid.r, grid.p, 0.9 * grid.dr, er, eth,
                          bav, bext, backend="numpy")
    assert np.all(out[0] == 0.0) and np.all(out[-1] == 0.0)
    assert np.all(out[:, 0, :] == 0.0) and np.all(out[:, -1, :] == 0.0)
    assert np.all(out[:, :, 0] == 0.0) and np.all(out[:, :, -1] == 0.0)
