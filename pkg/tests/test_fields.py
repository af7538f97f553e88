"""Radial Gauss solve, tangential wave pair, and the wall reconstruction."""

import math

import numpy as np
import pytest

from ringkinetics.domain import uniform_radial_nodes
from ringkinetics.errors import CflError, HistoryError
from ringkinetics.fields import (
    WaveHistory,
    WaveState,
    ampere_consistency,
    boundary_recursion_check,
    fields_from_waves,
    gauss_radial_field,
    step_waves,
    waves_from_fields,
)


def _nodes(nr=32):
    return uniform_radial_nodes(1.0, 3.0, nr)


# ---------------------------------------------------------------------------
# Wave <-> field maps
# ---------------------------------------------------------------------------

def test_wave_field_round_trip(rng):
    r = _nodes()
    etheta = rng.normal(size=r.size)
    b = rng.normal(size=r.size)
    w = waves_from_fields(etheta, b, r, time=0.3)
    assert w.time == 0.3
    np.testing.assert_allclose(w.pplus, r * (etheta + b), rtol=1e-15)
    np.testing.assert_allclose(w.pminus, r * (etheta - b), rtol=1e-15)
    e2, b2 = fields_from_waves(w, r)
    np.testing.assert_allclose(e2, etheta, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(b2, b, rtol=1e-13, atol=1e-15)


# ---------------------------------------------------------------------------
# Gauss law
# ---------------------------------------------------------------------------

def test_gauss_vacuum_decays_like_lambda_over_r():
    r = _nodes()
    er = gauss_radial_field(np.zeros_like(r), r, lam=2.0)
    np.testing.assert_allclose(er, 2.0 * r[0] / r, rtol=1e-13)
    assert er[0] == pytest.approx(2.0)
    # at R = 2 the enclosed-charge field has halved
    assert er[r.size // 2] == pytest.approx(1.0)


def test_gauss_constant_density_closed_form():
    r = _nodes(64)
    rho0 = 0.7
    er = gauss_radial_field(rho0 * np.ones_like(r), r, lam=0.25)
    exact = (0.25 * r[0] + 0.5 * rho0 * (r**2 - r[0] ** 2)) / r
    # the integrand y*rho is linear in y, so the trapezoid rule is exact
    np.testing.assert_allclose(er, exact, rtol=1e-13)


def test_gauss_zero_everything():
    r = _nodes()
    np.testing.assert_array_equal(gauss_radial_field(np.zeros_like(r), r, 0.0),
                                  np.zeros_like(r))


# ---------------------------------------------------------------------------
# Wave stepper
# ---------------------------------------------------------------------------

def test_step_waves_requires_unit_cfl():
    r = _nodes()
    w = WaveState(np.zeros(r.size), np.zeros(r.size), 0.0)
    zero = np.zeros_like(r)
    with pytest.raises(CflError, match="dt = dr"):
        step_waves(w, r, 0.5 * (r[1] - r[0]), zero, zero, zero, (0.0, 0.0))


def test_step_waves_zero_fixed_point():
    r = _nodes()
    dt = r[1] - r[0]
    zero = np.zeros_like(r)
    w = WaveState(np.zeros(r.size), np.zeros(r.size), 0.0)
    w2 = step_waves(w, r, dt, zero, zero, zero, (0.0, 0.0))
    np.testing.assert_array_equal(w2.pplus, 0.0)
    np.testing.assert_array_equal(w2.pminus, 0.0)
    assert w2.time == pytest.approx(dt)


def test_step_waves_sourceless_advection_is_exact_shift():
    # With the B feedback off and j = 0, the interior update is a pure
    # one-node displacement per step, bitwise.
    r = _nodes()
    dt = r[1] - r[0]
    zero = np.zeros_like(r)
    bump = np.zeros(r.size)
    bump[10:14] = (1.0, 2.0, 3.0, 1.5)
    w = WaveState(bump.copy(), np.zeros(r.size), 0.0)
    w2 = step_waves(w, r, dt, None, zero, zero, (0.0, 0.0), include_b_source=False)
    np.testing.assert_array_equal(w2.pplus[11:15], bump[10:14])
    np.testing.assert_array_equal(w2.pminus, np.zeros(r.size))
    # three more steps: displacement accumulates nodewise
    for _ in range(3):
        w2 = step_waves(w2, r, dt, None, zero, zero, (0.0, 0.0), include_b_source=False)
    np.testing.assert_array_equal(w2.pplus[14:18], bump[10:14])


def test_step_waves_reflection_closures():
    # A leftward pulse reaching the inner wall reappears in the rightward
    # family with the closure sign; the driven value adds 2 r1 eb1.
    r = _nodes(16)
    dt = r[1] - r[0]
    zero = np.zeros_like(r)
    pm = np.zeros(r.size)
    pm[1] = 4.0
    w = WaveState(np.zeros(r.size), pm, 0.0)
    w2 = step_waves(w, r, dt, None, zero, zero, (0.5, 0.0), include_b_source=False)
    assert w2.pminus[0] == pytest.approx(4.0)
    assert w2.pplus[0] == pytest.approx(-4.0 + 2.0 * r[0] * 0.5)


def test_step_waves_linearity(rng):
    r = _nodes()
    dt = r[1] - r[0]

    def random_inputs():
        w = WaveState(rng.normal(size=r.size), rng.normal(size=r.size), 0.0)
        b = rng.normal(size=r.size)
        j0 = rng.normal(size=r.size)
        j1 = rng.normal(size=r.size)
        eb = (float(rng.normal()), float(rng.normal()))
        return w, b, j0, j1, eb

    w1, b1, j01, j11, eb1 = random_inputs()
    w2, b2, j02, j12, eb2 = random_inputs()
    a, c = 0.7, -1.3

    combo = step_waves(
        WaveState(a * w1.pplus + c * w2.pplus, a * w1.pminus + c * w2.pminus, 0.0),
        r, dt, a * b1 + c * b2, a * j01 + c * j02, a * j11 + c * j12,
        (a * eb1[0] + c * eb2[0], a * eb1[1] + c * eb2[1]),
    )
    s1 = step_waves(w1, r, dt, b1, j01, j11, eb1)
    s2 = step_waves(w2, r, dt, b2, j02, j12, eb2)
    np.testing.assert_allclose(combo.pplus, a * s1.pplus + c * s2.pplus,
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(combo.pminus, a * s1.pminus + c * s2.pminus,
                               rtol=1e-12, atol=1e-12)


def test_step_waves_manufactured_solution_short():
    # Potential phi = A sin(k(r-r1)) cos(w t) generates an exact wave pair
    # with vanishing wall traces; a short coarse run stays within a small
    # absolute error (the resolution study lives in the acceptance suite).
    r1, r2, amp, omega = 1.0, 3.0, 0.25, 1.1
    k = math.pi / (r2 - r1)
    nr, steps = 64, 20
    r = uniform_radial_nodes(r1, r2, nr)
    dt = r[1] - r[0]

    def g(t):  # r * E_theta = d/dt phi
        return -amp * omega * np.sin(k * (r - r1)) * math.sin(omega * t)

    def h(t):  # r * B = -d/dr phi
        return -amp * k * np.cos(k * (r - r1)) * math.cos(omega * t)

    def jtheta(t):  # forcing chosen so S = B - r j_theta
        s = amp * (k * k - omega * omega) * np.sin(k * (r - r1)) * math.cos(omega * t)
        return (h(t) / r - s) / r

    w = WaveState(g(0.0) + h(0.0), g(0.0) - h(0.0), 0.0)
    for n in range(steps):
        t = n * dt
        b_old = (w.pplus - w.pminus) / (2.0 * r)
        w = step_waves(w, r, dt, b_old, jtheta(t), jtheta(t + dt), (0.0, 0.0))
    t_final = steps * dt
    err = max(
        float(np.max(np.abs(w.pplus - (g(t_final) + h(t_final))))),
        float(np.max(np.abs(w.pminus - (g(t_final) - h(t_final))))),
    )
    assert err <= 5e-4


# ---------------------------------------------------------------------------
# Ampere consistency
# ---------------------------------------------------------------------------

def test_ampere_consistency_exact_and_perturbed(rng):
    r = _nodes()
    dt = 0.01
    er_prev = rng.normal(size=r.size)
    j = rng.normal(size=r.size)
    er_next = er_prev - dt * j
    assert ampere_consistency(er_prev, er_next, j, dt) <= 1e-12
    bump = np.zeros_like(r)
    bump[7] = 0.25
    assert ampere_consistency(er_prev, er_next + dt * bump, j, dt) == pytest.approx(0.25)


# ---------------------------------------------------------------------------
# Boundary recursion
# ---------------------------------------------------------------------------

def test_recursion_vacuum_is_exactly_zero():
    r = _nodes(16)
    dt = r[1] - r[0]
    zero = np.zeros_like(r)
    w = WaveState(np.zeros(r.size), np.zeros(r.size), 0.0)
    h = WaveHistory(r, dt)
    for _ in range(9):
        h.append(w, zero, zero, (0.0, 0.0))
        w = step_waves(w, r, dt, zero, zero, zero, (0.0, 0.0))
    out = boundary_recursion_check(h, 8 * dt)
    assert out["reconstructed"] == 0.0
    assert out["solver"] == 0.0
    assert out["gap"] == 0.0


def test_recursion_time_grid_and_range_errors():
    r = _nodes(16)
    dt = r[1] - r[0]
    h = WaveHistory(r, dt)
    zero = np.zeros_like(r)
    w = WaveState(np.zeros(r.size), np.zeros(r.size), 0.0)
    for _ in range(4):
        h.append(w, zero, zero, (0.0, 0.0))
    with pytest.raises(HistoryError, match="not a stored step"):
        boundary_recursion_check(h, 0.5 * dt)
    with pytest.raises(HistoryError, match="outside stored history"):
        boundary_recursion_check(h, 10 * dt)


def test_recursion_matches_driven_solver_across_reflections():
    # Driven vacuum (no current): after more than two transits the unfolded
    # zig-zag reconstruction still agrees with the stepped solution.
    r = _nodes(32)
    dt = r[1] - r[0]
    zero = np.zeros_like(r)
    steps = int(round(4.5 / dt))

    def eb(t):
        s = math.sin(1.0 * t + 0.3)
        return (0.4 * s, 0.25 * s)

    w = WaveState(np.zeros(r.size), np.zeros(r.size), 0.0)
    h = WaveHistory(r, dt)
    b = zero.copy()
    for n in range(steps + 1):
        t = n * dt
        h.append(w, b, zero, eb(t))
        if n == steps:
            break
        w = step_waves(w, r, dt, b, zero, zero, eb(t + dt))
        b = (w.pplus - w.pminus) / (2.0 * r)

    out = boundary_recursion_check(h, steps * dt)
    assert abs(out["gap"]) <= 5e-2 * max(1.0, abs(out["solver"]))
    assert out["solver"] != 0.0
