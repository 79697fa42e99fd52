"""Solver tests: exact linear propagation, conservation, convergence order,
reversibility, and consistency between the direct and gauged flows."""

import numpy as np
import pytest

from bolab.dynamics import (
    Trajectory,
    evolve_bo,
    evolve_gauged,
    linear_propagator,
    weighted_norm_diagnostic,
)
from bolab.gauge import gauge_forward
from bolab.spectral import (
    SpectralField,
    make_grid,
    sobolev_norm,
    to_physical,
    to_spectral,
)


def random_real_field(grid, rng, decay=2.0, kmax=None):
    n = grid.n
    c = np.zeros(n, dtype=np.complex128)
    kmax = kmax or n // 2 - 1
    for k in range(1, kmax + 1):
        val = (rng.standard_normal() + 1j * rng.standard_normal()) / (1 + k) ** decay
        c[k + n // 2] = val
        c[-k + n // 2] = np.conj(val)
    return SpectralField(grid, c)


def reflect(field):
    """x -> -x in physical space: u_hat(xi) -> u_hat(-xi)."""
    c = np.zeros_like(field.coeffs)
    c[1:] = field.coeffs[1:][::-1]
    return SpectralField(field.grid, c, _checked=True)


# -- linear propagator --------------------------------------------------------

def test_propagator_single_mode_hand_value():
    # omega(1) = 1, so e^{ix} evolves to e^{i(x - t)}
    g = make_grid(32, np.pi)
    u = to_spectral(np.exp(1j * g.x), g)
    t = 0.7
    moved = linear_propagator(u, t)
    assert np.allclose(to_physical(moved), np.exp(1j * (g.x - t)), atol=1e-13)


def test_propagator_group_law_and_isometry():
    g = make_grid(64, 2 * np.pi)
    rng = np.random.default_rng(1)
    u = random_real_field(g, rng)
    a = linear_propagator(linear_propagator(u, 0.3), 1.1)
    b = linear_propagator(u, 1.4)
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-12
    for s in (0.0, 0.5, 1.5):
        assert abs(sobolev_norm(linear_propagator(u, 2.2), s) - sobolev_norm(u, s)) < 1e-12


def test_solver_is_exact_on_linear_scale():
    # at tiny amplitude the nonlinearity is negligible and IF-RK4 reproduces
    # the propagator to rounding
    g = make_grid(128, 4 * np.pi)
    rng = np.random.default_rng(2)
    u0 = 1e-10 * random_real_field(g, rng)
    traj = evolve_bo(u0, T=1.0, dt=0.05)
    exact = linear_propagator(u0, 1.0)
    rel = sobolev_norm(traj.final - exact, 0) / sobolev_norm(u0, 0)
    assert rel < 1e-9


# -- direct flow --------------------------------------------------------------

def test_bo_conservation_reality_zero_mode():
    g = make_grid(256, 8 * np.pi)
    rng = np.random.default_rng(3)
    u0 = 0.5 * random_real_field(g, rng, kmax=40)
    traj = evolve_bo(u0, T=0.5, dt=1e-3)
    final = traj.final
    # L2 is conserved by the flow; the scheme drift is O(dt^4)
    drift = abs(sobolev_norm(final, 0) - sobolev_norm(u0, 0)) / sobolev_norm(u0, 0)
    assert drift <= 1e-9
    # reality is preserved to rounding accumulation
    assert final.reality_residual() <= 1e-11
    # the zero mode never moves at all
    assert np.all(traj.data[:, g.n // 2] == 0.0)


def test_bo_convergence_order():
    # needs data strong enough that the O(dt^4) error sits above rounding
    g = make_grid(128, 4 * np.pi)
    rng = np.random.default_rng(4)
    u0 = 3.0 * random_real_field(g, rng, decay=1.2, kmax=30)
    T = 0.5
    ref = evolve_bo(u0, T, dt=5e-4, snapshot_every=10**9).final
    dts = [1.6e-2, 8e-3, 4e-3]
    errs = [
        sobolev_norm(evolve_bo(u0, T, dt=dt, snapshot_every=10**9).final - ref, 0)
        for dt in dts
    ]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    print(f"dt-convergence slope: {slope:.3f}")
    assert 3.7 <= slope <= 4.3


def test_bo_reversibility_under_reflection():
    # u(x,t) -> u(-x,-t) is a symmetry of the flow, so evolving the reflected
    # final state recovers the initial data up to scheme error
    g = make_grid(128, 4 * np.pi)
    rng = np.random.default_rng(5)
    u0 = 0.4 * random_real_field(g, rng, kmax=10)
    T, dt = 0.25, 1e-3
    fwd = evolve_bo(u0, T, dt, snapshot_every=10**9)
    back = evolve_bo(reflect(fwd.final), T, dt, snapshot_every=10**9)
    rel = sobolev_norm(reflect(back.final) - u0, 0) / sobolev_norm(u0, 0)
    assert rel <= 1e-8


def test_snapshot_cadence():
    g = make_grid(64, np.pi)
    rng = np.random.default_rng(6)
    u0 = 0.1 * random_real_field(g, rng)
    traj = evolve_bo(u0, T=0.02, dt=1e-3, snapshot_every=7)
    assert len(traj) == 4  # t=0, steps 7 and 14, and the final step 20
    assert traj.times[-1] == pytest.approx(0.02)


def test_unstable_dt_is_rejected_with_bound():
    g = make_grid(256, 4 * np.pi)
    rng = np.random.default_rng(7)
    u0 = random_real_field(g, rng, decay=1.0)
    with pytest.raises(ValueError, match="stability bound"):
        evolve_bo(u0, T=100.0, dt=50.0)


def test_nan_abort_names_step():
    g = make_grid(256, 4 * np.pi)
    rng = np.random.default_rng(8)
    u0 = random_real_field(g, rng, decay=1.0)
    with pytest.raises(RuntimeError, match="step"):
        evolve_bo(u0, T=100.0, dt=1.0, stability_probe=False)


# -- gauged flow --------------------------------------------------------------

def test_gauged_matches_gauge_of_direct_flow():
    # evolve u directly and V through the gauged equation; the gauge of the
    # evolved u must match the evolved V
    g = make_grid(256, 8 * np.pi)
    u0 = to_spectral(0.4 * -g.x * np.exp(-g.x**2 / 2.0), g)
    T, dt = 0.25, 1e-3
    traj_u = evolve_bo(u0, T, dt, snapshot_every=10**9)
    traj_v = evolve_gauged(gauge_forward(u0), T, dt, snapshot_every=10**9)
    V_of_u = gauge_forward(traj_u.final).V
    err = sobolev_norm(traj_v.final - V_of_u, 1.5)
    print(f"gauged-vs-direct H^1.5 error: {err:.3e}")
    assert err <= 1e-8


def test_gauged_terms_mode_runs():
    g = make_grid(64, np.pi)
    rng = np.random.default_rng(9)
    u0 = 0.2 * random_real_field(g, rng, kmax=20)
    traj = evolve_gauged(gauge_forward(u0), T=0.05, dt=1e-3, rhs_mode="terms")
    assert np.all(np.isfinite(traj.data))
    assert traj.metadata["rhs"] == "terms"


def test_gauged_margin_guard():
    g = make_grid(32, np.pi)
    c = np.zeros(g.n, dtype=complex)
    c[g.n // 2] = -0.95 * 2 * g.half_length  # V == -0.95, margin 0.05
    V0 = SpectralField(g, c)
    with pytest.raises(ValueError, match="not invertible"):
        evolve_gauged(V0, T=0.01, dt=1e-3)


def test_bad_rhs_mode():
    g = make_grid(32, np.pi)
    V0 = SpectralField(g, np.zeros(g.n, dtype=complex))
    with pytest.raises(ValueError, match="rhs_mode"):
        evolve_gauged(V0, T=0.01, dt=1e-3, rhs_mode="bogus")


# -- trajectory container -----------------------------------------------------

def test_trajectory_save_load_round_trip(tmp_path):
    g = make_grid(64, 2 * np.pi)
    rng = np.random.default_rng(10)
    u0 = 0.3 * random_real_field(g, rng)
    traj = evolve_bo(u0, T=0.01, dt=1e-3, snapshot_every=2)
    d = tmp_path / "traj"
    traj.save(d)
    back = Trajectory.load(d)
    assert back.tag == traj.tag
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.data, traj.data)
    assert back.metadata["scheme"] == "ifrk4"


# -- weighted norm diagnostic -------------------------------------------------

def test_weighted_diagnostic_constant_along_linear_flow():
    g = make_grid(256, 8 * np.pi)
    rng = np.random.default_rng(11)
    u0 = random_real_field(g, rng)
    base = weighted_norm_diagnostic(u0, 0.0)
    for t in (0.3, 1.0, 2.5):
        val = weighted_norm_diagnostic(linear_propagator(u0, t), t)
        assert abs(val - base) <= 1e-12 * max(base, 1.0)


def test_weighted_diagnostic_against_smooth_oracle():
    # u_hat = exp(-(xi-2)^2): d/dxi u_hat = -2 (xi-2) u_hat, so the norm is
    # computable analytically up to O(dxi^2) differencing error
    g = make_grid(512, 16 * np.pi)
    prof = np.exp(-((g.xi - 2.0) ** 2))
    prof[0] = 0.0
    u = SpectralField(g, prof.astype(complex))
    expected = np.sqrt(np.sum(np.abs(-2 * (g.xi - 2) * prof) ** 2) * g.dxi / (2 * np.pi))
    got = weighted_norm_diagnostic(u, 0.0)
    assert abs(got - expected) <= 0.02 * expected
