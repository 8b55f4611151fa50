"""Mode sets: closed forms, the dense BdG solve, and the zero-mode pair."""

import numpy as np
import pytest

from becps.bogoliubov import (homogeneous_modes, nonlinear_mu2, solve_bdg,
                              solve_zero_mode)
from becps.lattice import build_lattice, mode_amplitudes_flat
from becps.meanfield import (SystemParams, apply_kinetic, potential_grid,
                             solve_stationary, uniform_condensate)


def unit_ring():
    # L = 2*pi with m = 1/2 puts E_k exactly at k^2
    return build_lattice((4,), (2.0 * np.pi,))


def test_scalar_coefficients_frozen():
    lat = unit_ring()
    ms = homogeneous_modes(SystemParams(g=1.0, m=0.5), lat, n0_uniform=1.0)
    by_k = {int(k): i for i, k in enumerate(ms.k_flat)}
    i1, i2 = by_k[1], by_k[2]
    assert ms.energies[i1] == pytest.approx(1.7320508075688772, abs=1e-15)
    assert ms.u_scalars[i1] == pytest.approx(1.0379548493020425, abs=1e-15)
    assert ms.v_scalars[i1] == pytest.approx(0.2781191636504499, abs=1e-15)
    # Nyquist mode, E = 4
    assert ms.energies[i2] == pytest.approx(4.898979485566356, abs=1e-14)
    assert ms.u_scalars[i2] == pytest.approx(1.0051419616550832, abs=1e-15)
    assert ms.v_scalars[i2] == pytest.approx(0.10153995804523834, abs=1e-15)


def test_identities_parameter_sweep():
    rng = np.random.default_rng(20)
    for _ in range(12):
        dims = int(rng.integers(4, 33))
        L = float(rng.uniform(2.0, 40.0))
        g = float(rng.uniform(0.01, 3.0))
        n0 = float(rng.uniform(0.1, 50.0))
        m = float(rng.uniform(0.3, 4.0))
        lat = build_lattice((dims,), (L,))
        params = SystemParams(g=g, m=m)
        ms = homogeneous_modes(params, lat, n0)
        Ek = (params.hbar * lat.kvecs[ms.k_flat, 0]) ** 2 / (2 * m)
        gn0 = g * n0
        u, v, eps = ms.u_scalars, ms.v_scalars, ms.energies
        assert np.all(np.abs(u ** 2 - v ** 2 - 1.0) < 1e-12)
        assert np.all(np.abs(u ** 2 + v ** 2 - (Ek + gn0) / eps) < 1e-12)
        assert np.all(np.abs(2 * u * v - gn0 / eps) < 1e-12)
        assert np.allclose(eps, np.sqrt(Ek * (Ek + 2 * gn0)), rtol=1e-12)
        # independent route through the squeezing parameter
        r = 0.5 * np.arcsinh(gn0 / eps)
        assert np.all(np.abs(u - np.cosh(r)) < 1e-12 * np.cosh(r))
        assert np.all(np.abs(v - np.sinh(r)) < 1e-12 * np.cosh(r))


def test_homogeneous_zero_mode_exact():
    lat = build_lattice((16,), (8.0,))
    g, n0 = 0.37, 4.2
    params = SystemParams(g=g, m=1.0)
    ms = homogeneous_modes(params, lat, n0)
    flat = 1.0 / np.sqrt(lat.volume)
    assert np.all(ms.psi0_mode == flat)
    assert np.all(ms.Phi0 == flat)
    assert ms.alpha == g * n0
    assert ms.mu2_closed == g / lat.volume

    sol = uniform_condensate(params, lat, N0=n0 * lat.volume)
    mu2 = nonlinear_mu2(ms, sol)
    assert mu2 == g / lat.volume
    assert sol.N0 * (g / lat.volume - mu2) == 0.0
    assert abs(sol.mu1) <= 1e-13 * sol.mu_e
    assert sol.mu_e == sol.mu1 + mu2 * sol.N0


def test_projection_matrix_layout():
    lat = build_lattice((8,), (5.0,))
    ms = homogeneous_modes(SystemParams(g=0.5, m=1.0), lat, 2.0)
    u_proj, v_proj = ms.projections()
    assert u_proj.shape == (8, 1 + ms.n_modes)
    assert v_proj.shape == u_proj.shape
    # zero-mode column: u0 = psi0 (Phi0 == psi0), v0 = 0
    col0 = np.zeros(8, dtype=complex)
    col0[0] = 1.0
    assert np.allclose(u_proj[:, 0], col0, atol=1e-13)
    assert np.allclose(v_proj[:, 0], 0.0, atol=1e-13)
    for i in range(ms.n_modes):
        k = ms.k_flat[i]
        cu = u_proj[:, 1 + i].copy()
        cv = v_proj[:, 1 + i].copy()
        assert cu[k] == ms.u_scalars[i]
        assert cv[lat.neg_index[k]] == ms.v_scalars[i]
        cu[k] = 0.0
        cv[lat.neg_index[k]] = 0.0
        assert np.all(cu == 0.0) and np.all(cv == 0.0)


def bdg_pair_residual(params, lat, condensate, eps, u, v):
    """Residual of the defining pair of equations, spectral kinetic part."""
    U = potential_grid(params, lat)
    gn0 = params.g * condensate.n0
    he = lambda f: (apply_kinetic(f, params, lat)
                    + (U + 2 * gn0 - condensate.mu_e) * f)
    r1 = he(u) - gn0 * v - eps * u
    r2 = gn0 * u - he(v) - eps * v
    nrm = lambda f: np.sqrt(np.sum(np.abs(f) ** 2) * lat.dv)
    return max(nrm(r1), nrm(r2)) / max(eps, 1.0)


def test_bdg_recovers_closed_forms():
    lat = build_lattice((16,), (10.0,))
    params = SystemParams(g=0.8, m=1.0)
    n0 = 3.0
    sol = uniform_condensate(params, lat, N0=n0 * lat.volume)
    ref = homogeneous_modes(params, lat, n0)
    ms = solve_bdg(params, lat, sol, n_modes=lat.n_points - 1)

    assert np.allclose(np.sort(ms.energies), np.sort(ref.energies), rtol=1e-8)
    for i in range(ms.n_modes):
        assert bdg_pair_residual(params, lat, sol, ms.energies[i],
                                 ms.u_fields[i], ms.v_fields[i]) < 1e-8
        n = (np.sum(np.abs(ms.u_fields[i]) ** 2)
             - np.sum(np.abs(ms.v_fields[i]) ** 2)) * lat.dv
        assert abs(n - 1.0) < 1e-10

    # each closed-form mode must be complete in its degenerate cluster,
    # measured with the indefinite product int(u* u' - v* v') dx
    uf = np.array([ref.u_field(i).ravel() for i in range(ref.n_modes)])
    vf = np.array([ref.v_field(i).ravel() for i in range(ref.n_modes)])
    su = ms.u_fields.reshape(ms.n_modes, -1)
    sv = ms.v_fields.reshape(ms.n_modes, -1)
    for i in range(ref.n_modes):
        cluster = np.flatnonzero(
            np.abs(ms.energies - ref.energies[i]) <= 1e-6 * ref.energies[i])
        assert cluster.size > 0
        c = np.array([(np.vdot(su[j], uf[i]) - np.vdot(sv[j], vf[i])) * lat.dv
                      for j in cluster])
        assert abs(np.sum(np.abs(c) ** 2) - 1.0) < 1e-6

    # zero mode through the general path stays the uniform pair
    assert np.allclose(ms.psi0_mode, 1.0 / np.sqrt(lat.volume), atol=1e-10)
    assert np.allclose(ms.Phi0, ms.psi0_mode, atol=1e-8)
    assert ms.alpha == pytest.approx(params.g * n0, rel=1e-8)


def test_zero_mode_trapped():
    lat = build_lattice((32,), (16.0,))
    omega = 0.6
    x = lat.position_grids()[0]
    params = SystemParams(g=0.4, m=1.0, U=0.5 * omega ** 2 * (x - 8.0) ** 2)
    sol = solve_stationary(params, lat, N0_guess=20.0, tol=1e-12)
    psi0, Phi0, alpha = solve_zero_mode(params, lat, sol)

    norm = np.real(np.sum(psi0 * np.conj(Phi0)
                          + np.conj(psi0) * Phi0)) * lat.dv
    assert norm == pytest.approx(2.0, abs=1e-10)
    assert alpha > 0

    # defining equation (He + g n0) Phi0 = 2 alpha psi0
    U = potential_grid(params, lat)
    lhs = (apply_kinetic(Phi0, params, lat)
           + (U + 3 * params.g * sol.n0 - sol.mu_e) * Phi0)
    resid = np.sqrt(np.sum(np.abs(lhs - 2 * alpha * psi0) ** 2) * lat.dv)
    assert resid < 1e-8 * max(alpha, 1.0)

    class _MS:  # minimal duck for the mu2 split
        mu2_closed = None

    ms = _MS()
    ms.alpha = alpha
    mu2 = nonlinear_mu2(ms, sol)
    assert abs(alpha / sol.N0 - mu2) == 0.0
    assert sol.mu_e == sol.mu1 + mu2 * sol.N0


def test_zero_mode_free_gas():
    lat = build_lattice((8,), (4.0,))
    params = SystemParams(g=0.0, m=1.0)
    sol = uniform_condensate(params, lat, N0=6.0)
    psi0, Phi0, alpha = solve_zero_mode(params, lat, sol)
    assert alpha == 0.0
    assert np.array_equal(psi0, Phi0)
    assert Phi0 is not psi0


def test_bdg_mode_count_bounds():
    lat = build_lattice((8,), (4.0,))
    params = SystemParams(g=0.2, m=1.0)
    sol = uniform_condensate(params, lat, N0=8.0)
    with pytest.raises(ValueError):
        solve_bdg(params, lat, sol, n_modes=0)
    with pytest.raises(ValueError):
        solve_bdg(params, lat, sol, n_modes=lat.n_points)
