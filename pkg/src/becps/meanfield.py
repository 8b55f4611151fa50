"""Stationary condensate solver and chemical-potential bookkeeping.

The condensate obeys the eigenvalue condition H psi0 = mu_e psi0 with the
mean-field single-particle operator

    H = -hbar^2 grad^2 / 2m + U(x) + g |psi0|^2,

and mu_e splits as mu_e = mu1 + mu2*N0 once the zero-mode coefficient
alpha is known (mu2 = alpha/N0 is what removes the condensate-phase
diffusion term from the quadratic Hamiltonian).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import SolverError
from .lattice import Lattice, to_modes, to_position


@dataclass(eq=False)
class SystemParams:
    """Physical inputs of the gas.

    g        -- contact interaction strength (energy * volume), g >= 0
    m        -- particle mass
    U        -- external potential: None (uniform), grid array, or callable
                of the position grids returning energy values
    hbar     -- reduced Planck constant (unit-system choice)
    N_target -- desired mean total particle number
    """

    g: float
    m: float
    U: object = None
    hbar: float = 1.0
    N_target: Optional[float] = None

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("attractive interactions (g < 0) are not "
                             "supported; this solver is repulsive-only")
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if self.N_target is not None and self.N_target <= 0:
            raise ValueError("N_target must be positive")


@dataclass(eq=False)
class CondensateSolution:
    """Converged stationary state; mu1/mu2/alpha are filled in later by
    the mode solver (they need the zero-mode coefficient)."""

    psi0_field: np.ndarray
    n0: np.ndarray
    N0: float
    mu_e: float
    residual: float
    iterations: int
    mu1: Optional[float] = None
    mu2: Optional[float] = None
    alpha: Optional[float] = None
    quad_coeff: Optional[float] = None   # alpha - mu2*N0, stored after nonlinear_mu2


def kinetic_energies(params: SystemParams, lat: Lattice):
    """Free-particle dispersion hbar^2 |k|^2 / 2m on the mode grid."""
    return (params.hbar ** 2 / (2.0 * params.m)) * lat.k2


def potential_grid(params: SystemParams, lat: Lattice):
    """External potential sampled on the lattice (zeros when absent)."""
    U = params.U
    if U is None:
        return np.zeros(lat.shape)
    if callable(U):
        U = U(*lat.position_grids())
    U = np.asarray(U, dtype=float)
    if U.shape != lat.shape:
        raise ValueError(f"potential shape {U.shape} does not match "
                         f"lattice shape {lat.shape}")
    if not np.all(np.isfinite(U)):
        raise ValueError("potential contains non-finite values")
    return U


def is_uniform_potential(params: SystemParams, lat: Lattice) -> bool:
    U = potential_grid(params, lat)
    return bool(np.all(U == U.flat[0]))


def apply_kinetic(psi, params: SystemParams, lat: Lattice):
    """Spectral application of -hbar^2 grad^2 / 2m."""
    return to_position(kinetic_energies(params, lat) * to_modes(psi, lat), lat)


def apply_hamiltonian(psi, params: SystemParams, lat: Lattice, density=None):
    """H psi with the mean-field term g*density (density defaults to |psi|^2)."""
    if density is None:
        density = np.abs(psi) ** 2
    U = potential_grid(params, lat)
    return apply_kinetic(psi, params, lat) + (U + params.g * density) * psi


def _field_norm(psi, lat: Lattice):
    return float(np.sqrt(np.sum(np.abs(psi) ** 2) * lat.dv))


def _residual(psi, mu, params, lat):
    """Relative eigen-residual ||(H - mu) psi|| / ||mu psi||.

    Falls back to a kinetic energy scale in the denominator when mu is
    tiny (free gas in a box has mu_e = 0).
    """
    r = apply_hamiltonian(psi, params, lat) - mu * psi
    scale = max(abs(mu), (params.hbar * 2 * np.pi) ** 2
                / (2 * params.m * max(lat.lengths) ** 2))
    return _field_norm(r, lat) / (scale * _field_norm(psi, lat))


def _dense_hamiltonian(params: SystemParams, lat: Lattice, density):
    """Dense matrix of K + U + g*density on the position grid."""
    M = lat.n_points
    basis = np.eye(M, dtype=complex).reshape((M,) + lat.shape)
    kin = apply_kinetic(basis, params, lat).reshape(M, M).T
    diag = (potential_grid(params, lat) + params.g * density).ravel()
    return kin + np.diag(diag)


def _frozen_ground_state(params: SystemParams, lat: Lattice, density, guess):
    """Lowest eigenvector of K + U + g*density (real, unnormalized).

    Matrix-free Lanczos with the FFT kinetic term; the deterministic
    start vector keeps repeated solves bit-identical.
    """
    M = lat.n_points
    if M <= 4:   # ARPACK needs room; these are trivial dense problems
        w, vecs = scipy.linalg.eigh(_dense_hamiltonian(params, lat, density))
        phi = vecs[:, 0]
        phi = np.real(phi * np.exp(-1j * np.angle(np.sum(phi))))
        return phi.reshape(lat.shape)
    diag = potential_grid(params, lat) + params.g * density

    def matvec(v):
        field = v.reshape(lat.shape)
        return (np.real(apply_kinetic(field, params, lat))
                + diag * field).ravel()

    v0 = np.real(guess).ravel()
    if not np.isfinite(v0).all() or not np.any(v0):
        v0 = np.ones(M)
    op = scipy.sparse.linalg.LinearOperator((M, M), matvec=matvec, dtype=float)
    _, vecs = scipy.sparse.linalg.eigsh(op, k=1, which="SA", v0=v0)
    return vecs[:, 0].reshape(lat.shape)


def solve_stationary(params: SystemParams, lat: Lattice, N0_guess: float,
                     tol: float = 1e-10, dt_imag: Optional[float] = None,
                     max_steps: int = 200_000) -> CondensateSolution:
    """Stationary condensate with norm held at N0_guess; mu_e is the
    Rayleigh quotient of the converged state.

    Imaginary-time relaxation takes the uniform start into the ground
    basin; a damped self-consistency polish (mix toward the lowest
    eigenvector of the density-frozen Hamiltonian) then removes the
    splitting bias.  Because the polish targets the lowest eigenvector
    explicitly, the solve cannot settle on an excited stationary point.
    """
    if N0_guess <= 0:
        raise SolverError("N0 must be positive (zero-norm condensate)")
    if tol <= 0:
        raise ValueError("tol must be positive")

    U = potential_grid(params, lat)
    Ek = kinetic_energies(params, lat)
    nbar = N0_guess / lat.volume

    # start from the uniform profile; for U=0 this is already exact
    psi = np.full(lat.shape, np.sqrt(nbar), dtype=complex)

    e_scale = float(np.max(Ek) + np.max(np.abs(U)) + params.g * nbar)
    if dt_imag is None:
        dt_imag = 0.5 * params.hbar / e_scale

    def renorm(p):
        return p * (np.sqrt(N0_guess) / _field_norm(p, lat))

    def rayleigh(p):
        return float(np.real(np.sum(np.conj(p) * apply_hamiltonian(p, params, lat))
                             * lat.dv) / N0_guess)

    # phase 1: imaginary-time relaxation at fixed step until the coarse
    # target or a stall; the polish below owns the last decades
    coarse = max(tol, 1e-6)
    check_every = 100
    best = np.inf
    since_best = 0
    steps = 0
    tau = dt_imag / params.hbar
    kin_half = np.exp(-0.5 * tau * Ek)
    res = np.inf
    while steps < max_steps:
        for _ in range(check_every):
            half = np.exp(-0.5 * tau * (U + params.g * np.abs(psi) ** 2))
            psi = half * psi
            psi = to_position(kin_half * to_modes(psi, lat), lat)
            psi = half * psi
            psi = renorm(psi)
        steps += check_every
        mu = rayleigh(psi)
        res = _residual(psi, mu, params, lat)
        if res <= coarse:
            break
        if res < 0.9 * best:
            best = res
            since_best = 0
            continue
        since_best += 1
        if since_best >= 3:
            break   # splitting floor or slow transient: polish takes over

    # phase 2: damped self-consistency on the density-frozen operator,
    # with a backtracking mix so a step is only taken when it lowers
    # the residual (strong coupling overshoots at full weight)
    if res > tol:
        mix = 0.5
        for _ in range(600):
            phi = renorm(_frozen_ground_state(params, lat,
                                              np.abs(psi) ** 2, psi))
            if float(np.real(np.sum(np.conj(psi) * phi))) < 0:
                phi = -phi
            accepted = False
            while mix >= 1e-3:
                cand = renorm((1.0 - mix) * psi + mix * phi)
                res_c = _residual(cand, rayleigh(cand), params, lat)
                if res_c < res:
                    psi, res = cand, res_c
                    accepted = True
                    break
                mix *= 0.5
            steps += 1
            if res <= tol:
                break
            if not accepted:
                raise SolverError(f"stationary solve stagnated at residual "
                                  f"{res:.3e} (tol {tol:g})")
            mix = min(0.5, 2.0 * mix)
        else:
            raise SolverError(f"stationary solve did not reach tol={tol:g} "
                              f"(residual {res:.3e} after polish)")

    # fix the global phase: real and positive
    phase = np.angle(np.sum(psi))
    psi = psi * np.exp(-1j * phase)
    if float(np.real(np.sum(psi))) < 0:
        psi = -psi
    mu = rayleigh(psi)
    res = _residual(psi, mu, params, lat)

    n0 = np.abs(psi) ** 2
    return CondensateSolution(psi0_field=psi, n0=n0,
                              N0=float(np.sum(n0) * lat.dv),
                              mu_e=mu, residual=res, iterations=steps)


def uniform_condensate(params: SystemParams, lat: Lattice,
                       N0: float) -> CondensateSolution:
    """Exact stationary state of the uniform gas: psi0 = sqrt(N0/V),
    mu_e = g n0.  Only valid without an external potential."""
    if not is_uniform_potential(params, lat):
        raise ValueError("uniform_condensate requires a flat potential")
    if N0 <= 0:
        raise SolverError("N0 must be positive (zero-norm condensate)")
    nbar = N0 / lat.volume
    psi = np.full(lat.shape, np.sqrt(nbar), dtype=complex)
    return CondensateSolution(psi0_field=psi, n0=np.abs(psi) ** 2, N0=float(N0),
                              mu_e=params.g * nbar, residual=0.0, iterations=0)


def solve_number_balance(params: SystemParams, lat: Lattice, T: float,
                         tol: float = 1e-8, max_iter: int = 500
                         ) -> CondensateSolution:
    """Split N_target between condensate and excitations self-consistently.

    Iterates condensate solve -> Bogoliubov modes -> thermal occupations
    -> depletion sum, mixing the new N0 50/50 with the old to damp the
    fixed point, until

        N_target = N0 + sum_k integral[|u_k|^2 n_k + |v_k|^2 (n_k + 1)]

    holds to tol*N_target.
    """
    from . import bogoliubov  # deferred: bogoliubov imports this module
    from . import thermal

    if T < 0:
        raise ValueError("temperature must be >= 0")
    if params.N_target is None:
        raise ValueError("params.N_target is required for number balance")
    N_target = params.N_target
    uniform = is_uniform_potential(params, lat)

    def depletion_for(n0_val):
        sol = solve_stationary(params, lat, n0_val, tol=min(tol, 1e-10))
        if uniform:
            modes = bogoliubov.homogeneous_modes(params, lat, n0_val / lat.volume)
        else:
            modes = bogoliubov.solve_bdg(params, lat, sol,
                                         n_modes=lat.n_points - 1, tol=1e-8)
        occ = thermal.occupations(modes, T)
        dep = float(np.sum(modes.u_norm2 * occ + modes.v_norm2 * (occ + 1.0)))
        return sol, modes, dep

    N0 = N_target
    for _ in range(max_iter):
        sol, modes, dep = depletion_for(N0)
        if N_target - dep <= 0:
            raise SolverError(
                f"no condensate solution: depletion {dep:.4g} exceeds "
                f"N_target {N_target:.4g} at T={T:g}")
        mismatch = abs(N_target - (N0 + dep))
        if mismatch <= tol * N_target:
            return sol
        N0 = 0.5 * N0 + 0.5 * (N_target - dep)
    raise SolverError(f"number balance did not converge in {max_iter} "
                      f"iterations (last mismatch {mismatch:.3e})")
