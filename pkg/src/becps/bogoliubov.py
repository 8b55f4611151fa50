"""Quasiparticle mode sets: closed forms, BdG eigenproblem, zero mode.

For the uniform gas every k != 0 mode is a plane wave exp(ikx)/sqrt(V)
carrying scalar coefficients

    E_k = hbar^2 |k|^2 / 2m
    eps_k = sqrt(E_k (E_k + 2 g n0))
    u_k = (eps_k + E_k) / (2 sqrt(eps_k E_k)),  v_k = u_k - sqrt(E_k/eps_k)

with u^2 - v^2 = 1.  The k = 0 (condensate) direction is not a Bogoliubov
mode: it is described by the conjugate pair (psi0, Phi0) and the energy
coefficient alpha, which fixes the nonlinear chemical potential
mu2 = alpha/N0 that removes the condensate phase-diffusion term.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import SolverError
from .lattice import Lattice, to_modes, to_position, mode_amplitudes_flat
from .meanfield import (CondensateSolution, SystemParams, apply_kinetic,
                        kinetic_energies, potential_grid)


@dataclass(eq=False)
class ModeSet:
    """Divergence-free mode basis over one lattice.

    Solved k != 0 modes live in flat arrays ordered by `k_flat` (their
    dominant plane-wave index).  For homogeneous sets u/v are real
    scalars; general sets store full grid fields.  The zero mode is the
    pair (psi0_mode, Phi0) with coefficient alpha.
    """

    lat: Lattice
    k_flat: np.ndarray               # (n_modes,) flat lattice mode index
    energies: np.ndarray             # (n_modes,) quasiparticle energies
    homogeneous: bool
    psi0_mode: np.ndarray            # condensate mode function, unit norm
    Phi0: np.ndarray
    alpha: float
    u_scalars: Optional[np.ndarray] = None   # homogeneous only
    v_scalars: Optional[np.ndarray] = None
    u_fields: Optional[np.ndarray] = None    # (n_modes, *grid), general only
    v_fields: Optional[np.ndarray] = None
    mu2_closed: Optional[float] = None       # cancellation-free mu2 if known
    _proj: tuple = field(default=None, init=False, repr=False)

    @property
    def n_modes(self) -> int:
        return len(self.energies)

    def u_field(self, i):
        if self.u_fields is not None:
            return self.u_fields[i]
        pw = self._plane_wave(self.k_flat[i])
        return self.u_scalars[i] * pw

    def v_field(self, i):
        if self.v_fields is not None:
            return self.v_fields[i]
        pw = self._plane_wave(self.k_flat[i])
        return self.v_scalars[i] * pw

    def _plane_wave(self, flat_index):
        amps = np.zeros(self.lat.n_points, dtype=complex)
        amps[flat_index] = 1.0
        return to_position(amps.reshape(self.lat.shape), self.lat)

    @property
    def u_norm2(self):
        """Per-mode integral |u_k|^2 dx."""
        if self.u_fields is not None:
            return np.sum(np.abs(self.u_fields) ** 2,
                          axis=tuple(range(1, self.u_fields.ndim))) * self.lat.dv
        return self.u_scalars ** 2

    @property
    def v_norm2(self):
        if self.v_fields is not None:
            return np.sum(np.abs(self.v_fields) ** 2,
                          axis=tuple(range(1, self.v_fields.ndim))) * self.lat.dv
        return self.v_scalars ** 2

    @property
    def u0_field(self):
        return 0.5 * (self.psi0_mode + self.Phi0)

    @property
    def v0_field(self):
        return 0.5 * (self.psi0_mode - self.Phi0)

    @property
    def modes(self):
        """Spec-level view: list of (k-index, energy, u field, v field)."""
        return [(int(self.k_flat[i]), float(self.energies[i]),
                 self.u_field(i), self.v_field(i))
                for i in range(self.n_modes)]

    def projections(self):
        """Overlap matrices onto the free plane-wave basis.

        Returns (u_proj, v_proj), each of shape (M, 1 + n_modes) with M
        lattice modes as rows; column 0 is the zero mode, column 1+i the
        solved mode i:

            u_proj[k, q] = integral dx conj(plane_k) u_q(x)
            v_proj[k, q] = integral dx plane_k v_q(x)
        """
        if self._proj is not None:
            return self._proj
        lat = self.lat
        M = lat.n_points
        Q = 1 + self.n_modes
        u_proj = np.zeros((M, Q), dtype=complex)
        v_proj = np.zeros((M, Q), dtype=complex)
        u_proj[:, 0] = mode_amplitudes_flat(self.u0_field, lat)
        v_proj[:, 0] = mode_amplitudes_flat(self.v0_field, lat)[lat.neg_index]
        if self.homogeneous:
            # plane-wave deltas: u couples k=q, v couples k=-q
            rows = self.k_flat
            cols = np.arange(1, Q)
            u_proj[rows, cols] = self.u_scalars
            v_proj[lat.neg_index[rows], cols] = self.v_scalars
        else:
            u_amp = mode_amplitudes_flat(self.u_fields, lat)      # (n_modes, M)
            v_amp = mode_amplitudes_flat(self.v_fields, lat)
            u_proj[:, 1:] = u_amp.T
            v_proj[:, 1:] = v_amp.T[lat.neg_index]
        self._proj = (u_proj, v_proj)
        return self._proj


def homogeneous_modes(params: SystemParams, lat: Lattice,
                      n0_uniform: float) -> ModeSet:
    """Closed-form mode set for the uniform gas at density n0."""
    if n0_uniform <= 0:
        raise ValueError("uniform density must be positive")
    gn0 = params.g * n0_uniform
    k_flat = np.flatnonzero(np.arange(lat.n_points) != 0)
    Ek = kinetic_energies(params, lat).ravel()[k_flat]
    eps = np.sqrt(Ek * (Ek + 2.0 * gn0))
    root = 2.0 * np.sqrt(eps * Ek)
    u = (eps + Ek) / root
    v = (eps - Ek) / root

    psi0 = np.full(lat.shape, 1.0 / np.sqrt(lat.volume), dtype=complex)
    return ModeSet(lat=lat, k_flat=k_flat, energies=eps, homogeneous=True,
                   psi0_mode=psi0, Phi0=psi0.copy(), alpha=gn0,
                   u_scalars=u, v_scalars=v,
                   mu2_closed=params.g / lat.volume)


def _position_operator_matrix(params: SystemParams, lat: Lattice, diag):
    """Dense matrix of (kinetic + diag(x)) in the position basis, with the
    kinetic part applied spectrally (no stencil dispersion error)."""
    M = lat.n_points
    eye = np.eye(M, dtype=complex).reshape((M,) + lat.shape)
    cols = apply_kinetic(eye, params, lat).reshape(M, M).T
    cols[np.diag_indices(M)] += np.asarray(diag, dtype=complex).ravel()
    return cols


def solve_bdg(params: SystemParams, lat: Lattice,
              condensate: CondensateSolution, n_modes: int,
              tol: float = 1e-8) -> ModeSet:
    """Dense Bogoliubov-de-Gennes solve about a converged condensate.

    Builds the block operator [[He, -g n0], [g n0, -He]] with
    He = H + g n0 - mu_e in the position basis, keeps the positive-energy
    positive-norm branch, renormalizes each pair to
    integral(|u|^2 - |v|^2) = 1, and replaces the numerically-zero pair
    with the explicit zero mode.
    """
    M = lat.n_points
    if not 1 <= n_modes <= M - 1:
        raise ValueError(f"n_modes must lie in [1, {M - 1}]")
    U = potential_grid(params, lat)
    gn0 = params.g * condensate.n0
    He = _position_operator_matrix(params, lat,
                                   U + 2.0 * gn0 - condensate.mu_e)
    G = np.diag(gn0.ravel().astype(complex))
    B = np.block([[He, -G], [G, -He]])

    try:
        w, vecs = scipy.linalg.eig(B)
    except Exception as exc:  # pragma: no cover - propagated as solver failure
        raise SolverError(f"BdG eigensolver failed: {exc}") from exc

    e_scale = float(np.max(np.abs(w.real))) or 1.0
    keep = []
    for i in range(2 * M):
        eps = w[i]
        if eps.real <= tol * e_scale:
            continue
        if abs(eps.imag) > tol * e_scale:
            raise SolverError(
                f"complex quasiparticle energy {eps:.3e}: configuration "
                "outside the repulsive low-temperature regime")
        u = vecs[:M, i]
        v = vecs[M:, i]
        norm = (np.vdot(u, u).real - np.vdot(v, v).real) * lat.dv
        if norm <= 1e-6 * (np.vdot(u, u).real + np.vdot(v, v).real) * lat.dv:
            continue  # negative-norm partner or the Goldstone pair
        keep.append((eps.real, u / np.sqrt(norm), v / np.sqrt(norm)))

    keep.sort(key=lambda t: t[0])
    if len(keep) < n_modes:
        raise SolverError(f"BdG produced {len(keep)} usable modes, "
                          f"requested {n_modes}")
    keep = keep[:n_modes]

    energies = np.array([t[0] for t in keep])
    u_fields = np.array([t[1] for t in keep]).reshape((n_modes,) + lat.shape)
    v_fields = np.array([t[2] for t in keep]).reshape((n_modes,) + lat.shape)
    u_fields, v_fields = _reorthogonalize_degenerate(
        energies, u_fields, v_fields, lat, tol)

    # label each mode by its dominant plane-wave component (reporting only)
    k_flat = np.array([int(np.argmax(np.abs(mode_amplitudes_flat(u_fields[i], lat))))
                       for i in range(n_modes)])

    psi0, Phi0, alpha = solve_zero_mode(params, lat, condensate, tol)
    return ModeSet(lat=lat, k_flat=k_flat, energies=energies,
                   homogeneous=False, psi0_mode=psi0, Phi0=Phi0, alpha=alpha,
                   u_fields=u_fields, v_fields=v_fields)


def _reorthogonalize_degenerate(energies, u_fields, v_fields, lat, tol):
    """Gram-Schmidt within degenerate energy clusters using the indefinite
    product integral(u* u' - v* v')."""
    n = len(energies)
    shape = u_fields.shape[1:]
    u = u_fields.reshape(n, -1)
    v = v_fields.reshape(n, -1)

    def bprod(i, j):
        return (np.vdot(u[i], u[j]) - np.vdot(v[i], v[j])) * lat.dv

    i = 0
    e_scale = max(energies[-1], 1.0) if n else 1.0
    while i < n:
        j = i + 1
        while j < n and abs(energies[j] - energies[i]) <= 1e-8 * e_scale:
            j += 1
        for a in range(i, j):
            for b in range(i, a):
                c = bprod(b, a)
                u[a] -= c * u[b]
                v[a] -= c * v[b]
            norm = bprod(a, a).real
            if norm <= 0:
                raise SolverError("degenerate BdG cluster lost positive norm")
            u[a] /= np.sqrt(norm)
            v[a] /= np.sqrt(norm)
        i = j
    return u.reshape((n,) + shape), v.reshape((n,) + shape)


def solve_zero_mode(params: SystemParams, lat: Lattice,
                    condensate: CondensateSolution, tol: float = 1e-8):
    """Conjugate zero-mode pair (psi0, Phi0) and energy coefficient alpha.

    psi0 is the unit-normalized condensate mode; Phi0 solves
    (He + g n0) Phi0 = 2 alpha psi0 with alpha fixed by the normalization
    integral[psi0 Phi0* + psi0* Phi0] dx = 2.
    """
    psi0 = condensate.psi0_field / np.sqrt(condensate.N0)

    # verify psi0 really is a null vector of He - g n0 = H - mu_e
    U = potential_grid(params, lat)
    gn0 = params.g * condensate.n0
    Hpsi = (apply_kinetic(psi0, params, lat)
            + (U + gn0 - condensate.mu_e) * psi0)
    scale = max(abs(condensate.mu_e), float(np.max(gn0)),
                float(np.max(np.abs(U))) or 1.0)
    res = np.sqrt(np.sum(np.abs(Hpsi) ** 2) * lat.dv) / scale
    if res > max(tol, 10 * condensate.residual):
        raise SolverError(f"condensate not converged enough for the "
                          f"zero-mode solve (residual {res:.3e})")

    if float(np.max(gn0)) == 0.0:
        # free gas: He Phi0 = 0 is solved by psi0 itself and alpha = 0
        return psi0, psi0.copy(), 0.0

    A = _position_operator_matrix(params, lat,
                                  U + 3.0 * gn0 - condensate.mu_e)
    try:
        wflat = scipy.linalg.solve(A, psi0.ravel())
    except scipy.linalg.LinAlgError as exc:
        raise SolverError(f"zero-mode linear system is singular: {exc}") from exc
    w = wflat.reshape(lat.shape)
    overlap = float(np.real(np.sum(np.conj(psi0) * w)) * lat.dv)
    if overlap <= 0:
        raise SolverError("zero-mode normalization integral is non-positive")
    alpha = 1.0 / (2.0 * overlap)
    Phi0 = (2.0 * alpha) * w
    return psi0, Phi0, alpha


def nonlinear_mu2(modeset: ModeSet, condensate: CondensateSolution) -> float:
    """mu2 = alpha/N0; writes mu2, mu1 and the residual quadrature
    coefficient alpha - mu2*N0 into the solution."""
    if condensate.N0 <= 0:
        raise ValueError("N0 must be positive")
    if modeset.mu2_closed is not None:
        mu2 = modeset.mu2_closed        # g/V, avoids the divide round-trip
    else:
        mu2 = modeset.alpha / condensate.N0
    condensate.alpha = modeset.alpha
    condensate.mu2 = mu2
    condensate.mu1 = condensate.mu_e - mu2 * condensate.N0
    # re-derive mu_e from the split so mu1 + mu2*N0 == mu_e bit-exactly
    condensate.mu_e = condensate.mu1 + mu2 * condensate.N0
    condensate.quad_coeff = modeset.alpha - mu2 * condensate.N0
    return mu2
