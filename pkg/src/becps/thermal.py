"""Gaussian initial-state description: occupations and correlations.

Quasiparticle modes carry Bose occupations n_k = 1/(exp(eps_k/T) - 1)
(k_B absorbed into T).  The condensate mode is not thermal by fiat; its
state is chosen separately: vacuum, thermal(nbar0), or squeezed(r0,
theta0).  From these the symmetric 2M x 2M modal correlation matrix over
the free plane-wave basis is

    sigma_phi = [[N, A], [conj(A), N^T]],

    N_kk' = sum_q s_q (u_kq u_k'q* + v_k'q v_kq*) - (zero-mode anomalous terms)
    A_kk' = -sum_q s_q (u_kq v_k'q* + u_k'q v_kq*) + (zero-mode anomalous terms)

with s_q the symmetric occupation n_q + 1/2 and the anomalous per-mode
moment m_q = <b_q^2> nonzero only for a squeezed condensate mode.
"""

from dataclasses import dataclass

import numpy as np

from .bogoliubov import ModeSet
from .meanfield import CondensateSolution


@dataclass(frozen=True)
class ZeroModeState:
    """Condensate-mode state: 'vacuum', 'thermal', or 'squeezed'."""

    kind: str
    nbar: float = 0.0
    r: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("vacuum", "thermal", "squeezed"):
            raise ValueError(f"unknown zero-mode state kind {self.kind!r}")
        if self.nbar < 0:
            raise ValueError("nbar must be >= 0")

    # quadrature variances in the squeeze frame, symmetric ordering
    @property
    def var_p(self) -> float:
        return (self.nbar + 0.5) * np.exp(-2.0 * self.r)

    @property
    def var_q(self) -> float:
        return (self.nbar + 0.5) * np.exp(+2.0 * self.r)

    @property
    def sym_occupation(self) -> float:
        """<{b b+}>/2 = (nbar + 1/2) cosh(2r)."""
        return (self.nbar + 0.5) * np.cosh(2.0 * self.r)

    @property
    def occupation(self) -> float:
        """Normal-ordered <b+ b>."""
        return self.sym_occupation - 0.5

    @property
    def anomalous(self) -> complex:
        """<b^2> = -(nbar + 1/2) sinh(2r) e^{2i theta}."""
        return (-(self.nbar + 0.5) * np.sinh(2.0 * self.r)
                * np.exp(2j * self.theta))


def vacuum() -> ZeroModeState:
    return ZeroModeState("vacuum")


def thermal_state(nbar: float) -> ZeroModeState:
    return ZeroModeState("thermal", nbar=nbar)


def squeezed(r: float, theta: float = 0.0) -> ZeroModeState:
    return ZeroModeState("squeezed", r=r, theta=theta)


@dataclass(eq=False)
class ThermalEnsembleSpec:
    """Which Gaussian ensemble to draw and how many samples."""

    T: float
    zero_mode_state: ZeroModeState
    representation: str   # 'wigner' | 'positive-p'
    n_traj: int
    seed: int

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("temperature must be >= 0")
        if self.representation not in ("wigner", "positive-p"):
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        self.seed = int(self.seed)


@dataclass(eq=False)
class CorrelationMatrix:
    """2M x 2M modal correlations in the extended basis [a, a+]."""

    sigma: np.ndarray
    ordering: str   # 'symmetric' | 'normal'

    @property
    def n_free_modes(self) -> int:
        return self.sigma.shape[0] // 2

    def normal_block(self):
        M = self.n_free_modes
        return self.sigma[:M, :M]

    def anomalous_block(self):
        M = self.n_free_modes
        return self.sigma[:M, M:]


def occupations(modeset: ModeSet, T: float):
    """Bose occupations of the k != 0 quasiparticle modes.

    The zero mode never appears here; its occupation is part of the
    chosen ZeroModeState.
    """
    if T < 0:
        raise ValueError("temperature must be >= 0")
    if T == 0.0:
        return np.zeros(modeset.n_modes)
    return 1.0 / np.expm1(modeset.energies / T)


def correlation_matrix(modeset: ModeSet, occ, spec: ThermalEnsembleSpec
                       ) -> CorrelationMatrix:
    """Symmetric-ordered Sigma_phi over the free plane-wave modes at
    global phase zero (the phase is drawn per trajectory at sampling
    time, never baked in here)."""
    u_proj, v_proj = modeset.projections()
    occ = np.asarray(occ, dtype=float)
    if occ.shape != (modeset.n_modes,):
        raise ValueError("occupations do not match the mode set")

    zm = spec.zero_mode_state
    s = np.concatenate(([zm.sym_occupation], occ + 0.5))
    m = np.zeros(1 + modeset.n_modes, dtype=complex)
    m[0] = zm.anomalous

    us = u_proj * s
    vcs = v_proj.conj() * s
    N = us @ u_proj.conj().T + vcs @ v_proj.T
    A = -(us @ v_proj.conj().T) - (vcs @ u_proj.T)
    if np.any(m != 0):
        um = u_proj * m
        vcm = v_proj.conj() * m.conj()
        N -= um @ v_proj.T + vcm @ u_proj.conj().T
        A += um @ u_proj.T + vcm @ v_proj.conj().T

    M = modeset.lat.n_points
    sigma = np.empty((2 * M, 2 * M), dtype=complex)
    sigma[:M, :M] = N
    sigma[:M, M:] = A
    sigma[M:, :M] = A.conj()
    sigma[M:, M:] = N.T
    return CorrelationMatrix(sigma=sigma, ordering="symmetric")


def normal_order(sym: CorrelationMatrix) -> CorrelationMatrix:
    """Sigma_N = Sigma_phi - I/2 (drops the symmetric-ordering vacuum
    half-quantum from the normal-block diagonals)."""
    if sym.ordering != "symmetric":
        raise ValueError("normal_order expects a symmetric-ordered matrix")
    sigma = sym.sigma.copy()
    idx = np.arange(sigma.shape[0])
    sigma[idx, idx] -= 0.5
    return CorrelationMatrix(sigma=sigma, ordering="normal")


def number_statistics(modeset: ModeSet, occ, spec: ThermalEnsembleSpec,
                      condensate: CondensateSolution):
    """Analytic (N_mean, deltaN^2) for the configured ensemble.

    N_mean adds quasiparticle and zero-mode depletion to N0; the number
    variance is the condensate-quadrature term 2 <P^2> N0, which is the
    dominant (order N0) contribution.
    """
    occ = np.asarray(occ, dtype=float)
    dep = float(np.sum(modeset.u_norm2 * occ + modeset.v_norm2 * (occ + 1.0)))

    zm = spec.zero_mode_state
    lat = modeset.lat
    u0, v0 = modeset.u0_field, modeset.v0_field
    u0n = float(np.sum(np.abs(u0) ** 2) * lat.dv)
    v0n = float(np.sum(np.abs(v0) ** 2) * lat.dv)
    cross = float(np.real(zm.anomalous * np.sum(u0 * v0) * lat.dv)) if zm.r else 0.0
    zero_dep = zm.occupation * u0n + (zm.occupation + 1.0) * v0n - 2.0 * cross

    N_mean = condensate.N0 + dep + zero_dep

    # squeeze angle rotates which quadrature couples to number
    var_p_eff = (zm.nbar + 0.5) * (np.cosh(2 * zm.r)
                                   - np.sinh(2 * zm.r) * np.cos(2 * zm.theta))
    delta_n2 = 2.0 * var_p_eff * condensate.N0
    return N_mean, delta_n2
