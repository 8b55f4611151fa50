"""Initial phase-space samples for Wigner and positive-P ensembles.

Every trajectory owns an RNG stream derived from (seed, traj_id) through
``numpy.random.SeedSequence`` spawn keys, so ensembles are reproducible
and independent of sampling order or worker placement.  Per trajectory
the draw order is fixed and documented:

    1. one standard-normal vector z (length 2 + 2*n_modes for Wigner,
       2*M for positive-P, M lattice modes),
    2. one uniform global phase in [0, 2*pi).

The sampled field is a pure linear map of z plus the condensate offset;
the map itself is exposed for tests via the *_from_normals helpers.

Wigner draws mode amplitudes beta_k with symmetric variance n_k + 1/2
and assembles alpha_k = alpha0_k + sum_q (u_kq beta_q - v_kq* beta_q*)
(delta couplings in the homogeneous case).  Positive-P factorizes the
normal-ordered covariance as sigma_P sigma_P^T - complex when squeezing
pushes a variance below the vacuum floor - or uses the closed-form
plus/minus pair construction on homogeneous mode sets.
"""

from dataclasses import dataclass
from typing import Optional
from weakref import WeakKeyDictionary

import numpy as np
import scipy.linalg

from .bogoliubov import ModeSet
from .errors import SolverError
from .lattice import field_from_flat, mode_amplitudes_flat
from .thermal import (CorrelationMatrix, ThermalEnsembleSpec,
                      correlation_matrix, normal_order)


def trajectory_rng(seed: int, traj_id: int, phase: int = 0):
    """Independent, reproducible stream for one trajectory.

    phase 0 is initial-state sampling, phase 1 the evolution noise.
    """
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=(int(traj_id), int(phase)))
    return np.random.default_rng(ss)


@dataclass(eq=False)
class FieldSample:
    """One drawn trajectory initial condition."""

    psi: np.ndarray
    psi_plus: Optional[np.ndarray]   # positive-P only
    global_phase: float
    traj_id: int
    seed_path: tuple


@dataclass(eq=False)
class TrajectoryEnsemble:
    """Batch of samples at one time; the unit of evolution/reduction."""

    representation: str
    psi: np.ndarray                  # (n_traj, *grid)
    psi_plus: Optional[np.ndarray]
    global_phase: np.ndarray         # (n_traj,)
    traj_ids: np.ndarray
    alive: np.ndarray                # bool (n_traj,)
    seed: int
    t: float = 0.0

    @property
    def n_traj(self) -> int:
        return self.psi.shape[0]

    def sample(self, row: int) -> FieldSample:
        pp = None if self.psi_plus is None else self.psi_plus[row]
        return FieldSample(psi=self.psi[row], psi_plus=pp,
                           global_phase=float(self.global_phase[row]),
                           traj_id=int(self.traj_ids[row]),
                           seed_path=(self.seed, int(self.traj_ids[row]), 0))


# --------------------------------------------------------------------------
# preparation (shared, cached per ModeSet)

_PREP_CACHE: "WeakKeyDictionary[ModeSet, dict]" = WeakKeyDictionary()


def _cache_key(occ, spec: ThermalEnsembleSpec, flavor: str):
    zm = spec.zero_mode_state
    return (flavor, np.asarray(occ).tobytes(),
            zm.kind, zm.nbar, zm.r, zm.theta)


@dataclass(eq=False)
class _WignerPrep:
    lat: object
    u_grid: np.ndarray       # (M,) couples beta_k
    v_grid: np.ndarray       # (M,) couples conj(beta_{-k})
    beta_std: np.ndarray     # (n_modes,) std of Re/Im of each beta
    slot_flat: np.ndarray    # (n_modes,) flat index of each solved mode
    zm_amp: tuple            # (sqrt var_p, sqrt var_q, exp(i theta))
    u_proj: Optional[np.ndarray] = None   # general path
    v_proj: Optional[np.ndarray] = None


def _prepare_wigner(modeset: ModeSet, occ, spec, force_general: bool):
    occ = np.asarray(occ, dtype=float)
    zm = spec.zero_mode_state
    zm_amp = (np.sqrt(zm.var_p), np.sqrt(zm.var_q), np.exp(1j * zm.theta))
    beta_std = np.sqrt(0.5 * (occ + 0.5))
    lat = modeset.lat
    if modeset.homogeneous and not force_general:
        u_grid = np.zeros(lat.n_points)
        v_grid = np.zeros(lat.n_points)
        u_grid[0] = 1.0
        u_grid[modeset.k_flat] = modeset.u_scalars
        v_grid[modeset.k_flat] = modeset.v_scalars
        return _WignerPrep(lat, u_grid, v_grid, beta_std,
                           modeset.k_flat, zm_amp)
    u_proj, v_proj = modeset.projections()
    return _WignerPrep(lat, None, None, beta_std, modeset.k_flat, zm_amp,
                       u_proj=u_proj, v_proj=v_proj)


def _wigner_normal_count(prep: _WignerPrep) -> int:
    return 2 + 2 * len(prep.beta_std)


def wigner_from_normals(prep: _WignerPrep, z):
    """Flat mode-amplitude fluctuation delta-alpha for one noise vector."""
    sp, sq, rot = prep.zm_amp
    beta0 = rot * (z[0] * sp - 1j * z[1] * sq) / np.sqrt(2.0)
    zm = z[2:].reshape(-1, 2)
    betas = (zm[:, 0] + 1j * zm[:, 1]) * prep.beta_std
    if prep.u_proj is None:
        beta_grid = np.zeros(prep.lat.n_points, dtype=complex)
        beta_grid[0] = beta0
        beta_grid[prep.slot_flat] = betas
        return (prep.u_grid * beta_grid
                - prep.v_grid * np.conj(beta_grid[prep.lat.neg_index]))
    bvec = np.concatenate(([beta0], betas))
    return prep.u_proj @ bvec - prep.v_proj.conj() @ np.conj(bvec)


@dataclass(eq=False)
class _PositivePPrep:
    lat: object
    pair_a: np.ndarray       # flat index k of each full pair (k, -k)
    pair_b: np.ndarray       # flat index -k
    sig_p: np.ndarray        # (n_pairs,) complex sqrt of plus-mode P variance
    sig_q: np.ndarray
    self_flat: np.ndarray    # Nyquist-like self-paired modes
    self_sig_p: np.ndarray
    self_sig_q: np.ndarray
    zm_sig: tuple            # (sigma_p0, sigma_q0, exp(i theta))
    sigma_fac: Optional[np.ndarray] = None   # general path factor (2M x 2M)


def _csqrt(x):
    return np.sqrt(np.asarray(x, dtype=complex))


def symmetric_sqrt_factor(C: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Factor a complex symmetric matrix as sigma sigma^T = C.

    Real symmetric input goes through an eigendecomposition (negative
    eigenvalues yield imaginary columns); genuinely complex input uses
    the principal matrix square root, which is symmetric for symmetric
    input.
    """
    C = np.asarray(C, dtype=complex)
    scale = max(float(np.max(np.abs(C))), 1.0)
    if float(np.max(np.abs(C - C.T))) > tol * scale:
        raise SolverError("covariance matrix is not symmetric; cannot "
                          "take a sigma sigma^T square root")
    C = 0.5 * (C + C.T)
    if float(np.max(np.abs(C.imag))) <= 1e-13 * scale:
        lam, vec = scipy.linalg.eigh(C.real)
        lam[np.abs(lam) < 1e-14 * scale] = 0.0
        sigma = vec * _csqrt(lam)
    else:
        sigma = scipy.linalg.sqrtm(C)
    resid = float(np.max(np.abs(sigma @ sigma.T - C)))
    if resid > 1e-8 * scale:
        raise SolverError(f"matrix square root failed (residual {resid:.3e})")
    return sigma


def _prepare_positive_p(modeset: ModeSet, occ, spec, force_general: bool):
    occ = np.asarray(occ, dtype=float)
    zm = spec.zero_mode_state
    zm_sig = (_csqrt(zm.var_p - 0.5), _csqrt(zm.var_q - 0.5),
              np.exp(1j * zm.theta))
    lat = modeset.lat

    if modeset.homogeneous and not force_general:
        slot_of = np.full(lat.n_points, -1, dtype=int)
        slot_of[modeset.k_flat] = np.arange(modeset.n_modes)
        neg = lat.neg_index
        flats = np.sort(modeset.k_flat)
        pair_a = np.array([k for k in flats if k < neg[k]], dtype=int)
        pair_b = neg[pair_a] if len(pair_a) else np.array([], dtype=int)
        self_flat = np.array([k for k in flats if k == neg[k]], dtype=int)

        def sigs(flat_idx):
            sl = slot_of[flat_idx]
            n = occ[sl]
            r = np.arcsinh(modeset.v_scalars[sl])
            return (_csqrt((n + 0.5) * np.exp(-2 * r) - 0.5),
                    _csqrt((n + 0.5) * np.exp(+2 * r) - 0.5))

        sp, sq = sigs(pair_a) if len(pair_a) else (np.array([]), np.array([]))
        ssp, ssq = (sigs(self_flat) if len(self_flat)
                    else (np.array([]), np.array([])))
        return _PositivePPrep(lat, pair_a, pair_b, sp, sq,
                              self_flat, ssp, ssq, zm_sig)

    sig_n = normal_order(correlation_matrix(modeset, occ, spec))
    M = lat.n_points
    Nn = sig_n.sigma[:M, :M]
    A = sig_n.sigma[:M, M:]
    # reorder so creation columns pair with annihilation rows: the
    # resulting sampling covariance [[A, Nn],[Nn^T, conj(A)]] is complex
    # symmetric and factorizable as sigma sigma^T
    C = np.block([[A, Nn], [Nn.T, A.conj()]])
    sigma_fac = symmetric_sqrt_factor(C)
    return _PositivePPrep(lat, None, None, None, None, None, None, None,
                          zm_sig, sigma_fac=sigma_fac)


def _pp_normal_count(prep: _PositivePPrep, M: int) -> int:
    return 2 * M


def positive_p_from_normals(prep: _PositivePPrep, z):
    """(delta_alpha, delta_alpha_plus) flat vectors for one noise vector."""
    if prep.sigma_fac is not None:
        v = prep.sigma_fac @ z
        M = v.shape[0] // 2
        return v[:M], v[M:]

    M = prep.lat.n_points
    da = np.zeros(M, dtype=complex)
    dap = np.zeros(M, dtype=complex)
    sp0, sq0, rot = prep.zm_sig
    a = (z[0] * sp0 - 1j * z[1] * sq0) / np.sqrt(2.0)
    ap = (z[0] * sp0 + 1j * z[1] * sq0) / np.sqrt(2.0)
    da[0] = rot * a
    dap[0] = np.conj(rot) * ap

    off = 2
    npair = len(prep.pair_a)
    if npair:
        zz = z[off:off + 4 * npair].reshape(npair, 4)
        off += 4 * npair
        # plus mode squeezes P, minus mode squeezes Q (variances swap)
        ap_p = (zz[:, 0] * prep.sig_p - 1j * zz[:, 1] * prep.sig_q) / np.sqrt(2)
        app_p = (zz[:, 0] * prep.sig_p + 1j * zz[:, 1] * prep.sig_q) / np.sqrt(2)
        ap_m = (zz[:, 2] * prep.sig_q - 1j * zz[:, 3] * prep.sig_p) / np.sqrt(2)
        app_m = (zz[:, 2] * prep.sig_q + 1j * zz[:, 3] * prep.sig_p) / np.sqrt(2)
        da[prep.pair_a] = (ap_p + ap_m) / np.sqrt(2)
        da[prep.pair_b] = (ap_p - ap_m) / np.sqrt(2)
        dap[prep.pair_a] = (app_p + app_m) / np.sqrt(2)
        dap[prep.pair_b] = (app_p - app_m) / np.sqrt(2)

    nself = len(prep.self_flat)
    if nself:
        zz = z[off:off + 2 * nself].reshape(nself, 2)
        da[prep.self_flat] = (zz[:, 0] * prep.self_sig_p
                              - 1j * zz[:, 1] * prep.self_sig_q) / np.sqrt(2)
        dap[prep.self_flat] = (zz[:, 0] * prep.self_sig_p
                               + 1j * zz[:, 1] * prep.self_sig_q) / np.sqrt(2)
    return da, dap


# --------------------------------------------------------------------------
# public sampling operations

def _get_prep(modeset, occ, spec, force_general):
    flavor = spec.representation + ("/general" if force_general else "")
    per_set = _PREP_CACHE.setdefault(modeset, {})
    key = _cache_key(occ, spec, flavor)
    if key not in per_set:
        if spec.representation == "wigner":
            per_set[key] = _prepare_wigner(modeset, occ, spec, force_general)
        else:
            per_set[key] = _prepare_positive_p(modeset, occ, spec, force_general)
    return per_set[key]


def _condensate_amps(modeset, condensate):
    if condensate is None:
        return np.zeros(modeset.lat.n_points, dtype=complex)
    return mode_amplitudes_flat(condensate.psi0_field, modeset.lat)


def sample_wigner(modeset: ModeSet, occ, spec: ThermalEnsembleSpec,
                  condensate=None, rng=None, traj_id: int = 0,
                  force_general: bool = False) -> FieldSample:
    """Draw one truncated-Wigner initial field."""
    if spec.representation != "wigner":
        raise ValueError("spec.representation must be 'wigner'")
    prep = _get_prep(modeset, occ, spec, force_general)
    if rng is None:
        rng = trajectory_rng(spec.seed, traj_id, 0)
    z = rng.standard_normal(_wigner_normal_count(prep))
    phase = rng.uniform(0.0, 2.0 * np.pi)
    amps = _condensate_amps(modeset, condensate) + wigner_from_normals(prep, z)
    psi = field_from_flat(amps, modeset.lat) * np.exp(1j * phase)
    return FieldSample(psi=psi, psi_plus=None, global_phase=phase,
                       traj_id=traj_id, seed_path=(spec.seed, traj_id, 0))


def sample_positive_p(modeset: ModeSet, occ, spec: ThermalEnsembleSpec,
                      condensate=None, rng=None, traj_id: int = 0,
                      force_general: bool = False) -> FieldSample:
    """Draw one positive-P initial field pair."""
    if spec.representation != "positive-p":
        raise ValueError("spec.representation must be 'positive-p'")
    prep = _get_prep(modeset, occ, spec, force_general)
    if rng is None:
        rng = trajectory_rng(spec.seed, traj_id, 0)
    lat = modeset.lat
    z = rng.standard_normal(_pp_normal_count(prep, lat.n_points))
    phase = rng.uniform(0.0, 2.0 * np.pi)
    a0 = _condensate_amps(modeset, condensate)
    da, dap = positive_p_from_normals(prep, z)
    psi = field_from_flat(a0 + da, lat) * np.exp(1j * phase)
    psi_plus = np.conj(field_from_flat(np.conj(np.conj(a0) + dap), lat)) \
        * np.exp(-1j * phase)
    return FieldSample(psi=psi, psi_plus=psi_plus, global_phase=phase,
                       traj_id=traj_id, seed_path=(spec.seed, traj_id, 0))


def sample_ensemble(modeset: ModeSet, occ, spec: ThermalEnsembleSpec,
                    condensate=None, force_general: bool = False
                    ) -> TrajectoryEnsemble:
    """Draw the full ensemble configured by spec.

    Row j is bit-identical to the single-sample op called with
    traj_id=j: both consume the same per-trajectory stream.
    """
    lat = modeset.lat
    n = spec.n_traj
    wigner = spec.representation == "wigner"
    prep = _get_prep(modeset, occ, spec, force_general)
    a0 = _condensate_amps(modeset, condensate)
    nz = (_wigner_normal_count(prep) if wigner
          else _pp_normal_count(prep, lat.n_points))

    amps = np.empty((n, lat.n_points), dtype=complex)
    amps_p = None if wigner else np.empty((n, lat.n_points), dtype=complex)
    phases = np.empty(n)
    for j in range(n):
        rng = trajectory_rng(spec.seed, j, 0)
        z = rng.standard_normal(nz)
        phases[j] = rng.uniform(0.0, 2.0 * np.pi)
        if wigner:
            amps[j] = a0 + wigner_from_normals(prep, z)
        else:
            da, dap = positive_p_from_normals(prep, z)
            amps[j] = a0 + da
            amps_p[j] = np.conj(a0) + dap

    rot = np.exp(1j * phases)[:, None]
    psi = (field_from_flat(amps, lat).reshape(n, -1) * rot).reshape(
        (n,) + lat.shape)
    psi_plus = None
    if not wigner:
        psi_plus = (np.conj(field_from_flat(np.conj(amps_p), lat)).reshape(n, -1)
                    * np.conj(rot)).reshape((n,) + lat.shape)
    return TrajectoryEnsemble(representation=spec.representation, psi=psi,
                              psi_plus=psi_plus, global_phase=phases,
                              traj_ids=np.arange(n), alive=np.ones(n, bool),
                              seed=spec.seed)
