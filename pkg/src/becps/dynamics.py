"""Trajectory evolution: deterministic GPE flow for Wigner samples and
the coupled stochastic field pair for positive-P.

Both schemes share a split-step spectral integrator: the kinetic half
steps are exact phase multiplications in mode space, so only the
nonlinear (and, for positive-P, noise) substep carries time-step error.
For Wigner the nonlinear substep is itself exact (a local phase
rotation that conserves |psi|^2 pointwise), making the deterministic
flow norm-conserving to rounding.  For positive-P the nonlinear drift
and multiplicative noise advance by an Ito Euler-Maruyama increment,
first order in dt:

    psi      += dt * [-i(g/hbar psi_plus psi + U/hbar) psi]
                + sqrt(g dt / (hbar dV)) * exp(3i pi/4) * z0 * psi
    psi_plus += dt * [+i(g/hbar psi_plus psi + U/hbar) psi_plus]
                + sqrt(g dt / (hbar dV)) * exp(-3i pi/4) * z1 * psi_plus

with z0, z1 independent standard normals per lattice point per step
(the continuum noise fields xi = z/sqrt(dV dt) folded into the increment).
The Ito correction from the multiplicative noise is a pure imaginary
chemical-potential-like shift with no effect on the number-conserving
observables; the dt-halving convergence test guards the discretization.

Per-trajectory evolution noise comes from trajectory_rng(seed, id, 1),
one (2, grid) normal block per step, so results are independent of
trajectory order, chunking, and worker count.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import EscapeThresholdError, SolverError
from .lattice import Lattice, mode_amplitudes_flat
from .meanfield import SystemParams, potential_grid
from .sampler import FieldSample, TrajectoryEnsemble, trajectory_rng

_KEEP = object()


@dataclass(eq=False)
class QuenchSpec:
    """Parameter override applied at t=0 (None / _KEEP = leave as is)."""

    g: Optional[float] = None
    U: object = _KEEP

    def apply(self, params: SystemParams) -> SystemParams:
        out = params
        if self.g is not None:
            out = replace(out, g=float(self.g))
        if self.U is not _KEEP:
            out = replace(out, U=self.U)
        return out


@dataclass(eq=False)
class EvolutionPlan:
    """How to advance an ensemble and which snapshots to keep."""

    dt: float
    n_steps: int
    save_every: int = 1
    scheme: str = "wigner"
    quench: Optional[QuenchSpec] = None
    escape_threshold: float = 1e6     # x initial peak density marks escape
    escape_fraction_limit: float = 0.01

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.save_every < 1:
            raise ValueError("save_every must be >= 1")
        if self.scheme not in ("wigner", "positive-p"):
            raise ValueError("scheme must be 'wigner' or 'positive-p'")

    def save_steps(self):
        """Step indices at which snapshots are kept (0 is always kept)."""
        return [0] + [s for s in range(1, self.n_steps + 1)
                      if s % self.save_every == 0]


@dataclass(eq=False)
class EnsembleSeries:
    """Snapshots of a trajectory ensemble along the evolution."""

    representation: str
    times: np.ndarray                # (n_t,)
    psi: np.ndarray                  # (n_t, n_traj, *grid)
    psi_plus: Optional[np.ndarray]
    alive: np.ndarray                # (n_t, n_traj) bool
    global_phase: np.ndarray
    traj_ids: np.ndarray
    seed: int
    n_escaped: int

    @property
    def n_times(self) -> int:
        return len(self.times)

    def at(self, i: int) -> TrajectoryEnsemble:
        pp = None if self.psi_plus is None else self.psi_plus[i]
        return TrajectoryEnsemble(representation=self.representation,
                                  psi=self.psi[i], psi_plus=pp,
                                  global_phase=self.global_phase,
                                  traj_ids=self.traj_ids,
                                  alive=self.alive[i], seed=self.seed,
                                  t=float(self.times[i]))


# --------------------------------------------------------------------------
# step kernels (batched over a leading trajectory axis)

def _half_kinetic_phase(lat: Lattice, params: SystemParams, dt: float):
    # exp(-i E_k (dt/2) / hbar), E_k = hbar^2 k^2 / 2m
    return np.exp(-0.5j * dt * params.hbar * lat.k2 / (2.0 * params.m))


def _fft_phase(batch, phase, lat: Lattice):
    axes = tuple(range(-lat.ndim, 0))
    return np.fft.ifftn(np.fft.fftn(batch, axes=axes) * phase, axes=axes)


def _wigner_step_batch(psi, kin_half, g_t, u_t, dt, lat):
    psi = _fft_phase(psi, kin_half, lat)
    psi = psi * np.exp(-1j * dt * (g_t * np.abs(psi) ** 2 + u_t))
    return _fft_phase(psi, kin_half, lat)


_NOISE_ROT = np.exp(3j * np.pi / 4.0)


def _pp_step_batch(psi, psi_plus, kin_half, g_t, u_t, dt, lat, noise_std, z):
    psi = _fft_phase(psi, kin_half, lat)
    psi_plus = _fft_phase(psi_plus, np.conj(kin_half), lat)
    nc = psi_plus * psi
    rot = -1j * dt * (g_t * nc + u_t)
    if z is not None:
        z0, z1 = z
        psi = psi * (1.0 + rot + noise_std * _NOISE_ROT * z0)
        psi_plus = psi_plus * (1.0 - rot
                               + noise_std * np.conj(_NOISE_ROT) * z1)
    else:
        psi = psi * (1.0 + rot)
        psi_plus = psi_plus * (1.0 - rot)
    psi = _fft_phase(psi, kin_half, lat)
    psi_plus = _fft_phase(psi_plus, np.conj(kin_half), lat)
    return psi, psi_plus


def step_wigner(sample: FieldSample, params: SystemParams, lat: Lattice,
                dt: float) -> FieldSample:
    """Advance one Wigner sample by a single split step."""
    kin = _half_kinetic_phase(lat, params, dt)
    u = potential_grid(params, lat)
    u_t = 0.0 if u is None else u / params.hbar
    psi = _wigner_step_batch(sample.psi[None], kin, params.g / params.hbar,
                             u_t, dt, lat)[0]
    if not np.all(np.isfinite(psi)):
        raise SolverError("non-finite field values after Wigner step")
    return FieldSample(psi=psi, psi_plus=None,
                       global_phase=sample.global_phase,
                       traj_id=sample.traj_id, seed_path=sample.seed_path)


def step_positive_p(sample: FieldSample, params: SystemParams, lat: Lattice,
                    dt: float, rng) -> FieldSample:
    """Advance one positive-P sample pair by a single split step.

    rng supplies the step's noise block; pass trajectory_rng(seed,
    traj_id, 1) advanced in step order to reproduce ensemble rows.
    """
    kin = _half_kinetic_phase(lat, params, dt)
    u = potential_grid(params, lat)
    u_t = 0.0 if u is None else u / params.hbar
    g_t = params.g / params.hbar
    z = None
    if params.g != 0.0:
        zz = rng.standard_normal((2,) + lat.shape)
        z = (zz[0][None], zz[1][None])
    noise_std = np.sqrt(g_t * dt / lat.dv)
    psi, psi_plus = _pp_step_batch(
        sample.psi[None], sample.psi_plus[None], kin, g_t, u_t, dt, lat,
        noise_std, z)
    return FieldSample(psi=psi[0], psi_plus=psi_plus[0],
                       global_phase=sample.global_phase,
                       traj_id=sample.traj_id, seed_path=sample.seed_path)


def gpe_energy(psi, params: SystemParams, lat: Lattice):
    """Discrete GPE energy of a field (batch axes allowed)."""
    amps = mode_amplitudes_flat(psi, lat)
    e_k = (params.hbar ** 2) * lat.k2.ravel() / (2.0 * params.m)
    kinetic = np.sum(e_k * np.abs(amps) ** 2, axis=-1)
    u = potential_grid(params, lat)
    dens = np.abs(np.asarray(psi)) ** 2
    pot = 0.0 if u is None else lat.integrate(u * dens)
    inter = 0.5 * params.g * lat.integrate(dens ** 2)
    return kinetic + pot + inter


# --------------------------------------------------------------------------
# ensemble driver

def _evolve_chunk(args):
    (psi, psi_plus, traj_ids, seed, rep, lat, g, m, hbar, u_grid, dt,
     n_steps, save_steps, thresh) = args
    g_t = g / hbar
    u_t = 0.0 if u_grid is None else u_grid / hbar
    kin = np.exp(-0.5j * dt * hbar * lat.k2 / (2.0 * m))
    noise_std = np.sqrt(g_t * dt / lat.dv)
    n = psi.shape[0]
    alive = np.ones(n, dtype=bool)

    rngs = None
    if rep == "positive-p" and g != 0.0:
        rngs = [trajectory_rng(seed, int(t), 1) for t in traj_ids]

    save_set = set(save_steps)
    out_psi = []
    out_pp = []
    out_alive = []

    def snapshot():
        out_psi.append(psi.copy())
        if psi_plus is not None:
            out_pp.append(psi_plus.copy())
        out_alive.append(alive.copy())

    def check_escapes():
        dens = np.abs(psi) ** 2
        bad = ~np.isfinite(psi).reshape(n, -1).all(axis=1)
        bad |= dens.reshape(n, -1).max(axis=1) > thresh
        if psi_plus is not None:
            dens_p = np.abs(psi_plus) ** 2
            bad |= ~np.isfinite(psi_plus).reshape(n, -1).all(axis=1)
            bad |= dens_p.reshape(n, -1).max(axis=1) > thresh
        newly = bad & alive
        if np.any(newly):
            alive[newly] = False
            psi[newly] = 0.0
            if psi_plus is not None:
                psi_plus[newly] = 0.0

    if 0 in save_set:
        snapshot()
    for s in range(1, n_steps + 1):
        if rep == "wigner":
            psi = _wigner_step_batch(psi, kin, g_t, u_t, dt, lat)
        else:
            z = None
            if rngs is not None:
                zz = np.empty((n, 2) + lat.shape)
                for i in range(n):
                    zz[i] = rngs[i].standard_normal((2,) + lat.shape)
                z = (zz[:, 0], zz[:, 1])
            psi, psi_plus = _pp_step_batch(psi, psi_plus, kin, g_t, u_t,
                                           dt, lat, noise_std, z)
        check_escapes()
        if s in save_set:
            snapshot()

    return (np.array(out_psi), np.array(out_pp) if out_pp else None,
            np.array(out_alive))


def run_ensemble(samples: TrajectoryEnsemble, plan: EvolutionPlan,
                 params: SystemParams, lat: Lattice,
                 n_workers: int = 1) -> EnsembleSeries:
    """Evolve every trajectory, keeping snapshots at the plan's stride.

    Trajectory order and worker count do not affect the result: each
    trajectory owns its noise stream and chunks are reassembled in
    trajectory order.  Raises EscapeThresholdError when more than the
    configured fraction of trajectories escape.
    """
    if samples.representation != plan.scheme:
        raise ValueError("sample representation does not match plan.scheme")
    eff = plan.quench.apply(params) if plan.quench is not None else params
    u_grid = potential_grid(eff, lat)

    peak = float(np.max(np.abs(samples.psi) ** 2)) if samples.psi.size else 0.0
    if samples.psi_plus is not None and samples.psi_plus.size:
        peak = max(peak, float(np.max(np.abs(samples.psi_plus) ** 2)))
    thresh = plan.escape_threshold * peak

    n = samples.n_traj
    save_steps = plan.save_steps()
    psi = np.array(samples.psi, dtype=complex)
    psi_plus = (None if samples.psi_plus is None
                else np.array(samples.psi_plus, dtype=complex))

    n_workers = max(1, int(n_workers))
    chunk = max(1, -(-n // n_workers))
    bounds = [(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    jobs = [(psi[a:b], None if psi_plus is None else psi_plus[a:b],
             samples.traj_ids[a:b], samples.seed, plan.scheme, lat,
             eff.g, eff.m, eff.hbar, u_grid, plan.dt, plan.n_steps,
             save_steps, thresh) for a, b in bounds]

    if n_workers == 1 or len(jobs) == 1:
        results = [_evolve_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_evolve_chunk, jobs))

    n_t = len(save_steps)
    grid = lat.shape
    all_psi = np.empty((n_t, n) + grid, dtype=complex)
    all_pp = None if psi_plus is None else np.empty((n_t, n) + grid,
                                                    dtype=complex)
    all_alive = np.empty((n_t, n), dtype=bool)
    for (a, b), (cp, cpp, cal) in zip(bounds, results):
        all_psi[:, a:b] = cp
        if all_pp is not None:
            all_pp[:, a:b] = cpp
        all_alive[:, a:b] = cal

    n_escaped = int(n - all_alive[-1].sum()) if n_t else 0
    series = EnsembleSeries(representation=plan.scheme,
                            times=plan.dt * np.asarray(save_steps, float),
                            psi=all_psi, psi_plus=all_pp, alive=all_alive,
                            global_phase=samples.global_phase,
                            traj_ids=samples.traj_ids, seed=samples.seed,
                            n_escaped=n_escaped)
    if n and n_escaped / n > plan.escape_fraction_limit:
        raise EscapeThresholdError(
            f"{n_escaped} of {n} trajectories escaped "
            f"({100.0 * n_escaped / n:.2f}% > "
            f"{100.0 * plan.escape_fraction_limit:.2f}% allowed)")
    return series
