"""Ensemble reductions to ordering-corrected physical observables.

All ordering bookkeeping lives here; samplers and integrators hand over
raw phase-space fields.  Wigner averages estimate symmetrically ordered
moments, so operator expectations need explicit corrections:

    <n_k>        = <|a_k|^2> - 1/2
    <N>          = <sum |psi|^2 dV> - M/2
    <dN^2>       = Var(sum |psi|^2 dV - M/2) - M/4
    <psi+^2psi^2>(x) = <|psi|^4> - 2<|psi|^2>/dV + 1/(2 dV^2)

(M lattice modes; the dN^2 line follows from expanding the square of
the symmetrically ordered total and collecting the M/4 excess of the
per-mode fourth moments).  Positive-P averages are normally ordered
already; only real parts are taken, and quadrature variances gain the
vacuum 1/2.

Standard errors come from a leave-one-out jackknife across
trajectories, which propagates through the nonlinear estimators
(variances, ratios) without delta-method bookkeeping.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bogoliubov import ModeSet
from .lattice import Lattice, mode_amplitudes_flat

_ORDERING_NOTE = {
    "wigner": "symmetric-order moments, per-mode 1/2 subtracted",
    "positive-p": "normal-order moments, real part taken",
}


@dataclass(eq=False)
class ObservableSeries:
    """Per-snapshot estimates with jackknife standard errors."""

    times: np.ndarray
    values: np.ndarray               # (n_t, ...) estimates
    stderr: np.ndarray
    n_traj_effective: np.ndarray     # (n_t,)
    ordering_applied: str


@dataclass(eq=False)
class OccupationSpectrum:
    """Mode occupations, zero mode kept apart from the k != 0 spectrum."""

    zero_mode: ObservableSeries
    excited: ObservableSeries        # values (n_t, M-1), columns = k_flat
    k_flat: np.ndarray


@dataclass(eq=False)
class QuadratureVariances:
    """Var P and Var Q per (k, branch) row of the +/- construction."""

    k_flat: np.ndarray               # representative flat index per row
    branch: list                     # "0" | "+" | "-" | "self"
    var_p: ObservableSeries
    var_q: ObservableSeries


def jackknife(features, func):
    """Leave-one-out jackknife of func(mean of features over axis 0).

    features: (n, F) per-trajectory feature rows (complex allowed).
    func: vectorized map from (..., F) feature means to (..., O)
    estimates.  Returns (estimate, stderr), each shape (O,).
    """
    feats = np.asarray(features)
    n = feats.shape[0]
    if n == 0:
        probe = np.atleast_1d(np.asarray(func(np.zeros(feats.shape[1:]))))
        nanv = np.full(probe.shape, np.nan)
        return nanv, nanv.copy()
    total = feats.sum(axis=0)
    est = np.asarray(func(total / n))
    if n == 1:
        return est, np.zeros(est.shape)
    loo = (total[None] - feats) / (n - 1)
    reps = np.asarray(func(loo))
    center = reps.mean(axis=0)
    se = np.sqrt((n - 1) / n * np.sum(np.abs(reps - center) ** 2, axis=0))
    return est, se


def _snapshots(ensemble):
    """Normalize a single ensemble or a snapshot series to a list."""
    if hasattr(ensemble, "at") and hasattr(ensemble, "times"):
        return [ensemble.at(i) for i in range(ensemble.n_times)], \
            np.asarray(ensemble.times, dtype=float)
    return [ensemble], np.array([ensemble.t], dtype=float)


def _check_representation(ensemble):
    rep = ensemble.representation
    if rep not in _ORDERING_NOTE:
        raise ValueError(f"unknown representation {rep!r}")
    return rep


def _plus_amps(ens, lat):
    # Psi+ = sum_k alpha+_k conj(phi_k): recover alpha+ via a conjugated
    # forward transform
    return np.conj(mode_amplitudes_flat(np.conj(ens.psi_plus), lat))


def _series(times, per_time, ordering):
    vals = np.array([v for v, _, _ in per_time])
    errs = np.array([e for _, e, _ in per_time])
    neff = np.array([m for _, _, m in per_time], dtype=int)
    return ObservableSeries(times=times, values=vals, stderr=errs,
                            n_traj_effective=neff, ordering_applied=ordering)


def mode_occupations(ensemble, lat: Lattice) -> OccupationSpectrum:
    """Plane-wave occupations <n_k>; zero mode reported separately."""
    snaps, times = _snapshots(ensemble)
    rep = _check_representation(snaps[0])
    per_time = []
    for ens in snaps:
        rows = ens.psi[ens.alive]
        amps = mode_amplitudes_flat(rows, lat)
        if rep == "wigner":
            feats = np.abs(amps) ** 2
            est, se = jackknife(feats, lambda m: m - 0.5)
        else:
            ap = _plus_amps(ens, lat)[ens.alive]
            est, se = jackknife(ap * amps, lambda m: m.real)
        per_time.append((est, se, rows.shape[0]))
    full = _series(times, per_time, _ORDERING_NOTE[rep])
    zero = ObservableSeries(times=times, values=full.values[:, 0],
                            stderr=full.stderr[:, 0],
                            n_traj_effective=full.n_traj_effective,
                            ordering_applied=full.ordering_applied)
    excited = ObservableSeries(times=times, values=full.values[:, 1:],
                               stderr=full.stderr[:, 1:],
                               n_traj_effective=full.n_traj_effective,
                               ordering_applied=full.ordering_applied)
    return OccupationSpectrum(zero_mode=zero, excited=excited,
                              k_flat=np.arange(1, lat.n_points))


def number_statistics(ensemble, lat: Lattice):
    """Total number and its variance: (N series, dN^2 series)."""
    snaps, times = _snapshots(ensemble)
    rep = _check_representation(snaps[0])
    half_m = 0.5 * lat.n_points
    quarter_m = 0.25 * lat.n_points
    per_n, per_v = [], []
    for ens in snaps:
        rows = ens.psi[ens.alive]
        if rep == "wigner":
            t1 = lat.integrate(np.abs(rows) ** 2)
            feats = np.stack([t1, t1 ** 2], axis=-1)

            def func(m):
                nn = m[..., 0] - half_m
                var = m[..., 1] - m[..., 0] ** 2 - quarter_m
                return np.stack([nn, var], axis=-1)
        else:
            t = lat.integrate(ens.psi_plus[ens.alive] * rows)
            feats = np.stack([t, t ** 2], axis=-1)

            def func(m):
                nn = m[..., 0].real
                var = m[..., 1].real + nn - nn ** 2
                return np.stack([nn, var], axis=-1)
        est, se = jackknife(feats, func)
        per_n.append((est[..., 0], se[..., 0], rows.shape[0]))
        per_v.append((est[..., 1], se[..., 1], rows.shape[0]))
    note = _ORDERING_NOTE[rep]
    return _series(times, per_n, note), _series(times, per_v, note)


def quadrature_variances(ensemble, modeset: ModeSet,
                         zero_mode_theta: float = 0.0) -> QuadratureVariances:
    """Var P, Var Q of the +/- mode combinations (homogeneous only).

    Samples are unrotated by their global phase before projecting;
    the zero mode is additionally read in its squeezing frame
    (rotation by zero_mode_theta).  Means are subtracted, so the
    condensate offset drops out of the k=0 row.
    """
    if not modeset.homogeneous:
        raise ValueError("quadrature variances need a homogeneous mode set "
                         "(the +/- construction is undefined otherwise)")
    lat = modeset.lat
    snaps, times = _snapshots(ensemble)
    rep = _check_representation(snaps[0])

    neg = lat.neg_index
    flats = np.sort(modeset.k_flat)
    pair_a = np.array([k for k in flats if k < neg[k]], dtype=int)
    self_flat = np.array([k for k in flats if k == neg[k]], dtype=int)
    k_rows = [0]
    branches = ["0"]
    for a in pair_a:
        k_rows += [a, a]
        branches += ["+", "-"]
    k_rows += list(self_flat)
    branches += ["self"] * len(self_flat)
    k_rows = np.asarray(k_rows)
    n_rows = len(branches)

    def combos(amp_rows, sign):
        # sign +1 for alpha-like, -1 for alpha+-like phase unrotation
        out = np.empty((amp_rows.shape[0], n_rows), dtype=complex)
        out[:, 0] = amp_rows[:, 0] * np.exp(-1j * sign * zero_mode_theta)
        col = 1
        for a in pair_a:
            b = neg[a]
            out[:, col] = (amp_rows[:, a] + amp_rows[:, b]) / np.sqrt(2)
            out[:, col + 1] = (amp_rows[:, a] - amp_rows[:, b]) / np.sqrt(2)
            col += 2
        for s in self_flat:
            out[:, col] = amp_rows[:, s]
            col += 1
        return out

    per_p, per_q = [], []
    for ens in snaps:
        alive = ens.alive
        unrot = np.exp(-1j * ens.global_phase[alive])[:, None]
        a = combos(mode_amplitudes_flat(ens.psi[alive], lat) * unrot, +1)
        if rep == "wigner":
            p = np.sqrt(2.0) * a.real
            q = np.sqrt(2.0) * a.imag
            feats = np.concatenate([p, p ** 2, q, q ** 2], axis=-1)

            def func(m):
                vp = m[..., n_rows:2 * n_rows] - m[..., :n_rows] ** 2
                vq = m[..., 3 * n_rows:] - m[..., 2 * n_rows:3 * n_rows] ** 2
                return np.stack([vp, vq], axis=-2)
        else:
            ap = combos(_plus_amps(ens, lat)[alive] * np.conj(unrot), -1)
            p = (a + ap) / np.sqrt(2.0)
            q = (a - ap) / (1j * np.sqrt(2.0))
            feats = np.concatenate([p, p ** 2, q, q ** 2], axis=-1)

            def func(m):
                vp = (m[..., n_rows:2 * n_rows]
                      - m[..., :n_rows] ** 2).real + 0.5
                vq = (m[..., 3 * n_rows:]
                      - m[..., 2 * n_rows:3 * n_rows] ** 2).real + 0.5
                return np.stack([vp, vq], axis=-2)
        est, se = jackknife(feats, func)
        n_eff = int(alive.sum())
        per_p.append((est[0], se[0], n_eff))
        per_q.append((est[1], se[1], n_eff))
    note = _ORDERING_NOTE[rep]
    return QuadratureVariances(k_flat=k_rows, branch=branches,
                               var_p=_series(times, per_p, note),
                               var_q=_series(times, per_q, note))


def g2_zero(ensemble, lat: Lattice) -> ObservableSeries:
    """Spatially averaged same-point g2: <:n(x)^2:> / <n(x)>^2.

    Numerator and denominator are each averaged over the grid before
    the ratio.  Raises when the mean density is statistically
    indistinguishable from zero.
    """
    snaps, times = _snapshots(ensemble)
    rep = _check_representation(snaps[0])
    m_pts = lat.n_points
    inv_dv = 1.0 / lat.dv
    per_time = []
    for ens in snaps:
        rows = ens.psi[ens.alive].reshape(-1, m_pts)
        if rep == "wigner":
            d = np.abs(rows) ** 2
            feats = np.concatenate([d, d ** 2], axis=-1)

            def func(m):
                m2 = m[..., :m_pts]
                m4 = m[..., m_pts:]
                num = np.mean(m4 - 2.0 * inv_dv * m2 + 0.5 * inv_dv ** 2,
                              axis=-1)
                den = np.mean((m2 - 0.5 * inv_dv) ** 2, axis=-1)
                return np.stack([num / den, m2.mean(axis=-1) - 0.5 * inv_dv],
                                axis=-1)
        else:
            d = (ens.psi_plus[ens.alive].reshape(-1, m_pts) * rows)
            feats = np.concatenate([d, d ** 2], axis=-1)

            def func(m):
                mn = m[..., :m_pts].real
                mnn = m[..., m_pts:].real
                num = np.mean(mnn, axis=-1)
                den = np.mean(mn ** 2, axis=-1)
                return np.stack([num / den, mn.mean(axis=-1)], axis=-1)
        est, se = jackknife(feats, func)
        nbar, nbar_se = est[..., 1], se[..., 1]
        if not nbar > 0 or nbar <= 5.0 * nbar_se:
            raise ValueError("mean density consistent with zero; g2(0) "
                             "is undefined for this ensemble")
        per_time.append((est[..., 0], se[..., 0], rows.shape[0]))
    return _series(times, per_time, _ORDERING_NOTE[rep])
