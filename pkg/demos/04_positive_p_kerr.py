# Positive-P trajectories against an exact quantum solution.
#
# On a one-point lattice the gas is a single Kerr oscillator, solvable
# in the Fock basis.  The stochastic field pair must reproduce the
# interaction-driven collapse of the coherence <a> -- including the
# phase curl that no mean-field description produces.

from math import lgamma

import numpy as np

from becps.bogoliubov import homogeneous_modes
from becps.dynamics import EvolutionPlan, run_ensemble
from becps.lattice import single_mode_lattice
from becps.meanfield import SystemParams, uniform_condensate
from becps.sampler import sample_ensemble
from becps.thermal import ThermalEnsembleSpec, occupations, vacuum

lat = single_mode_lattice(1.0)
params = SystemParams(g=1.0, m=1.0)
sol = uniform_condensate(params, lat, N0=4.0)   # coherent alpha = 2
modes = homogeneous_modes(params, lat, sol.N0 / lat.volume)

spec = ThermalEnsembleSpec(T=0.0, zero_mode_state=vacuum(),
                           representation="positive-p",
                           n_traj=20_000, seed=9)
ens = sample_ensemble(modes, occupations(modes, 0.0), spec, condensate=sol)
plan = EvolutionPlan(dt=0.00125, n_steps=240, save_every=48,
                     scheme="positive-p")
series = run_ensemble(ens, plan, params, lat)
print("trajectories:", spec.n_traj, " escapes:", series.n_escaped)

# exact coherent-state evolution under (g/2V) a+ a+ a a
alpha0 = np.sqrt(sol.N0)
n = np.arange(60)
c = np.exp(-0.5 * alpha0**2 + n * np.log(alpha0)
           - 0.5 * np.array([lgamma(k + 1.0) for k in n]))
e_n = 0.5 * params.g / lat.volume * n * (n - 1.0)

print("\n    t      <a> exact           <a> sampled         |err|/SE")
for i, t in enumerate(series.times):
    phases = np.exp(-1j * (e_n[1:] - e_n[:-1]) * t / params.hbar)
    exact = np.sum(c[:-1] * c[1:] * np.sqrt(n[1:]) * phases)
    w = np.exp(-1j * series.global_phase) * series.psi[i][:, 0]
    est = np.mean(w)
    se = (max(np.std(w.real, ddof=1), np.std(w.imag, ddof=1))
          / np.sqrt(len(w)) + 1e-12)   # t=0 is deterministic, floor the SE
    print(f"  {t:5.2f}  {exact:.4f}  {est:.4f}  {abs(est - exact) / se:5.2f}")

print("\nthe sampled coherence tracks the Fock-basis decay; growing SE")
print("with t is the usual positive-P sampling-error growth")
