# Truncated-Wigner dynamics: equilibrium is boring, a quench is not.
#
# Left alone, the thermal Bogoliubov ensemble is stationary under the
# split-step evolution.  Doubling g at t=0 throws every mode out of
# equilibrium; occupations then oscillate at the new Bogoliubov
# frequencies.

import numpy as np

from becps.bogoliubov import homogeneous_modes
from becps.dynamics import EvolutionPlan, QuenchSpec, run_ensemble
from becps.lattice import build_lattice
from becps.meanfield import SystemParams, uniform_condensate
from becps.observables import mode_occupations
from becps.sampler import sample_ensemble
from becps.thermal import ThermalEnsembleSpec, occupations, vacuum

lat = build_lattice((8,), (8.0,))
params = SystemParams(g=0.1, m=1.0)
sol = uniform_condensate(params, lat, N0=80.0)
modes = homogeneous_modes(params, lat, sol.N0 / lat.volume)
T = 1.0
spec = ThermalEnsembleSpec(T=T, zero_mode_state=vacuum(),
                           representation="wigner", n_traj=10_000, seed=5)
ens = sample_ensemble(modes, occupations(modes, T), spec, condensate=sol)


def occupation_table(series):
    spectrum = mode_occupations(series, lat)
    print("    t     " + "".join(f"  k#{k:<5d}" for k in spectrum.k_flat[:4]))
    for i, t in enumerate(spectrum.excited.times):
        row = spectrum.excited.values[i][:4]
        print(f"  {t:5.2f}  " + "".join(f"  {v:7.3f}" for v in row))


print("no quench: occupations hold their thermal values")
plan = EvolutionPlan(dt=0.01, n_steps=60, save_every=20, scheme="wigner")
occupation_table(run_ensemble(ens, plan, params, lat))

print("\ng -> 2g quench: the same modes start to breathe")
plan_q = EvolutionPlan(dt=0.01, n_steps=60, save_every=20, scheme="wigner",
                       quench=QuenchSpec(g=0.2))
occupation_table(run_ensemble(ens, plan_q, params, lat))

# the quench pumps pairs at +k/-k; total atom number stays put
from becps.observables import number_statistics

n_series, _ = number_statistics(run_ensemble(ens, plan_q, params, lat), lat)
drift = np.max(np.abs(n_series.values - n_series.values[0]))
print(f"\ntotal number drift through the quench: {drift:.2e}")
