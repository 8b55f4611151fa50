# Thermal Bogoliubov ensembles in two representations.
#
# The same Gaussian state is drawn either as a truncated-Wigner field
# (symmetric moments) or as a positive-P field pair (normal-ordered
# moments).  Sampled covariances are compared against their targets,
# and the condensate-mode statistics against the closed forms.

import numpy as np

from becps.bogoliubov import homogeneous_modes
from becps.lattice import build_lattice, mode_amplitudes_flat
from becps.meanfield import SystemParams, uniform_condensate
from becps.observables import number_statistics
from becps.sampler import sample_ensemble
from becps.thermal import (ThermalEnsembleSpec, correlation_matrix,
                           normal_order, occupations, squeezed, vacuum)

lat = build_lattice((16,), (16.0,))
params = SystemParams(g=0.25, m=1.0)
modes = homogeneous_modes(params, lat, 10.0)
T = 1.5
occ = occupations(modes, T)
print(f"T = {T}: quasiparticle occupations range "
      f"{occ.min():.3f} .. {occ.max():.3f}")

n = 20_000

# Wigner: sampled second moments approach the symmetric covariance
spec = ThermalEnsembleSpec(T=T, zero_mode_state=vacuum(),
                           representation="wigner", n_traj=n, seed=1)
ens = sample_ensemble(modes, occ, spec)
amps = mode_amplitudes_flat(ens.psi, lat) * np.exp(-1j * ens.global_phase)[:, None]
sampled = (amps.T @ amps.conj()) / n
target = correlation_matrix(modes, occ, spec).normal_block()
print("wigner: worst sampled-vs-target normal moment dev =",
      f"{np.max(np.abs(sampled - target)):.4f}",
      f"(largest entry {np.max(np.abs(target)):.3f})")

# positive-P: normal-ordered anomalous moments go negative where the
# state is squeezed below vacuum; the sampler handles that by drawing
# along complex directions
spec_p = ThermalEnsembleSpec(T=T, zero_mode_state=vacuum(),
                             representation="positive-p", n_traj=n, seed=2)
a_target = normal_order(correlation_matrix(modes, occ, spec_p)).anomalous_block()
print("positive-p: most negative anomalous diagonal =",
      f"{np.min(np.real(np.diag(a_target))):.4f}")
ens_p = sample_ensemble(modes, occ, spec_p)
rot = np.exp(-1j * ens_p.global_phase)[:, None]
a = mode_amplitudes_flat(ens_p.psi, lat) * rot
sampled_a = (a.T @ a) / n
print("positive-p: worst anomalous moment dev =",
      f"{np.max(np.abs(sampled_a - a_target)):.4f}")

# condensate-mode number statistics: a vacuum zero mode gives Poisson
# fluctuations dN^2 = N0, a squeezed one suppresses them by e^{-2r}
sol = uniform_condensate(SystemParams(g=1e-3, m=1.0), lat, 1000.0)
ms = homogeneous_modes(SystemParams(g=1e-3, m=1.0), lat, sol.N0 / lat.volume)
for zm, label in ((vacuum(), "vacuum"), (squeezed(0.5), "squeezed r=0.5")):
    spec_n = ThermalEnsembleSpec(T=0.0, zero_mode_state=zm,
                                 representation="wigner", n_traj=n, seed=3)
    ens_n = sample_ensemble(ms, occupations(ms, 0.0), spec_n, condensate=sol)
    _, var = number_statistics(ens_n, lat)
    print(f"{label}: dN^2/N0 = {var.values[0] / sol.N0:.4f}"
          f" +- {var.stderr[0] / sol.N0:.4f}")
print("expected: 1 for vacuum,", round(float(np.exp(-1.0)), 4), "for r=0.5")
