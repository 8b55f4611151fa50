# Quasiparticle spectra: closed forms on a uniform gas, numeric
# diagonalization in a trap.
#
# The uniform gas has the textbook dispersion eps = sqrt(E(E + 2 g n0));
# the trapped gas is solved numerically and shows the Kohn mode: the
# lowest excitation of a harmonic trap sits at exactly the trap
# frequency, interactions or not.

import numpy as np

from becps.bogoliubov import homogeneous_modes, solve_bdg
from becps.lattice import build_lattice
from becps.meanfield import SystemParams, solve_stationary, uniform_condensate

# -- uniform gas -------------------------------------------------------------

lat = build_lattice((64,), (32.0,))
params = SystemParams(g=0.5, m=1.0)
n0 = 4.0
modes = homogeneous_modes(params, lat, n0)

print("uniform gas, 64 points, g n0 =", params.g * n0)
print("  lowest five quasiparticle energies:",
      np.round(np.sort(modes.energies)[:5], 5))
print("  canonical check max |u^2 - v^2 - 1| =",
      float(np.max(np.abs(modes.u_scalars**2 - modes.v_scalars**2 - 1.0))))

# phonon regime: eps ~ c k with c = sqrt(g n0 / m)
k_min = 2 * np.pi / 32.0
c_sound = np.sqrt(params.g * n0 / params.m)
print("  phonon slope eps/k at k_min:", round(np.min(modes.energies) / k_min, 5),
      "vs speed of sound", round(c_sound, 5))

# -- trapped gas -------------------------------------------------------------

omega = 0.6
lat_t = build_lattice((32,), (16.0,))
params_t = SystemParams(g=0.4, m=1.0,
                        U=lambda x: 0.5 * omega**2 * (x - 8.0)**2)
sol = solve_stationary(params_t, lat_t, N0_guess=20.0, tol=1e-10)
print("\nharmonic trap omega =", omega, " N0 =", sol.N0)
print("  condensate chemical potential mu_e =", round(sol.mu_e, 6),
      " residual =", f"{sol.residual:.1e}")

trapped = solve_bdg(params_t, lat_t, sol, n_modes=6)
print("  first BdG energies:", np.round(trapped.energies, 5))
print("  Kohn mode deviation |eps_1 - omega| =",
      f"{abs(trapped.energies[0] - omega):.2e}")

# the zero-mode pair behind the number-conserving description
print("  zero-mode coefficient alpha =", round(trapped.alpha, 6),
      " (uniform gas would give g*n0)")
