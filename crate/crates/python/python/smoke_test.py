"""Smoke test for the compiled `ion_heating_py` module."""

import math

import ion_heating_py as ih


def check(cond, what):
    if not cond:
        raise AssertionError(what)
    print("ok", what)


gamma = ih.scattering_rate()
check(abs(gamma / (2 * math.pi) - 1.07e6) < 0.02e6, "resonant scattering rate near 2pi x 1.07 MHz")

nss = ih.steady_state_nbar(-11e6)
check(nss is not None and 11.0 < nss < 14.0, "red-detuned Doppler limit")
check(ih.steady_state_nbar(9e6) is None, "blue detuning has no equilibrium")

p = ih.displaced_fock_prob(0, 1, 0.25)
check(abs(p - 0.25 * math.exp(-0.25)) < 1e-14, "vacuum displacement is Poissonian")

ground = [1.0] + [0.0] * 50
rho = ih.bath_propagate(ground, 770.0, 1e-3)
check(abs(rho[0] - 1.0 / (1.0 + 0.77)) < 1e-12, "bath ground-state population")

ens = ih.ambient_ensemble(770.0, [0.0, 2e-3], trajectories=200, seed=1)
check(abs(ens["nbar"][1] - 1.54) < 5 * ens["nbar_se"][1], "trajectory nbar tracks the heating rate")
check(ens == ih.ambient_ensemble(770.0, [0.0, 2e-3], trajectories=200, seed=1), "seeded ensembles repeat")

eta, omega0 = 0.104, 2 * math.pi / (60e-6 * 0.104)
times = [i * 300e-6 / 59 for i in range(60)]
shots = [1000] * 60
counts = [round(1000 * math.sin(0.5 * omega0 * eta * t) ** 2) for t in times]
est = ih.svd_populations(times, counts, shots, 5, omega0, eta, bootstrap=100)
check(abs(est["point"][0] - 1.0) < 0.01, "sideband inversion finds the ground state")

try:
    ih.thermal_distribution(-1.0, 10)
except ValueError:
    print("ok invalid input raises ValueError")
else:
    raise AssertionError("negative nbar accepted")

print("smoke test passed")
