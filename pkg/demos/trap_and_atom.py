"""Length and energy scales of the ion trap and the Rydberg atom.

Run: python3 demos/trap_and_atom.py
"""
import math

import numpy as np

from rydion.constants import AU_POLARIZABILITY, H_PLANCK
from rydion.rydberg import BasisSpec, defect_energy, make_state, polarizability
from rydion.species import lithium6, lithium7, ytterbium171_ion
from rydion.trap import (TrapParams, char_lengths, mathieu_exponent, pseudopotential_frequency,
                         rf_crossover_distance, secular_frequency_lowest_order)

TWO_PI = 2 * math.pi

ion = ytterbium171_ion()
trap = TrapParams(TWO_PI * 250e3, TWO_PI * 2.5e6, 0.28)

print("Trap")
ell = char_lengths(trap, ion)
print(f"  ion-field / static-field balance length ell_z = {ell['ell_z'] * 1e6:.3f} um")
print(f"  rf field overtakes the static field beyond      {rf_crossover_distance(trap, ion) * 1e6:.3f} um")

# the pure rf secular frequency from the Mathieu exponent, next to the usual shortcuts
beta = mathieu_exponent(0.0, trap.q)
print(f"  secular frequency (a=0, continued fraction)    {beta * trap.Omega_rf / 2 / TWO_PI / 1e3:.3f} kHz")
print(f"  lowest-order q/sqrt(8) estimate                {secular_frequency_lowest_order(trap) / TWO_PI / 1e3:.3f} kHz")
print(f"  pseudopotential                                 {pseudopotential_frequency(trap) / TWO_PI / 1e3:.3f} kHz")

print("\nLithium Rydberg levels (h^-1 E)")
li6 = lithium6()
for l, j, name in ((0, 0.5, "30S1/2"), (1, 0.5, "30P1/2"), (1, 1.5, "30P3/2"), (2, 2.5, "30D5/2")):
    print(f"  {name:7s} {defect_energy(li6, 30, l, j) / H_PLANCK / 1e9:10.2f} GHz")

print("\nStatic polarizability of nS (Li-7), in units of the ground-state value")
li7 = lithium7()
a0 = li7.ground_polarizability_au * AU_POLARIZABILITY
ns = np.arange(26, 35, 2)
alphas = np.array([polarizability(make_state(li7, n, 0, 0.5), li7, BasisSpec(n - 5, n + 5, 6))
                   for n in ns])
for n, a in zip(ns, alphas):
    print(f"  n = {n}: {a / a0:.3e}")
slope = np.polyfit(np.log(ns), np.log(alphas), 1)[0]
print(f"  log-log slope over n: {slope:.2f}")
