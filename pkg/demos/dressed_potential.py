"""From a dressed atom to a spin-dependent force on the ion.

Builds the soft-core dressed potential for Li-7 30S, finds where its force
peaks, checks it against the full three-level eigenvalue and works out how
strongly the ion must be driven to feel the same force.

Run: python3 demos/dressed_potential.py
"""
import math

import numpy as np

from rydion.constants import H_PLANCK
from rydion.dressed import (AdiabaticPotential, DressingParams, force_profile, lifetime_enhancement,
                            match_drive, three_level_ground, v_dressed)
from rydion.species import lithium7, ytterbium171_ion
from rydion.trap import TrapParams, pseudopotential_frequency

TWO_PI = 2 * math.pi
li7, ion = lithium7(), ytterbium171_ion()

for Omega, Delta0 in ((10e6, 1e9), (10.02e6, 0.4e9)):
    p = DressingParams(TWO_PI * Omega, TWO_PI * Delta0, atom=li7)
    pot = AdiabaticPotential.from_dressing(p)
    d = pot.force_maximum_distance
    F = force_profile(d, pot)["F"]
    print(f"Omega = {Omega / 1e6:.2f} MHz, Delta0 = {Delta0 / 1e9:.1f} GHz")
    print(f"  depth A/h = {pot.A / H_PLANCK / 1e3:.1f} kHz, width R_w = {pot.R_w * 1e6:.3f} um")
    print(f"  force peaks at d = {d / pot.R_w:.4f} R_w with F = {F * pot.R_w / pot.A:.4f} A/R_w")
    print(f"  Rydberg lifetime gain {lifetime_enhancement(p):.0f}x")

    # second-order potential against the exact three-level ground state
    R = np.array([0.5, 1.0, 2.0]) * pot.R_w
    exact = [three_level_ground(r, p) for r in R]
    for r, e, v in zip(R, exact, v_dressed(R, pot)):
        print(f"    R = {r * 1e6:.2f} um: second order {v / H_PLANCK / 1e3:8.2f} kHz, "
              f"three-level {e / H_PLANCK / 1e3:8.2f} kHz")

    static = match_drive(d, p, None, ion, TWO_PI * 250e3)
    print(f"  drive matching the dressed force (static trap): {static / TWO_PI:.1f} Hz\n")

# in a pure rf trap the field at the atom oscillates; the force is averaged over a period
trap = TrapParams(0.0, TWO_PI * 2.5e6, 0.28)
p = DressingParams(TWO_PI * 13.1e6, TWO_PI * 0.8e9, atom=li7)
for how in ("factorized", "exact"):
    eta = match_drive(1e-6, p, trap, ion, pseudopotential_frequency(trap), how)
    print(f"rf-averaged matched drive at d = 1 um ({how}): {eta / TWO_PI:.1f} Hz")
