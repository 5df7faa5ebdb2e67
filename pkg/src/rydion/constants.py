"""Physical constants and isotope data used throughout the package.

Fundamental constants come from scipy.constants (CODATA 2018). Isotope
masses are neutral-atom masses in unified atomic mass units (AME 2020).
"""
import math

import scipy.constants as sc

HBAR = sc.hbar
H_PLANCK = sc.h
E_CHARGE = sc.e
EPS0 = sc.epsilon_0
M_E = sc.m_e
C_LIGHT = sc.c
AMU = sc.atomic_mass
ALPHA_FS = sc.fine_structure
K_COULOMB = 1.0 / (4.0 * math.pi * EPS0)

A0 = sc.physical_constants["Bohr radius"][0]
HARTREE = sc.physical_constants["Hartree energy"][0]
# R_inf in J (hc R_inf)
RYDBERG_ENERGY = sc.h * sc.c * sc.Rydberg

# atomic units of derived quantities
AU_FIELD = HARTREE / (E_CHARGE * A0)                 # V/m
AU_POLARIZABILITY = 4.0 * math.pi * EPS0 * A0**3     # C m^2 / V

ISOTOPE_MASS_U = {
    "H1": 1.00782503223,
    "Li6": 6.0151228874,
    "Li7": 7.0160034366,
    "Yb171": 170.9363302,
}

# static dipole polarizability of the alkali ground state, atomic units
GROUND_POLARIZABILITY_AU = {
    "Li6": 164.11,
    "Li7": 164.11,
    "H1": 4.5,
}

TWO_PI = 2.0 * math.pi
