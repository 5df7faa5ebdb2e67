"""Dimensionless unit system for the coupled atom-ion motion.

Lengths are measured in ell = sqrt(hbar / (mu_ai omega_bar)) with the
atom-ion reduced mass mu_ai and omega_bar = sqrt(omega_a omega_i); energies in
hbar Omega_rf; time through tau = Omega_rf t; fields in e k_C / ell^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import AU_POLARIZABILITY, E_CHARGE, HBAR, K_COULOMB
from .species import Species, reduced_mass


@dataclass(frozen=True)
class ScaledUnits:
    length_unit: float
    omega_bar: float
    Omega_rf: float
    mu_ai: float
    alpha_ground: float   # C m^2 / V, polarizability of the bare (undressed) atom

    def __post_init__(self):
        for name in ("length_unit", "omega_bar", "Omega_rf", "mu_ai", "alpha_ground"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def build(cls, ion: Species, atom: Species, omega_i: float, omega_a: float,
              Omega_rf: float) -> "ScaledUnits":
        mu = reduced_mass(ion, atom)
        wbar = math.sqrt(omega_a * omega_i)
        alpha_g = atom.ground_polarizability_au * AU_POLARIZABILITY
        return cls(math.sqrt(HBAR / (mu * wbar)), wbar, Omega_rf, mu, alpha_g)

    @property
    def energy_unit(self) -> float:
        return HBAR * self.Omega_rf

    @property
    def field_unit(self) -> float:
        return E_CHARGE * K_COULOMB / self.length_unit**2

    @property
    def E_star(self) -> float:
        return HBAR**4 / (2 * self.alpha_ground * self.mu_ai**2 * E_CHARGE**2 * K_COULOMB**2)

    # conversions
    def to_length(self, x):
        return x / self.length_unit

    def from_length(self, xbar):
        return xbar * self.length_unit

    def to_energy(self, E):
        return E / self.energy_unit

    def from_energy(self, Ebar):
        return Ebar * self.energy_unit

    def to_tau(self, t):
        return self.Omega_rf * t

    def from_tau(self, tau):
        return tau / self.Omega_rf

    def gamma(self, alpha_rydberg: float) -> float:
        return alpha_rydberg / self.alpha_ground

    def betas(self, ion: Species, omega_i: float) -> tuple:
        """Dimensionless trap-field coefficients (beta_1 ... beta_5) of the scaled field norm."""
        m, e, k, ell, W = ion.mass, E_CHARGE, K_COULOMB, self.length_unit, self.Omega_rf
        b1 = m**2 * omega_i**4 * ell**6 / (e**4 * k**2)
        b2 = m**2 * W**4 * ell**6 / (e**4 * k**2)
        b3 = m**2 * omega_i**2 * W**2 * ell**6 / (e**4 * k**2)
        b4 = m * omega_i**2 * ell**3 / (k * e**2)
        b5 = m * W**2 * ell**3 / (k * e**2)
        return b1, b2, b3, b4, b5

    def xis(self, Omega: float, Delta0: float, alpha_rydberg: float) -> tuple:
        """Scaled coefficients of V/(hbar Omega_rf) = xi1 / (xi2 + xi3 fbar)."""
        xi1 = Omega / self.Omega_rf
        xi2 = Delta0 / Omega
        xi3 = self.gamma(alpha_rydberg) / 4 * (HBAR * self.omega_bar) ** 2 / (HBAR * Omega * self.E_star)
        return xi1, xi2, xi3

    def scaled_field_norm(self, dbar: float, tau: float, q: float, betas: tuple) -> float:
        """Scaled field norm at x_i = x_a = 0 for atom distance dbar (ell units)."""
        b1, b2, b3, b4, b5 = betas
        c = math.cos(tau)
        return (b1 * dbar**2 / 4 + b2 * dbar**2 / 4 * q**2 * c**2 + b3 * dbar**2 / 2 * q * c
                + b4 / dbar + b5 / dbar * q * c + 1 / dbar**4)
