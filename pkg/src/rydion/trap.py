"""Linear Paul trap fields, characteristic lengths and Mathieu secular frequencies."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import E_CHARGE, K_COULOMB
from .species import Species


class TrapInstabilityError(ValueError):
    """Raised when (a, q) lies outside the lowest Mathieu stability region."""


class SingularConfigurationError(ValueError):
    """Raised when atom and ion coincide."""


@dataclass(frozen=True)
class TrapParams:
    """Linear Paul trap.

    omega_i is the angular frequency of the static (axial) confinement,
    Omega_rf the rf drive angular frequency and q the Mathieu rf parameter.
    The Mathieu a parameter of the radial motion follows as -2 omega_i^2 / Omega_rf^2.
    """
    omega_i: float
    Omega_rf: float
    q: float

    def __post_init__(self):
        if not self.Omega_rf > 0:
            raise ValueError("Omega_rf must be positive")
        if abs(self.q) >= 0.9:
            raise ValueError("|q| must be below 0.9")
        if self.omega_i < 0:
            raise ValueError("omega_i must be non-negative")

    @property
    def a(self) -> float:
        return -2.0 * self.omega_i**2 / self.Omega_rf**2

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.Omega_rf

    def is_stable(self) -> bool:
        try:
            mathieu_exponent(self.a, self.q)
        except TrapInstabilityError:
            return False
        return True


def static_field(r, trap: TrapParams, ion: Species) -> np.ndarray:
    """Static quadrupole field (V/m) at position r (m)."""
    x, y, z = np.asarray(r, dtype=float)
    k = ion.mass * trap.omega_i**2 / E_CHARGE
    return np.array([k * x / 2, k * y / 2, -k * z])


def rf_field(r, t, trap: TrapParams, ion: Species) -> np.ndarray:
    """Oscillating rf quadrupole field (V/m) at position r and time t."""
    x, y, _ = np.asarray(r, dtype=float)
    amp = ion.mass * trap.Omega_rf**2 * trap.q / (2 * E_CHARGE) * math.cos(trap.Omega_rf * t)
    return np.array([amp * x, -amp * y, 0.0])


def ion_field(r, r_ion=(0.0, 0.0, 0.0), charge: int = 1) -> np.ndarray:
    """Coulomb field of a point charge located at r_ion."""
    sep = np.asarray(r, dtype=float) - np.asarray(r_ion, dtype=float)
    dist = np.linalg.norm(sep)
    if dist == 0:
        raise SingularConfigurationError("field evaluated at the ion position")
    return charge * E_CHARGE * K_COULOMB * sep / dist**3


def char_lengths(trap: TrapParams, ion: Species) -> dict:
    """Distances where the static trap field balances the ion field (axial and transverse)."""
    if not trap.omega_i > 0:
        raise ValueError("omega_i must be positive")
    ell_z = (E_CHARGE**2 * K_COULOMB / (ion.mass * trap.omega_i**2)) ** (1 / 3)
    return {"ell_z": ell_z, "ell_perp": 2 ** (2 / 3) * ell_z}


def rf_crossover_distance(trap: TrapParams, ion: Species) -> float:
    """Radial distance where the peak rf field equals the ion's Coulomb field."""
    return (2 * E_CHARGE**2 * K_COULOMB / (ion.mass * trap.Omega_rf**2 * trap.q)) ** (1 / 3)


def _cf_beta_squared(beta, a, q, depth):
    q2 = q * q
    up = down = 0.0
    for k in range(depth, 0, -1):
        up = q2 / ((beta + 2 * k) ** 2 - a - up)
        down = q2 / ((beta - 2 * k) ** 2 - a - down)
    return a + up + down


def _beta_at_depth(a, q, depth):
    b2 = a + q * q / 2
    if b2 <= 0:
        raise TrapInstabilityError(f"a={a}, q={q}: no real characteristic exponent")
    beta = math.sqrt(b2)
    for _ in range(500):
        b2 = _cf_beta_squared(beta, a, q, depth)
        if b2 <= 0:
            raise TrapInstabilityError(f"a={a}, q={q}: characteristic exponent is imaginary")
        new = math.sqrt(b2)
        if abs(new - beta) < 1e-15:
            return new
        beta = new
    raise TrapInstabilityError(f"a={a}, q={q}: continued fraction did not settle")


def mathieu_exponent(a: float, q: float, tol: float = 1e-10) -> float:
    """Characteristic exponent beta of x'' + (a - 2q cos 2tau) x = 0.

    Continued-fraction solution; the truncation depth doubles until beta
    changes by less than ``tol``.
    """
    depth = 2
    beta = _beta_at_depth(a, q, depth)
    while True:
        depth *= 2
        new = _beta_at_depth(a, q, depth)
        if abs(new - beta) < tol:
            beta = new
            break
        beta = new
        if depth > 4096:
            raise TrapInstabilityError("continued fraction depth exceeded")
    if not 0 < beta < 1:
        raise TrapInstabilityError(f"a={a}, q={q}: outside the lowest stability region")
    return beta


def secular_frequency(trap: TrapParams) -> float:
    """Radial secular angular frequency beta * Omega_rf / 2."""
    return mathieu_exponent(trap.a, trap.q) * trap.Omega_rf / 2


def secular_frequency_lowest_order(trap: TrapParams) -> float:
    """Small-(a, q) estimate (Omega_rf / 2) sqrt(a + q^2 / 2)."""
    return trap.Omega_rf / 2 * math.sqrt(trap.a + trap.q**2 / 2)


def pseudopotential_frequency(trap: TrapParams) -> float:
    """omega_i = Omega_rf q / 2^(3/2), the secular frequency used for pure-rf radial motion."""
    return trap.Omega_rf * trap.q / 2**1.5


# --- transverse geometry: ion near the origin, atom near x = d -------------

def _trap_factor(t, trap: TrapParams | None):
    """omega_i^2 + Omega_rf^2 q cos(Omega_rf t); zero when the trap is switched off."""
    if trap is None:
        return 0.0
    try:
        c = math.cos(trap.Omega_rf * t)
    except TypeError:  # high-precision scalars
        import mpmath
        c = mpmath.cos(trap.Omega_rf * t)
    return trap.omega_i**2 + trap.Omega_rf**2 * trap.q * c


def field_norm_sq(x_a, x_i, t, d, trap: TrapParams | None, ion: Species):
    """|E_ion + E_trap|^2 at the atom in the transverse geometry, (V/m)^2.

    The ion sits at x_i, the atom at d + x_a, all on the trap's x axis. Pass
    ``trap=None`` to keep only the ion's Coulomb field. Plain arithmetic is
    used so that high-precision scalar types pass through.
    """
    sep = x_a - x_i + d
    if sep == 0:
        raise SingularConfigurationError("atom and ion coincide")
    X = x_a + d
    Q = _trap_factor(t, trap)
    m, e, k = ion.mass, E_CHARGE, K_COULOMB
    return (m * m / (4 * e * e) * X * X * Q * Q
            + e * e * k * k / sep**4
            + m * k * X * Q / sep**2)


def _power_derivative(p, order, x):
    """d^order/dx^order of x**p."""
    c = 1.0
    for s in range(order):
        c *= p - s
    return c * x ** (p - order)


def field_norm_derivatives(d, t, trap: TrapParams | None, ion: Species, max_order: int = 3) -> dict:
    """Closed-form partials of field_norm_sq at x_i = x_a = 0.

    Returns ``{(j, k): d^(j+k) f / dx_i^j dx_a^k}`` for j + k <= max_order.
    """
    Q = _trap_factor(t, trap)
    m, e, k = ion.mass, E_CHARGE, K_COULOMB
    P = m * m * Q * Q / (4 * e * e)
    C = e * e * k * k
    B = m * k * Q
    out = {}
    for n in range(max_order + 1):
        for j in range(n + 1):
            ka = n - j
            sign = (-1) ** j
            val = 0.0
            if j == 0 and ka < 3:
                val += P * (d * d, 2 * d, 2.0)[ka]
            val += sign * C * _power_derivative(-4, n, d)
            val += sign * B * (d * _power_derivative(-2, n, d)
                               + (ka * _power_derivative(-2, n - 1, d) if ka else 0.0))
            out[(j, ka)] = val
    return out


def field_norm_sq_3d(r_atom, r_ion, t, trap: TrapParams | None, ion: Species) -> float:
    """|E_ion + E_s + E_rf|^2 at an arbitrary atom position (general geometry)."""
    E = ion_field(r_atom, r_ion)
    if trap is not None:
        E = E + static_field(r_atom, trap, ion) + rf_field(r_atom, t, trap, ion)
    return float(E @ E)


def field_norm_gradient(x_a, x_i, t, d, trap: TrapParams | None, ion: Species) -> tuple:
    """(df/dx_a, df/dx_i) of field_norm_sq at an arbitrary configuration."""
    X = x_a + d
    s = X - x_i
    if s == 0:
        raise SingularConfigurationError("atom and ion coincide")
    Q = _trap_factor(t, trap)
    m, e, k = ion.mass, E_CHARGE, K_COULOMB
    P = m * m * Q * Q / (4 * e * e)
    C = e * e * k * k
    B = m * k * Q
    d_ion = 4 * C / s**5 + 2 * B * X / s**3
    d_atom = 2 * P * X - 4 * C / s**5 + B / s**2 - 2 * B * X / s**3
    return d_atom, d_ion
