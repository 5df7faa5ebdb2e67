"""Rydberg-dressed atom-ion potential.

A ground-state atom is weakly coupled to a Rydberg level whose energy is
lowered by the ion field. Eliminating the Rydberg level gives a soft-core
attractive potential of depth A and width R_w. In a Paul trap the field
strength that enters the Rydberg shift also contains the trap fields, which
makes the potential depend on both positions and on the rf phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .constants import E_CHARGE, HBAR, K_COULOMB, AU_POLARIZABILITY
from .rydberg import BasisSpec, RydbergState, make_state, polarizability
from .species import Species, reduced_mass
from .trap import TrapParams, field_norm_derivatives, field_norm_sq


class LevelCrossingError(RuntimeError):
    """The dressed ground state lost its ground-state character (red-detuned crossing)."""


class DressingRegimeError(ValueError):
    """Parameters outside the weak-dressing regime."""


def c4_from_alpha(alpha: float) -> float:
    """C4 = alpha e^2 k_C^2 / 2 in J m^4 for alpha in C m^2/V."""
    return alpha * E_CHARGE**2 * K_COULOMB**2 / 2


def alpha_from_c4(c4: float) -> float:
    return 2 * c4 / (E_CHARGE**2 * K_COULOMB**2)


@lru_cache(maxsize=None)
def _rydberg_alpha(species: Species, n: int, l: int, j: float) -> float:
    state = make_state(species, n, l, j)
    basis = BasisSpec(max(n - 5, l + 1), n + 5, min(3, n + 4))
    return polarizability(state, species, basis)


def rydberg_polarizability(species: Species, n: int = 30, l: int = 0, j: float = 0.5) -> float:
    """Static polarizability (C m^2/V) of a Rydberg level from a n +- 5, l <= 3 basis."""
    return _rydberg_alpha(species, n, l, j)


@dataclass(frozen=True)
class DressingParams:
    """Dressing lasers and the polarizability of the admixed Rydberg level.

    All frequencies are angular (rad/s). ``Delta0 > 0`` is blue detuning.
    ``alpha`` is the Rydberg polarizability in C m^2/V; if omitted it is
    computed for ``target_state`` of ``atom``.
    """
    Omega: float
    Delta0: float
    Omega_d: float = 0.0
    Delta_d: float = 0.0
    target_state: RydbergState | None = None
    atom: Species | None = field(default=None, compare=False)
    alpha: float | None = None
    min_ratio: float = 10.0

    def __post_init__(self):
        if self.Omega != 0 and abs(self.Delta0) < self.min_ratio * abs(self.Omega):
            raise DressingRegimeError(
                f"|Delta0/Omega| = {abs(self.Delta0 / self.Omega):.3g} is below {self.min_ratio}")
        if self.alpha is None:
            if self.atom is None:
                raise ValueError("give either alpha or atom (with an optional target_state)")
            st = self.target_state
            n, l, j = (30, 0, 0.5) if st is None else (st.n, st.l, st.j)
            object.__setattr__(self, "alpha", rydberg_polarizability(self.atom, n, l, j))

    @property
    def c4(self) -> float:
        return c4_from_alpha(self.alpha)

    @property
    def light_shift(self) -> float:
        """hbar Omega^2 / Delta0, the far-field energy shift of the ground state (J)."""
        return HBAR * self.Omega**2 / self.Delta0

    def scaled(self, Omega_factor: float) -> "DressingParams":
        return DressingParams(self.Omega * Omega_factor, self.Delta0, self.Omega_d, self.Delta_d,
                              self.target_state, self.atom, self.alpha, self.min_ratio)


@dataclass(frozen=True)
class AdiabaticPotential:
    """V(R) = -A R_w^4 / (R^4 + R_w^4)."""
    A: float
    R_w: float
    C4: float

    def __post_init__(self):
        if not (self.A > 0 and self.R_w > 0):
            raise ValueError("A and R_w must be positive")

    @classmethod
    def from_dressing(cls, params: DressingParams, c4: float | None = None) -> "AdiabaticPotential":
        if not params.Delta0 > 0:
            raise DressingRegimeError("the dressed potential needs blue detuning (Delta0 > 0)")
        c4 = params.c4 if c4 is None else c4
        A = HBAR * params.Omega**2 / params.Delta0
        R_w = (c4 / (HBAR * params.Delta0)) ** 0.25
        return cls(A, R_w, c4)

    def __call__(self, R):
        return v_dressed(R, self)

    @property
    def force_maximum_distance(self) -> float:
        """Separation where dV/dR peaks, (3/5)^(1/4) R_w."""
        return 0.6**0.25 * self.R_w


def v_dressed(R, pot: AdiabaticPotential):
    """Dressed potential in J at separation R (m)."""
    R = np.asarray(R, dtype=float)
    if np.any(R < 0):
        raise ValueError("R must be non-negative")
    Rw4 = pot.R_w**4
    out = -pot.A * Rw4 / (R**4 + Rw4)
    return float(out) if out.ndim == 0 else out


def force_profile(d, pot: AdiabaticPotential) -> dict:
    """Analytic derivatives of V at separation d.

    Returns ``F`` = dV/dR (N, positive means attraction), ``curvature`` =
    d^2V/dR^2 (N/m) and ``third`` = d^3V/dR^3 (N/m^2).
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("d must be positive")
    A, w4 = pot.A, pot.R_w**4
    s = d**4 + w4
    F = 4 * A * w4 * d**3 / s**2
    V2 = 4 * A * w4 * d**2 * (3 * w4 - 5 * d**4) / s**3
    V3 = 24 * A * w4 * d * (5 * d**8 - 10 * w4 * d**4 + w4**2) / s**4
    if d.ndim == 0:
        return {"F": float(F), "curvature": float(V2), "third": float(V3)}
    return {"F": F, "curvature": V2, "third": V3}


def ground_length(atom: Species, ion: Species) -> float:
    """R* = sqrt(2 mu C4_g) / hbar for the bare ground-state atom-ion C4."""
    alpha_g = atom.ground_polarizability_au * AU_POLARIZABILITY
    mu = reduced_mass(atom, ion)
    return math.sqrt(2 * mu * c4_from_alpha(alpha_g)) / HBAR


def _three_level_matrix(params: DressingParams, shift: float) -> np.ndarray:
    # |g>, |e>, |R> in units of hbar (rad/s); shift is the ion-induced Rydberg shift in rad/s
    return np.array([[0.0, params.Omega_d, params.Omega],
                     [params.Omega_d, -params.Delta_d, 0.0],
                     [params.Omega, 0.0, -params.Delta0 - shift]])


def _ground_branch(H: np.ndarray, index: int | None = None) -> tuple[float, float, int]:
    """Eigenvalue and ground weight of the branch ``index`` (energy order).

    Without ``index`` the branch of largest ground weight is chosen.
    """
    w, v = np.linalg.eigh(H)
    weights = v[0] ** 2
    k = int(np.argmax(weights)) if index is None else index
    return w[k], weights[k], k


def three_level_ground(R, params: DressingParams, c4: float | None = None,
                       r_star: float | None = None) -> float:
    """Exact R-dependent energy (J) of the dressed ground state.

    Diagonalises the three-level Hamiltonian with the Rydberg level lowered
    by C4/R^4 and follows the adiabatic branch that has ground character far
    from the ion (same position in the energy ordering, since the branches
    of a Hermitian matrix along a one-parameter path do not cross here).
    The far-field value (dipole-trap light shift and dressing light shift) is
    subtracted, so the result vanishes as R grows.
    """
    if R <= 0 or (r_star is not None and R <= r_star):
        raise ValueError(f"R = {R} m is inside the ground-state length scale")
    c4 = params.c4 if c4 is None else c4
    E_far, _, k = _ground_branch(_three_level_matrix(params, 0.0))
    E, weight, _ = _ground_branch(_three_level_matrix(params, c4 / (HBAR * R**4)), k)
    if weight < 0.5:
        raise LevelCrossingError(f"ground-state weight {weight:.3f} at R = {R:.3e} m")
    return HBAR * (E - E_far)


# --- trap-modified potential ------------------------------------------------

def _xis(params: DressingParams):
    return HBAR * params.Omega**2, params.Delta0, params.alpha / (2 * HBAR)


def v_tilde(x_i, x_a, t, d, dressing: DressingParams, trap: TrapParams | None, ion: Species):
    """hbar Omega^2 / (Delta0 + alpha |E|^2 / 2 hbar) in the transverse geometry (J).

    Tends to hbar Omega^2 / Delta0 (not zero) far from the ion; subtract
    ``dressing.light_shift`` to compare with ``v_dressed``.
    """
    xi1, xi2, xi3 = _xis(dressing)
    return xi1 / (xi2 + xi3 * field_norm_sq(x_a, x_i, t, d, trap, ion))


@dataclass(frozen=True)
class TaylorCoeffs:
    """Partial derivatives of the potential at x_i = x_a = 0.

    ``values[(j, k)]`` is d^(j+k) V / dx_i^j dx_a^k in J/m^(j+k); the Taylor
    polynomial weights them with 1/(j! k!).
    """
    values: dict
    t: float
    d: float

    def __getitem__(self, key):
        return self.values[key]

    @property
    def V00(self) -> float:
        return self.values[(0, 0)]

    def polynomial(self, x_i, x_a, order: int = 3):
        total = 0.0
        for (j, k), c in self.values.items():
            if j + k <= order:
                total = total + c * x_i**j * x_a**k / (math.factorial(j) * math.factorial(k))
        return total


def _composite_derivatives(fd: dict, g: tuple, max_order: int) -> dict:
    """Chain rule for V = g(f) up to third order in (x_i, x_a)."""
    out = {(0, 0): g[0]}
    for n in range(1, max_order + 1):
        for j in range(n + 1):
            idx = (0,) * j + (1,) * (n - j)
            out[(j, n - j)] = _faa_di_bruno(idx, fd, g)
    return out


def _partitions(items):
    # set partitions of a small tuple of positions
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for size in range(len(rest) + 1):
        for chosen in combinations(rest, size):
            block = (first,) + chosen
            remaining = tuple(x for x in rest if x not in chosen)
            for tail in _partitions(remaining):
                yield [block] + tail


def _faa_di_bruno(idx, fd, g):
    total = 0.0
    for part in _partitions(tuple(range(len(idx)))):
        term = g[len(part)]
        for block in part:
            j = sum(1 for p in block if idx[p] == 0)
            term *= fd[(j, len(block) - j)]
        total += term
    return total


def _g_derivatives(f, dressing: DressingParams):
    xi1, xi2, xi3 = _xis(dressing)
    D = xi2 + xi3 * f
    return (xi1 / D, -xi1 * xi3 / D**2, 2 * xi1 * xi3**2 / D**3, -6 * xi1 * xi3**3 / D**4)


def taylor3(d, t, dressing: DressingParams, trap: TrapParams | None, ion: Species,
            relative: bool = True) -> TaylorCoeffs:
    """Closed-form derivatives of the trap-modified potential up to third order.

    With ``relative`` the far-field light shift is removed from V(0,0), so
    that with the trap off V(0,0) equals the dressed potential at d.
    """
    fd = field_norm_derivatives(d, t, trap, ion, max_order=3)
    g = _g_derivatives(fd[(0, 0)], dressing)
    vals = _composite_derivatives(fd, g, 3)
    if relative:
        vals[(0, 0)] -= dressing.light_shift
    return TaylorCoeffs(vals, t, d)


def _rf_phases(trap: TrapParams | None, samples: int):
    if trap is None:
        return np.zeros(1)
    return np.arange(samples) * trap.period / samples


def ion_force_average(d, dressing: DressingParams, trap: TrapParams | None, ion: Species,
                      method: str = "factorized", samples: int = 64) -> float:
    """rf-period average of dV/dx_i at the origin (J/m).

    ``factorized`` averages the field norm and its ion-coordinate derivative
    separately before applying the chain rule; ``exact`` averages the full
    derivative. Uniform sampling is exact for the trigonometric polynomials
    involved once ``samples`` exceeds 4.
    """
    ts = _rf_phases(trap, samples)
    tabs = [field_norm_derivatives(d, t, trap, ion, max_order=1) for t in ts]
    if method == "factorized":
        f_mean = np.mean([tb[(0, 0)] for tb in tabs])
        fi_mean = np.mean([tb[(1, 0)] for tb in tabs])
        return _g_derivatives(f_mean, dressing)[1] * fi_mean
    if method == "exact":
        return float(np.mean([_g_derivatives(tb[(0, 0)], dressing)[1] * tb[(1, 0)] for tb in tabs]))
    raise ValueError("method must be 'factorized' or 'exact'")


def match_drive(d, dressing: DressingParams, trap: TrapParams | None, ion: Species,
                omega_ion: float, method: str = "factorized") -> float:
    """Ion drive strength eta*Omega (rad/s) that cancels the linear ion force.

    The gate Hamiltonian carries V'_{1,0} x_i (1 + cos w_v t)/2 on the atom-up
    sector and eta hbar Omega cos(w_v t)(a + a^dag) on the ion-up sector; the
    two cos(w_v t) coefficients of (a + a^dag) cancel when
    eta Omega = -<V'_{1,0}> ell_i / (2 hbar), ell_i = sqrt(hbar / 2 m_i omega_ion).
    """
    ell_i = math.sqrt(HBAR / (2 * ion.mass * omega_ion))
    return -ion_force_average(d, dressing, trap, ion, method) * ell_i / (2 * HBAR)


def lifetime_enhancement(dressing: DressingParams) -> float:
    """Inverse Rydberg admixture (Delta0 / Omega)^2."""
    if not abs(dressing.Delta0) > abs(dressing.Omega):
        raise DressingRegimeError("needs |Delta0| > |Omega|")
    return (dressing.Delta0 / dressing.Omega) ** 2
