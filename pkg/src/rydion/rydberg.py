"""Quantum-defect Rydberg states, Numerov radial functions, matrix elements
and static polarizabilities of alkali Rydberg levels."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import cache
from .angular import angular_element
from .constants import AU_POLARIZABILITY, HARTREE, M_E
from .species import Species


class MissingDefectWarning(UserWarning):
    pass


class NumerovError(RuntimeError):
    """Numerov integration produced an unusable radial function."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes


class DegenerateDenominatorError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class RydbergState:
    n: int
    l: int
    j: float
    m_j: float
    energy: float  # J

    def __post_init__(self):
        if not 0 <= self.l < self.n:
            raise ValueError(f"need 0 <= l < n, got n={self.n}, l={self.l}")
        if abs(abs(self.j - self.l) - 0.5) > 1e-12:
            raise ValueError("j must be l +- 1/2")
        if abs(self.m_j) > self.j + 1e-12 or abs((self.m_j - self.j) % 1) > 1e-12:
            raise ValueError("invalid m_j")
        if not self.energy < 0:
            raise ValueError("bound state energy must be negative")

    @property
    def label(self) -> str:
        letters = "SPDFGHIKLMNOQRTUV"
        lsym = letters[self.l] if self.l < len(letters) else f"[l={self.l}]"
        return f"{self.n}{lsym}{int(round(2 * self.j))}/2 mj={int(round(2 * self.m_j))}/2"


def effective_n(species: Species, n: int, l: int, j: float) -> tuple[float, bool]:
    """n* = n - delta and a flag that is True when the hydrogenic fallback was used."""
    if species.defects is None:
        return float(n), True
    delta, found = species.defects.lookup(n, l, j)
    return n - delta, not found


def defect_energy(species: Species, n: int, l: int, j: float, warn: bool = False) -> float:
    """Binding energy -hcR_M / n*^2 in J."""
    if not 0 <= l < n or abs(abs(j - l) - 0.5) > 1e-12:
        raise ValueError(f"invalid quantum numbers n={n}, l={l}, j={j}")
    nstar, fallback = effective_n(species, n, l, j)
    if fallback and warn:
        warnings.warn(f"no quantum defect for {species.name} l={l} j={j}; using 0",
                      MissingDefectWarning, stacklevel=2)
    return -species.rydberg_energy / nstar**2


def make_state(species: Species, n: int, l: int, j: float, m_j: float = 0.5) -> RydbergState:
    n, l, j, m_j = int(n), int(l), float(j), float(m_j)
    return RydbergState(n, l, j, m_j, defect_energy(species, n, l, j))


# --- Numerov --------------------------------------------------------------

@dataclass(frozen=True)
class StepSpec:
    """Grid control for the Numerov solver.

    The radial grid is uniform in x = sqrt(r) with spacing ``h`` (units sqrt(a0)).
    ``r_min``/``r_max`` override the default inner stop and outer start radii.
    ``converge`` halves ``h`` until <r> changes by less than 1e-6 relative.
    """
    h: float = 0.01
    r_min: float | None = None
    r_max: float | None = None
    converge: bool = False


@dataclass(frozen=True)
class RadialWavefunction:
    grid: np.ndarray     # radii in a0
    values: np.ndarray   # u(r) = r R(r)
    state: RydbergState
    norm_check: float
    h: float = 0.01
    start_index: int = 0
    species_name: str = ""
    nodes: int = field(default=0)

    @property
    def x(self) -> np.ndarray:
        return np.sqrt(self.grid / self.grid_scale)

    @property
    def grid_scale(self) -> float:
        # r = scale * x^2; scale = m_e / mu folds in the finite core mass
        k = self.start_index
        return self.grid[0] / (k * self.h) ** 2 if k > 0 else 1.0


def _count_nodes(w: np.ndarray) -> int:
    s = np.sign(w[np.abs(w) > 1e-12 * np.max(np.abs(w))])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _numerov_inward(nstar, l, h, k_in, k_out):
    """Inward Numerov for w(x) with u = sqrt(x) w and r = x^2 (reduced atomic units)."""
    E = -0.5 / nstar**2
    k = np.arange(k_in, k_out + 1)
    x = h * k
    g = ((2 * l + 1) ** 2 - 0.25) / x**2 - 8.0 - 8.0 * E * x**2
    F = (1.0 - h * h * g / 12.0).tolist()
    n = len(F)
    w = [0.0] * n
    w[-1] = 0.0
    w[-2] = 1e-20
    for i in range(n - 2, 0, -1):
        w[i - 1] = ((12.0 - 10.0 * F[i]) * w[i] - F[i + 1] * w[i + 1]) / F[i - 1]
        if abs(w[i - 1]) > 1e250:  # rescale deep in the forbidden region
            scale = 1e-250
            for m in range(i - 1, n):
                w[m] *= scale
    return x, np.asarray(w)


def _descriptor(species, state, h, r_in, r_out):
    return {"species": species.name, "n": state.n, "l": state.l, "j": state.j,
            "nstar": repr(effective_n(species, state.n, state.l, state.j)[0]),
            "h": repr(h), "r_in": repr(r_in), "r_out": repr(r_out), "mass": repr(species.mass)}


def numerov_radial(state: RydbergState, species: Species, step_spec: StepSpec | None = None
                   ) -> RadialWavefunction:
    """Radial function of ``state`` by inward Numerov integration at the defect energy."""
    spec = step_spec or StepSpec()
    if spec.converge:
        return _converged(state, species, spec)
    return _with_state(_numerov_cached(state.n, state.l, state.j, species, spec), state)


def _with_state(wf: RadialWavefunction, state: RydbergState) -> RadialWavefunction:
    if wf.state == state:
        return wf
    return RadialWavefunction(wf.grid, wf.values, state, wf.norm_check, wf.h, wf.start_index,
                              wf.species_name, wf.nodes)


def _converged(state, species, spec):
    h = spec.h
    prev = None
    for _ in range(8):
        sub = StepSpec(h, spec.r_min, spec.r_max, False)
        wf = numerov_radial(state, species, sub)
        mean_r = radial_moment(wf, wf, 1)
        if prev is not None and abs(mean_r / prev - 1) < 1e-6:
            return wf
        prev = mean_r
        h /= 2
    raise NumerovError("step halving did not converge", wf.nodes)


@lru_cache(maxsize=4096)
def _numerov_cached(n, l, j, species: Species, spec: StepSpec) -> RadialWavefunction:
    nstar, _ = effective_n(species, n, l, j)
    energy = -species.rydberg_energy / nstar**2
    state = RydbergState(n, l, j, j, energy)
    scale = M_E / species.electron_reduced_mass  # reduced Bohr radius in a0
    r_out = spec.r_max if spec.r_max is not None else 2.0 * n * (n + 15)
    if spec.r_min is not None:
        r_in = spec.r_min
    else:
        disc = nstar**2 - (l + 0.5) ** 2
        r_in = nstar * (nstar - math.sqrt(disc)) if disc > 0 else nstar**2
    h = spec.h
    # work in reduced units, so convert the radial limits
    k_in = max(1, int(math.ceil(math.sqrt(r_in / scale) / h)))
    k_out = int(math.floor(math.sqrt(r_out / scale) / h))
    desc = _descriptor(species, state, h, r_in, r_out)
    hit = cache.load(desc)
    if hit is not None:
        grid, u = hit
        nodes = _count_nodes(u)
        return RadialWavefunction(grid, u, state, _norm(grid, u, h, scale), h, k_in,
                                  species.name, nodes)
    x, w = _numerov_inward(nstar, l, h, k_in, k_out)
    norm = 2.0 * h * np.sum(x**2 * w**2) * scale
    if not np.isfinite(norm) or norm <= 0:
        raise NumerovError(f"normalisation failed for n={n} l={l}")
    # int u^2 dr = 2 scale h sum x^2 w^2 with r = scale x^2
    u = np.sqrt(x) * w / math.sqrt(norm)
    grid = scale * x**2
    nodes = _count_nodes(w)
    if nodes != n - l - 1:
        raise NumerovError(f"node count {nodes} != n-l-1={n - l - 1} for n={n} l={l} j={j}",
                           nodes)
    cache.store(desc, grid, u)
    return RadialWavefunction(grid, u, state, _norm(grid, u, h, scale), h, k_in,
                              species.name, nodes)


def _norm(grid, u, h, scale):
    x = np.sqrt(grid / scale)
    return float(2.0 * h * scale * np.sum(x * u * u))


def radial_moment(w1: RadialWavefunction, w2: RadialWavefunction, k: int) -> float:
    """int u1 r^k u2 dr (a0^k), trapezoidal in x = sqrt(r)."""
    if k not in (0, 1, 2, 3):
        raise ValueError("k must be 0..3")
    if w1.species_name != w2.species_name:
        raise ValueError("wavefunctions belong to different species")
    s1, s2 = w1.grid_scale, w2.grid_scale
    if w1.h == w2.h and abs(s1 / s2 - 1) < 1e-12:
        lo = max(w1.start_index, w2.start_index)
        hi = min(w1.start_index + len(w1.grid), w2.start_index + len(w2.grid))
        if hi <= lo:
            return 0.0
        a = w1.values[lo - w1.start_index:hi - w1.start_index]
        b = w2.values[lo - w2.start_index:hi - w2.start_index]
        r = w1.grid[lo - w1.start_index:hi - w1.start_index]
        x = np.sqrt(r / s1)
        return float(2.0 * w1.h * s1 * np.sum(a * b * r**k * x))
    return _moment_interpolated(w1, w2, k)


def _moment_interpolated(w1, w2, k):
    from scipy.interpolate import CubicSpline
    x1 = np.sqrt(w1.grid)
    x2 = np.sqrt(w2.grid)
    lo, hi = max(x1[0], x2[0]), min(x1[-1], x2[-1])
    if hi <= lo:
        return 0.0
    h = min(w1.h * math.sqrt(w1.grid_scale), w2.h * math.sqrt(w2.grid_scale))
    xs = np.arange(lo, hi, h)
    a = CubicSpline(x1, w1.values)(xs)
    b = CubicSpline(x2, w2.values)(xs)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("grid-mismatch interpolation failure")
    return float(np.trapz(2 * xs * a * b * xs ** (2 * k), xs))


# --- basis and polarizability --------------------------------------------

@dataclass(frozen=True)
class BasisSpec:
    n_min: int
    n_max: int
    l_max: int
    include_spin_orbit: bool = True
    m_j: tuple | None = (0.5,)   # None keeps every projection

    def __post_init__(self):
        if self.n_min > self.n_max:
            raise ValueError("n_min must not exceed n_max")
        if self.l_max >= self.n_max:
            raise ValueError("l_max must be below n_max")


def basis_states(species: Species, basis: BasisSpec) -> list[RydbergState]:
    """States ordered by (l, j, n, m_j)."""
    out = []
    for l in range(basis.l_max + 1):
        for j in (l - 0.5, l + 0.5):
            if j < 0:
                continue
            for n in range(max(basis.n_min, l + 1), basis.n_max + 1):
                E = defect_energy(species, n, l, j)
                mjs = [-j + i for i in range(int(round(2 * j)) + 1)]
                if basis.m_j is not None:
                    mjs = [m for m in mjs if any(abs(m - s) < 1e-9 for s in basis.m_j)]
                for mj in mjs:
                    out.append(RydbergState(n, l, j, mj, E))
    return out


def dipole_z_au(a: RydbergState, b: RydbergState, species: Species,
                step_spec: StepSpec | None = None) -> float:
    """<a| z |b> in atomic units (z = r C^1_0)."""
    if abs(a.l - b.l) != 1 or a.m_j != b.m_j:
        return 0.0
    ang = angular_element((a.l, a.j, a.m_j), (b.l, b.j, b.m_j), ("dipole", 0))
    if ang == 0:
        return 0.0
    wa = numerov_radial(a, species, step_spec)
    wb = numerov_radial(b, species, step_spec)
    return float(np.real(ang)) * radial_moment(wa, wb, 1)


def polarizability(state: RydbergState, species: Species, basis: BasisSpec,
                   step_spec: StepSpec | None = None, units: str = "SI") -> float:
    """Static scalar+tensor polarizability along z, 2 sum |<k|z|s>|^2 / (E_k - E_s).

    Sign convention: alpha > 0 lowers the energy in a field (-alpha F^2 / 2);
    for Li nS near n = 30 the dominant partners lie above so alpha > 0.
    Returns C m^2 / V, or atomic units with ``units="au"``.
    """
    spec = BasisSpec(basis.n_min, basis.n_max, basis.l_max, basis.include_spin_orbit,
                     (state.m_j,))
    partners = [s for s in basis_states(species, spec) if abs(s.l - state.l) == 1]
    if not partners:
        raise ValueError("basis has no dipole partners of the state")
    spacing = species.rydberg_energy * 2 / state.n**3
    total = 0.0
    for k in partners:
        dE = k.energy - state.energy
        if abs(dE) < 1e-6 * spacing:
            raise DegenerateDenominatorError(f"{k.label} is degenerate with {state.label}")
        d = dipole_z_au(k, state, species, step_spec)
        total += d * d / (dE / HARTREE)
    alpha_au = 2.0 * total
    return alpha_au if units == "au" else alpha_au * AU_POLARIZABILITY
