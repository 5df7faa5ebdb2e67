"""Born-Oppenheimer potential curves of a Rydberg electron in the field of an ion.

The atom-ion interaction is expanded to second order in r/R: the charge-dipole
coupling, the mass-weighted charge-quadrupole terms, and the ion-induced
spin-orbit coupling (momentum replaced by the commutator with H0). Matrices are
assembled in a spin-orbit coupled quantum-defect basis with the quantization
axis chosen by the caller (default: along R, which conserves m_j).
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .angular import (coupled_states, projection_matrix, projection_sq_matrix,
                      spin_cross_matrix)
from .constants import (ALPHA_FS, A0, AU_FIELD, E_CHARGE, HARTREE, H_PLANCK,
                        K_COULOMB, M_E)
from .rydberg import (BasisSpec, RydbergState, StepSpec, basis_states,
                      numerov_radial, polarizability)
from .species import Species
from .trap import TrapParams, rf_field, static_field

PHASES = {"max+": 1.0, "zero": 0.0, "max-": -1.0}


class CurveAssignmentWarning(UserWarning):
    pass


@dataclass
class _Group:
    l: int
    j: float
    ns: list
    mjs: list
    start: int

    @property
    def size(self):
        return len(self.ns) * len(self.mjs)


class BOBasis:
    """Basis states plus the R-independent operator matrices (atomic units)."""

    def __init__(self, species: Species, basis: BasisSpec, step_spec: StepSpec | None = None):
        self.species = species
        self.spec = basis
        self.states = basis_states(species, basis)
        self.energies = np.array([s.energy for s in self.states])  # J
        self.step_spec = step_spec
        self.groups: list[_Group] = []
        for idx, s in enumerate(self.states):
            g = self.groups[-1] if self.groups else None
            if g is None or (g.l, g.j) != (s.l, s.j):
                g = _Group(s.l, s.j, [], [], idx)
                self.groups.append(g)
            if s.n not in g.ns:
                g.ns.append(s.n)
            if s.m_j not in g.mjs:
                g.mjs.append(s.m_j)
        self._radial = self._radial_matrices()
        self._ops: dict = {}

    def __len__(self):
        return len(self.states)

    def _radial_matrices(self):
        """<n l j| r^k |n' l' j'> for k = 1, 2 over all radial functions."""
        keys = [(n, g.l, g.j) for g in self.groups for n in g.ns]
        index = {k: i for i, k in enumerate(keys)}
        wfs = []
        for n, l, j in keys:
            st = RydbergState(n, l, j, j, -1.0)
            wfs.append(numerov_radial(st, self.species, self.step_spec))
        h = wfs[0].h
        scale = wfs[0].grid_scale
        lo = min(w.start_index for w in wfs)
        hi = max(w.start_index + len(w.grid) for w in wfs)
        W = np.zeros((len(wfs), hi - lo))
        for i, w in enumerate(wfs):
            if w.h != h or abs(w.grid_scale / scale - 1) > 1e-12:
                raise ValueError("radial functions on incompatible grids")
            W[i, w.start_index - lo:w.start_index - lo + len(w.grid)] = w.values
        x = h * np.arange(lo, hi)
        r = scale * x**2
        weight = 2.0 * h * scale * x
        M1 = (W * (weight * r)) @ W.T
        M2 = (W * (weight * r * r)) @ W.T
        return index, M1, M2

    def radial_block(self, g1: _Group, g2: _Group, k: int) -> np.ndarray:
        index, M1, M2 = self._radial
        M = M1 if k == 1 else M2
        rows = [index[(n, g1.l, g1.j)] for n in g1.ns]
        cols = [index[(n, g2.l, g2.j)] for n in g2.ns]
        return M[np.ix_(rows, cols)]

    @staticmethod
    def _angular_block(A: np.ndarray, g1: _Group, g2: _Group) -> np.ndarray:
        cs1, cs2 = coupled_states(g1.l), coupled_states(g2.l)
        rows = [cs1.index((g1.j, m)) for m in g1.mjs]
        cols = [cs2.index((g2.j, m)) for m in g2.mjs]
        return A[np.ix_(rows, cols)]

    def _energy_block(self, g1, g2):
        e1 = np.array([self.energies[g1.start + i * len(g1.mjs)] for i in range(len(g1.ns))])
        e2 = np.array([self.energies[g2.start + i * len(g2.mjs)] for i in range(len(g2.ns))])
        return (e1[:, None] - e2[None, :]) / HARTREE

    def operators(self, direction=(0.0, 0.0, 1.0)) -> dict:
        """Matrices of r n.r-hat, r^2, r^2 (n.r-hat)^2 and (E_a - E_b) r s.(n x r-hat)."""
        key = tuple(np.round(np.asarray(direction, float) / np.linalg.norm(direction), 15))
        if key in self._ops:
            return self._ops[key]
        N = len(self.states)
        dip = np.zeros((N, N), complex)
        rsq = np.zeros((N, N), complex)
        quad = np.zeros((N, N), complex)
        so = np.zeros((N, N), complex)
        for a, g1 in enumerate(self.groups):
            s1 = slice(g1.start, g1.start + g1.size)
            for g2 in self.groups[a:]:
                s2 = slice(g2.start, g2.start + g2.size)
                dl = abs(g1.l - g2.l)
                if dl == 1:
                    R1 = self.radial_block(g1, g2, 1)
                    A = self._angular_block(projection_matrix(g1.l, g2.l, key), g1, g2)
                    dip[s1, s2] = np.kron(R1, A)
                    if self.spec.include_spin_orbit:
                        S = self._angular_block(spin_cross_matrix(g1.l, g2.l, key), g1, g2)
                        so[s1, s2] = np.kron(R1 * self._energy_block(g1, g2), S)
                if dl in (0, 2):
                    R2 = self.radial_block(g1, g2, 2)
                    A = self._angular_block(projection_sq_matrix(g1.l, g2.l, key), g1, g2)
                    quad[s1, s2] = np.kron(R2, A)
                    if dl == 0 and g1.j == g2.j:
                        rsq[s1, s2] = np.kron(R2, np.eye(len(g1.mjs)))
        ops = {}
        for name, M in (("dipole", dip), ("r2", rsq), ("quad", quad), ("so", so)):
            M = np.triu(M) + np.triu(M, 1).conj().T
            ops[name] = M
        # -i x (anti-Hermitian spin-orbit kernel) is Hermitian
        so_h = -1j * (np.triu(so) - np.triu(so, 1).conj().T)
        ops["so"] = so_h
        for name in ops:
            if np.max(np.abs(ops[name].imag), initial=0.0) < 1e-12 * max(
                    1.0, np.max(np.abs(ops[name].real), initial=0.0)):
                ops[name] = ops[name].real.copy()
        self._ops[key] = ops
        return ops


@dataclass
class BOMatrix:
    basis: BOBasis
    R: float                       # m
    direction: tuple
    matrix: np.ndarray             # J
    field_config: dict | None = None

    def eigh(self):
        w, v = np.linalg.eigh(self.matrix / HARTREE)
        return w * HARTREE, v


def _mass_factors(atom: Species):
    mc = atom.core_mass
    kappa = (mc - M_E) / atom.mass if math.isfinite(atom.mass) else 1.0
    mu = atom.electron_reduced_mass / M_E
    return kappa, mu


def build_interaction(R: float, basis: BOBasis, species_pair=None, direction=(0.0, 0.0, 1.0),
                      include_quadrupole: bool = True) -> BOMatrix:
    """Hamiltonian H0 + atom-ion interaction at separation R (m) along ``direction``.

    The ion sits at the origin and the atom's centre of mass at R * direction.
    In atomic units the interaction reads

        r.R/R^3 + kappa (r^2 - 3 (r.R)^2 / R^2) / (2 R^3)
        - i mu alpha^2 s.(R x [H0, r]) / R^3

    with kappa = (m_core - m_e) / M. The dipole sign is that of the electron in
    the ion's Coulomb field, so that trap fields add consistently.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    atom = basis.species
    kappa, mu = _mass_factors(atom)
    ops = basis.operators(direction)
    Ra = R / A0
    H = np.diag(basis.energies / HARTREE).astype(ops["dipole"].dtype)
    H = H + ops["dipole"] / Ra**2
    if include_quadrupole:
        H = H + kappa / (2 * Ra**3) * (ops["r2"] - 3 * ops["quad"])
    if basis.spec.include_spin_orbit:
        H = H + mu * ALPHA_FS**2 / Ra**2 * ops["so"]
    H = 0.5 * (H + H.conj().T)
    return BOMatrix(basis, R, tuple(direction), H * HARTREE, None)


def _local_components(vec, direction):
    """Components of vec in a frame whose z axis is ``direction``."""
    ez = np.asarray(direction, float) / np.linalg.norm(direction)
    trial = np.array([1.0, 0.0, 0.0]) if abs(ez[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    ex = trial - ez * (trial @ ez)
    ex /= np.linalg.norm(ex)
    ey = np.cross(ez, ex)
    return np.array([vec @ ex, vec @ ey, vec @ ez])


def trap_field_at(position, trap: TrapParams, ion: Species, phase: str) -> np.ndarray:
    """Static plus rf field (V/m) at ``position`` for the named rf phase."""
    c = PHASES[phase]
    # pick t so that cos(Omega t) = c
    t = math.acos(c) / trap.Omega_rf
    return static_field(position, trap, ion) + rf_field(position, t, trap, ion)


def add_trap_snapshot(matrix: BOMatrix, trap: TrapParams, phase: str, ion: Species,
                      geometry: str = "radial") -> BOMatrix:
    """Add the quasi-static coupling of the electron to the trap field at one rf phase.

    ``geometry`` places the atom on the trap x axis ("radial") or z axis ("axial")
    at distance R from the ion at the trap centre. The basis quantization axis is
    taken along R, so the trap field is expressed in that frame.
    """
    if matrix.field_config is not None:
        raise ValueError("matrix already carries a trap field")
    if phase not in PHASES:
        raise ValueError(f"phase must be one of {sorted(PHASES)}")
    axis = {"radial": np.array([1.0, 0, 0]), "axial": np.array([0, 0, 1.0])}[geometry]
    F = trap_field_at(axis * matrix.R, trap, ion, phase)
    F_local = _local_components(F, axis)  # components relative to R-hat = z of the basis
    # in the basis frame R points along matrix.direction
    Fmag = np.linalg.norm(F_local)
    H = matrix.matrix.copy()
    if Fmag > 0:
        fdir = _rotate_to(F_local, matrix.direction)
        if matrix.basis.spec.m_j is not None and np.linalg.norm(np.cross(fdir, matrix.direction)) > 1e-12:
            raise ValueError("trap field not parallel to R needs a basis with all m_j")
        dip = matrix.basis.operators(tuple(fdir))["dipole"]
        H = H + (Fmag / AU_FIELD) * dip * HARTREE
    cfg = {"trap": trap, "phase": phase, "geometry": geometry, "field_V_per_m": F.tolist()}
    return BOMatrix(matrix.basis, matrix.R, matrix.direction, H, cfg)


def _rotate_to(local_vec, direction):
    """Map components given in the R-aligned frame back to the basis frame."""
    ez = np.asarray(direction, float) / np.linalg.norm(direction)
    trial = np.array([1.0, 0.0, 0.0]) if abs(ez[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    ex = trial - ez * (trial @ ez)
    ex /= np.linalg.norm(ex)
    ey = np.cross(ez, ex)
    v = local_vec[0] * ex + local_vec[1] * ey + local_vec[2] * ez
    return v / np.linalg.norm(v)


@dataclass
class PotentialCurve:
    R_grid: np.ndarray            # m
    energies: np.ndarray          # J, shape (len(R_grid), n_curves), overlap-connected
    labels: list                  # asymptotic basis state of each curve
    links: np.ndarray             # overlap |<v_k(R_{i+1})|v_k(R_i)>|^2 along each curve
    ambiguities: list = field(default_factory=list)  # (R, curve index)

    def curve_index(self, n, l, j, m_j=None) -> int:
        for k, s in enumerate(self.labels):
            if (s.n, s.l, s.j) == (n, l, j) and (m_j is None or s.m_j == m_j):
                return k
        raise KeyError(f"no curve labelled n={n} l={l} j={j}")

    def curve_GHz(self, k) -> np.ndarray:
        return self.energies[:, k] / H_PLANCK / 1e9


def diagonalize_curves(R_grid, basis: BOBasis, field_config: dict | None = None,
                       direction=(0.0, 0.0, 1.0), threads: int = 1) -> PotentialCurve:
    """Adiabatic curves over ``R_grid`` (ascending, m), connected by eigenvector overlap.

    field_config: None, or {"trap": TrapParams, "phase": ..., "ion": Species,
    "geometry": "radial" | "axial"} for a quasi-static trap snapshot.
    """
    R_grid = np.asarray(R_grid, float)
    if np.any(np.diff(R_grid) <= 0):
        raise ValueError("R_grid must be strictly ascending")

    def solve(R):
        M = build_interaction(R, basis, direction=direction)
        if field_config is not None:
            M = add_trap_snapshot(M, field_config["trap"], field_config["phase"],
                                  field_config["ion"], field_config.get("geometry", "radial"))
        return M.eigh()

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(solve, R_grid))
    else:
        results = [solve(R) for R in R_grid]

    nR, N = len(R_grid), len(basis)
    energies = np.empty((nR, N))
    links = np.ones((nR, N))
    ambiguities = []
    # start at the largest R where states are closest to the unperturbed basis
    w, v = results[-1]
    energies[-1] = w
    labels = [basis.states[int(np.argmax(np.abs(v[:, k]) ** 2))] for k in range(N)]
    prev_v = v
    for i in range(nR - 2, -1, -1):
        w, v = results[i]
        O = np.abs(prev_v.conj().T @ v) ** 2     # rows: previous curves, cols: new eigenvectors
        rows, cols = linear_sum_assignment(-O)
        perm = np.empty(N, int)
        perm[rows] = cols
        top2 = np.sort(O, axis=1)[:, -2:]
        close = np.nonzero(top2[:, 1] - top2[:, 0] < 1e-6)[0]
        for k in close:
            cand = np.argsort(O[k])[-2:]
            if abs(w[cand[0]] - w[cand[1]]) > 1e-9 * abs(w[cand[0]]):
                ambiguities.append((float(R_grid[i]), int(k)))
        energies[i] = w[perm]
        links[i] = O[np.arange(N), perm]
        prev_v = v[:, perm]
    if ambiguities:
        warnings.warn(f"{len(ambiguities)} ambiguous overlap assignments", CurveAssignmentWarning)
    return PotentialCurve(R_grid, energies, labels, links, ambiguities)


def c4_second_order(state: RydbergState, basis: BasisSpec, species: Species,
                    step_spec: StepSpec | None = None, alpha: float | None = None) -> float:
    """C4 = alpha e^2 k_C^2 / 2 (J m^4) from the second-order polarizability."""
    if alpha is None:
        alpha = polarizability(state, species, basis, step_spec)
    return alpha * E_CHARGE**2 * K_COULOMB**2 / 2


def fit_c4(curve: PotentialCurve, k: int, asymptote: float, R_min: float, R_max: float) -> float:
    """Least-squares C4 from a curve shift E(R) - asymptote = -C4 / R^4 on [R_min, R_max]."""
    m = (curve.R_grid >= R_min) & (curve.R_grid <= R_max)
    x = -curve.R_grid[m] ** -4.0
    y = curve.energies[m, k] - asymptote
    return float(x @ y / (x @ x))
