"""Fock-space simulation of the atom-ion phase gate.

The atom (spin a, oscillator b) and the ion (spin i, oscillator a) are each
a qubit times a harmonic oscillator. The dressed interaction acts only when
the atom is up and is amplitude modulated at w_v; a bichromatic laser pushes
the ion when the ion is up. The Hamiltonian never flips a spin, so each of
the four spin sectors is evolved on its own.

Spin basis index 0 is up and 1 is down. Amplitudes are stored as
``psi[spin_a, spin_i, n_a, n_i]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import HBAR, TWO_PI
from .dressed import (AdiabaticPotential, DressingParams, TaylorCoeffs, alpha_from_c4,
                      match_drive, taylor3)
from .species import Species

UP, DOWN = 0, 1
SECTORS = ((UP, UP), (UP, DOWN), (DOWN, UP), (DOWN, DOWN))
SECTOR_NAMES = {(UP, UP): "uu", (UP, DOWN): "ud", (DOWN, UP): "du", (DOWN, DOWN): "dd"}


class CutoffError(RuntimeError):
    """Population reached the top of the truncated Fock space."""


class IntegrationError(RuntimeError):
    """Norm drift of the step integrator exceeded its tolerance."""


class GateParamsError(ValueError):
    """Parameters violate the weak-coupling assumptions of the gate."""


@dataclass(frozen=True)
class GateParams:
    """Physical and numerical parameters of one gate run.

    ``coeffs`` holds the static (trap-off) potential derivatives at the
    working point with the far-field light shift removed, so ``coeffs.V00``
    is V(d). ``modulation`` selects (1 + cos) or (1 - cos) for the dressing
    envelope. Frequencies are angular.
    """
    omega_i: float
    omega_a: float
    delta: float
    eta_Omega: float
    coeffs: TaylorCoeffs
    ion_mass: float
    atom_mass: float
    n_ion: int = 10
    n_atom: int = 10
    taylor_order: int = 3
    modulation: str = "plus"
    steps_per_period: int = 200
    check_guards: bool = True

    def __post_init__(self):
        if self.modulation not in ("plus", "minus"):
            raise ValueError("modulation must be 'plus' or 'minus'")
        if self.n_ion < 2 or self.n_atom < 2:
            raise ValueError("need at least two Fock levels per mode")
        if not self.check_guards:
            return
        if abs(self.delta) >= 0.05 * self.omega_i:
            raise GateParamsError("|delta| must stay below 5% of omega_i")
        F = abs(self.force)
        if F * self.ell_a >= HBAR * self.omega_a or F * self.ell_i >= HBAR * self.omega_i:
            raise GateParamsError("force outside the Lamb-Dicke regime")

    @property
    def omega_v(self) -> float:
        return self.omega_i + self.delta

    @property
    def ell_i(self) -> float:
        return math.sqrt(HBAR / (2 * self.ion_mass * self.omega_i))

    @property
    def ell_a(self) -> float:
        return math.sqrt(HBAR / (2 * self.atom_mass * self.omega_a))

    @property
    def force(self) -> float:
        """Linear coefficient dV/dx_i at the working point (N)."""
        return self.coeffs[(1, 0)]

    @property
    def gate_time(self) -> float:
        return TWO_PI / abs(self.delta)

    @property
    def stark_ratio(self) -> float:
        """|V(d)| / (2 hbar w_v), size of the fast scalar Stark oscillation."""
        return abs(self.coeffs.V00) / (2 * HBAR * self.omega_v)

    def with_(self, **kw) -> "GateParams":
        return replace(self, **kw)


def gate_params_from_dressing(dressing: DressingParams, ion: Species, atom: Species, *,
                              omega_i: float, omega_a: float, delta: float | None = None,
                              eta_Omega: float | None = None, d: float | None = None,
                              c4: float | None = None, **kw) -> GateParams:
    """Gate parameters at the force maximum d = (3/5)^(1/4) R_w unless ``d`` is given.

    ``eta_Omega`` defaults to the matched drive; ``delta`` defaults to the
    matched drive too, which makes the accumulated two-qubit phase pi/4.
    """
    if c4 is not None:
        dressing = replace(dressing, alpha=alpha_from_c4(c4))
    pot = AdiabaticPotential.from_dressing(dressing)
    if d is None:
        d = pot.force_maximum_distance
    coeffs = taylor3(d, 0.0, dressing, None, ion)
    if eta_Omega is None:
        eta_Omega = match_drive(d, dressing, None, ion, omega_i)
    if delta is None:
        delta = abs(eta_Omega)
    return GateParams(omega_i, omega_a, delta, eta_Omega, coeffs, ion.mass, atom.mass, **kw)


# --- operators ----------------------------------------------------------------

def _position_powers(n: int, order: int):
    """(a + a^dag)^p truncated to n levels, computed in a larger space first."""
    big = n + order
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    X = a + a.T
    out, P = [np.eye(n)], np.eye(big)
    for _ in range(order):
        P = P @ X
        out.append(P[:n, :n].copy())
    return out


def _sector_operators(params: GateParams):
    """Return (E, M, K, V00) in rad/s: trap energies, atom-up potential, ion-up drive."""
    Ni, Na = params.n_ion, params.n_atom
    Xi = _position_powers(Ni, params.taylor_order)
    Xa = _position_powers(Na, params.taylor_order)
    M = np.zeros((Na * Ni, Na * Ni))
    for (j, k), c in params.coeffs.values.items():
        if j + k == 0 or j + k > params.taylor_order:
            continue
        w = c * params.ell_i**j * params.ell_a**k / (math.factorial(j) * math.factorial(k) * HBAR)
        M += w * np.kron(Xa[k], Xi[j])
    K = params.eta_Omega * np.kron(np.eye(Na), Xi[1])
    E = (params.omega_a * np.repeat(np.arange(Na), Ni) + params.omega_i * np.tile(np.arange(Ni), Na))
    return E, M, K, params.coeffs.V00 / HBAR


def _envelope(t, params: GateParams):
    c = math.cos(params.omega_v * t)
    return (1 + c) / 2 if params.modulation == "plus" else (1 - c) / 2


def build_hamiltonian(t: float, params: GateParams) -> np.ndarray:
    """Full Hamiltonian (J) on spin_a x spin_i x n_a x n_i at time t (lab frame)."""
    E, M, K, V00 = _sector_operators(params)
    dim = E.size
    H = np.zeros((4 * dim, 4 * dim))
    env = _envelope(t, params)
    drive = math.cos(params.omega_v * t)
    for s, (sa, si) in enumerate(SECTORS):
        blk = np.diag(E).copy()
        if sa == UP:
            blk += env * (M + V00 * np.eye(dim))
        if si == UP:
            blk += drive * K
        H[s * dim:(s + 1) * dim, s * dim:(s + 1) * dim] = blk
    return HBAR * H


# --- states -------------------------------------------------------------------

@dataclass
class CompositeState:
    """Amplitudes psi[spin_a, spin_i, n_a, n_i] at time ``time`` (interaction picture)."""
    psi: np.ndarray
    time: float = 0.0

    @classmethod
    def product(cls, spin_a, spin_i, n_atom: int, n_ion: int, fock=(0, 0)) -> "CompositeState":
        """Product of two spin states (length-2 (up, down) vectors) and a Fock state (n_a, n_i)."""
        mot = np.zeros((n_atom, n_ion), complex)
        mot[fock] = 1.0
        psi = np.einsum("a,b,ij->abij", np.asarray(spin_a, complex), np.asarray(spin_i, complex), mot)
        return cls(psi)

    @property
    def shape(self):
        return self.psi.shape

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2)))

    def spin_populations(self) -> dict:
        p = np.sum(np.abs(self.psi) ** 2, axis=(2, 3))
        return {SECTOR_NAMES[s]: float(p[s]) for s in SECTORS}

    def phonons(self) -> tuple[float, float]:
        """Mean phonon numbers (ion, atom)."""
        p = np.sum(np.abs(self.psi) ** 2, axis=(0, 1))
        n_a = np.arange(p.shape[0]) @ p.sum(axis=1)
        n_i = np.arange(p.shape[1]) @ p.sum(axis=0)
        return float(n_i), float(n_a)

    def leakage(self) -> float:
        """Population in the top two Fock layers of either mode."""
        p = np.sum(np.abs(self.psi) ** 2, axis=(0, 1))
        top = np.zeros_like(p, bool)
        top[-2:, :] = True
        top[:, -2:] = True
        return float(p[top].sum())

    def copy(self) -> "CompositeState":
        return CompositeState(self.psi.copy(), self.time)


_RY = np.array([[1.0, -1.0], [1.0, 1.0]]) / math.sqrt(2)   # exp(-i pi sigma_y / 4), (up, down)


def pi2_pulse(state: CompositeState) -> CompositeState:
    """Apply exp(-i pi (sigma_y^a + sigma_y^i) / 4) to both spins."""
    psi = np.einsum("ab,cd,bdij->acij", _RY, _RY, state.psi)
    return CompositeState(psi, state.time)


def fidelity(out, goal) -> float:
    """|<goal|out>|^2 for states, Tr(rho_g rho_out) for density matrices (2D arrays)."""
    if isinstance(out, CompositeState) and isinstance(goal, CompositeState):
        if out.shape != goal.shape:
            raise ValueError(f"shape mismatch {out.shape} vs {goal.shape}")
        return float(abs(np.vdot(goal.psi, out.psi)) ** 2)
    out, goal = np.asarray(out), np.asarray(goal)
    if out.shape != goal.shape:
        raise ValueError(f"shape mismatch {out.shape} vs {goal.shape}")
    if out.ndim == 2:
        return float(np.real(np.trace(goal @ out)))
    return float(abs(np.vdot(goal, out)) ** 2)


# --- propagation ---------------------------------------------------------------

def _expm_apply(H, v, dt, tol=1e-15):
    """exp(-i H dt) v by a Taylor series summed to convergence."""
    out = v.copy()
    term = v
    k = 1
    scale = max(np.abs(v).max(), 1e-300)
    while True:
        term = (-1j * dt / k) * (H @ term)
        out = out + term
        if np.abs(term).max() < tol * scale:
            return out
        k += 1
        if k > 60:
            raise IntegrationError("Taylor series did not converge; reduce the step")


@dataclass
class SectorTrace:
    times: np.ndarray
    columns: dict = field(default_factory=dict)   # sector -> array (n_samples, dim, ncol)


def _propagate(params: GateParams, columns: dict, t_end: float, n_samples: int = 0,
               norm_tol: float = 1e-8):
    """Evolve motional columns of each spin sector in the interaction picture.

    ``columns[sector]`` is a (dim, k) array. The frame is that of the trap
    Hamiltonian plus V(d)/2 on atom-up sectors; the leftover scalar
    V(d)(env - 1/2) is integrated analytically by ``_scalar_phase``. Uses the
    exponential midpoint rule.
    """
    E, M, K, _ = _sector_operators(params)
    period = TWO_PI / params.omega_v
    n_steps = max(1, math.ceil(t_end / period * params.steps_per_period))
    dt = t_end / n_steps
    sample_at = set()
    if n_samples:
        sample_at = set(np.linspace(0, n_steps, n_samples + 1).round().astype(int).tolist())
    results, traces = {}, {}
    times = np.array(sorted(sample_at)) * dt
    for sector, cols in columns.items():
        sa, si = sector
        v = np.array(cols, complex)
        n0 = np.linalg.norm(v, axis=0)
        snaps = []
        if 0 in sample_at:
            snaps.append(v.copy())
        if sa == UP or si == UP:
            for step in range(n_steps):
                t = (step + 0.5) * dt
                H1 = np.zeros_like(M)
                if sa == UP:
                    H1 = H1 + _envelope(t, params) * M
                if si == UP:
                    H1 = H1 + math.cos(params.omega_v * t) * K
                ph = np.exp(1j * E * t)
                HI = ph[:, None] * H1 * ph.conj()[None, :]
                v = _expm_apply(HI, v, dt)
                if step + 1 in sample_at:
                    snaps.append(v.copy())
        else:
            snaps = [v.copy() for _ in sample_at]
        drift = np.max(np.abs(np.linalg.norm(v, axis=0) - n0))
        if drift > norm_tol:
            raise IntegrationError(f"norm drift {drift:.2e} in sector {SECTOR_NAMES[sector]}")
        results[sector] = v
        if n_samples:
            traces[sector] = np.array(snaps)
    return results, SectorTrace(times, traces)


def _scalar_phase(t, params: GateParams) -> float:
    """Phase of the atom-up sectors from V(d)(env - 1/2) in the chosen frame."""
    sign = 1.0 if params.modulation == "plus" else -1.0
    V00 = params.coeffs.V00 / HBAR
    return -V00 * sign * math.sin(params.omega_v * t) / (2 * params.omega_v)


def _assemble(params, sector_vecs, spin_amps, t, stark_phase: bool = True):
    """Build CompositeState from per-sector evolved motional vectors and spin amplitudes.

    ``stark_phase=False`` drops the fast scalar phase of the atom-up sectors,
    which amounts to a known single-qubit z rotation of the atom.
    """
    Na, Ni = params.n_atom, params.n_ion
    psi = np.zeros((2, 2, Na, Ni), complex)
    phase = np.exp(1j * _scalar_phase(t, params)) if stark_phase else 1.0
    for (sa, si), vec in sector_vecs.items():
        amp = spin_amps[sa, si] * (phase if sa == UP else 1.0)
        psi[sa, si] = amp * vec.reshape(Na, Ni)
    return CompositeState(psi, t)


def evolve(state: CompositeState, params: GateParams, t_end: float, n_samples: int = 0,
           leakage_tol: float = 1e-3):
    """Evolve a CompositeState for ``t_end`` seconds.

    Returns ``(final_state, samples)`` where ``samples`` is a list of
    CompositeState snapshots (empty unless ``n_samples`` > 0).
    """
    Na, Ni = params.n_atom, params.n_ion
    if state.psi.shape != (2, 2, Na, Ni):
        raise ValueError("state shape does not match the Fock cutoffs")
    cols = {s: state.psi[s].reshape(-1, 1) for s in SECTORS}
    ones = np.ones((2, 2))
    final, trace = _propagate(params, cols, t_end, n_samples)
    out = _assemble(params, {s: v[:, 0] for s, v in final.items()}, ones, state.time + t_end)
    samples = []
    for k, t in enumerate(trace.times):
        vecs = {s: trace.columns[s][k][:, 0] for s in SECTORS}
        samples.append(_assemble(params, vecs, ones, state.time + t))
    worst = max([out.leakage()] + [s.leakage() for s in samples])
    if worst > leakage_tol:
        raise CutoffError(f"Fock-space leakage {worst:.2e} exceeds {leakage_tol}")
    return out, samples


# --- gate protocol ---------------------------------------------------------------

_PLUS = np.array([1.0, 1.0]) / math.sqrt(2)
_MINUS = np.array([1.0, -1.0]) / math.sqrt(2)
INPUTS = {"++": (_PLUS, _PLUS), "+-": (_PLUS, _MINUS), "-+": (_MINUS, _PLUS), "--": (_MINUS, _MINUS)}



def ideal_gate(delta_sign: float = -1.0) -> np.ndarray:
    """Sector phases of the ideal gate, indexed [spin_a, spin_i].

    Opposite-spin sectors pick up -sign(delta) pi/2 relative to equal spins:
    a drive above the trap frequency (delta > 0) lowers their phase.
    """
    s = -1j if delta_sign > 0 else 1j
    return np.array([[1.0, s], [s, 1.0]])


def bell_goal(label: str, delta_sign: float = -1.0) -> np.ndarray:
    """Spin goal (2x2, [spin_a, spin_i]) for a product input after the ideal gate and the pi/2 pulse.

    For delta < 0: ++ gives (uu + i dd)/sqrt2, -- gives (uu - i dd)/sqrt2,
    +- and -+ give (ud +- i du)/sqrt2 up to a global phase. delta > 0 swaps
    the signs of i.
    """
    a, b = INPUTS[label]
    spins = np.outer(a, b) * ideal_gate(delta_sign)
    return _RY @ spins @ _RY.T


def _bell_family():
    s = 1 / math.sqrt(2)
    fam = {}
    for name, (p, q, ph) in {"uu+idd": ((0, 0), (1, 1), 1j), "uu-idd": ((0, 0), (1, 1), -1j),
                             "ud+idu": ((0, 1), (1, 0), 1j), "ud-idu": ((0, 1), (1, 0), -1j)}.items():
        g = np.zeros((2, 2), complex)
        g[p] = s
        g[q] = s * ph
        fam[name] = g
    return fam


BELL_FAMILY = _bell_family()


def _goal_state(spin_goal, params, fock=(0, 0)) -> CompositeState:
    mot = np.zeros((params.n_atom, params.n_ion), complex)
    mot[fock] = 1.0
    return CompositeState(np.einsum("ab,ij->abij", spin_goal, mot))


def run_gate(inputs=("++", "+-", "-+", "--"), params: GateParams = None, n_samples: int = 0,
             t_end: float | None = None) -> dict:
    """Simulate the gate from the motional ground state for each product input.

    All inputs share the same motional evolution per spin sector, so one
    propagation serves every input. Returns per-input fidelity, the goal
    label, the best fidelity over the four Bell states, and traces when
    ``n_samples`` is set.
    """
    t_end = params.gate_time if t_end is None else t_end
    dim = params.n_atom * params.n_ion
    e0 = np.zeros((dim, 1), complex)
    e0[0, 0] = 1.0
    final, trace = _propagate(params, {s: e0 for s in SECTORS}, t_end, n_samples)
    sgn = math.copysign(1.0, params.delta)
    vecs = {s: v[:, 0] for s, v in final.items()}
    out = {}
    for label in inputs:
        a, b = INPUTS[label]
        amps = np.outer(a, b)
        state = _assemble(params, vecs, amps, t_end)
        if state.leakage() > 1e-3:
            raise CutoffError(f"Fock-space leakage {state.leakage():.2e}")
        rotated = pi2_pulse(state)
        goal = _goal_state(bell_goal(label, sgn), params)
        F = fidelity(rotated, goal)
        F_local = fidelity(pi2_pulse(_assemble(params, vecs, amps, t_end, stark_phase=False)), goal)
        best = {name: fidelity(rotated, _goal_state(g, params)) for name, g in BELL_FAMILY.items()}
        rec = {"fidelity": F, "fidelity_local": F_local, "bell_overlaps": best,
               "best_bell": max(best, key=best.get), "norm": state.norm(),
               "leakage": state.leakage(), "state": state}
        if n_samples:
            rows = []
            for k, t in enumerate(trace.times):
                snap = _assemble(params, {s: trace.columns[s][k][:, 0] for s in SECTORS}, amps, t)
                pops = pi2_pulse(snap).spin_populations()
                n_i, n_a = snap.phonons()
                rows.append((t, pops["uu"], pops["ud"], pops["du"], pops["dd"], n_i, n_a))
            rec["trace"] = np.array(rows)
        out[label] = rec
    return out


def spin_spin_phase(params: GateParams, t_end: float | None = None) -> float:
    """Two-qubit phase (phi_ud + phi_du - phi_uu - phi_dd)/4 from the motional-ground amplitudes."""
    t_end = params.gate_time if t_end is None else t_end
    dim = params.n_atom * params.n_ion
    e0 = np.zeros((dim, 1), complex)
    e0[0, 0] = 1.0
    final, _ = _propagate(params, {s: e0 for s in SECTORS}, t_end)
    phi = {}
    for s, v in final.items():
        amp = v[0, 0] * (np.exp(1j * _scalar_phase(t_end, params)) if s[0] == UP else 1.0)
        phi[SECTOR_NAMES[s]] = np.angle(amp)
    theta = (phi["ud"] + phi["du"] - phi["uu"] - phi["dd"]) / 4
    # the sector phases are only defined modulo 2 pi, so theta is modulo pi / 2
    return float(np.angle(np.exp(4j * theta)) / 4)


def analytic_phase(params: GateParams) -> float:
    """J tau / hbar with J = F^2 ell_i^2 / (32 hbar delta) and tau = 2 pi / delta."""
    F = params.force
    J = F**2 * params.ell_i**2 / (32 * HBAR * params.delta)
    return J * params.gate_time / HBAR


# --- thermal input ------------------------------------------------------------------

@dataclass(frozen=True)
class ThermalSpec:
    nbar_a: float
    nbar_i: float
    n_max: int = 3

    def weights(self, nbar):
        n = np.arange(self.n_max + 1)
        return (nbar / (nbar + 1)) ** n / (1 + nbar)

    def trace(self) -> float:
        return float(self.weights(self.nbar_a).sum() * self.weights(self.nbar_i).sum())


def run_thermal(spec: ThermalSpec, params: GateParams, label: str = "++", margin: int = 2) -> dict:
    """Gate on a thermal motional mixture of Fock products with spin input ``label``.

    Each member |n_a, n_i> evolves independently. ``fidelity`` is the
    probability-weighted member fidelity |<n_a n_i, goal|psi_m>|^2 normalised
    by the truncated trace (``fidelity_local`` without the fast Stark phase); ``trace_overlap`` is Tr(rho_goal rho_out) with both
    operators built from the same truncated weights, and ``spin_fidelity`` is
    the goal-state population of the motion-traced spin density matrix.
    """
    if spec.n_max > min(params.n_atom, params.n_ion) - 1 - margin:
        raise ValueError("n_max too close to the Fock cutoff")
    Na, Ni = params.n_atom, params.n_ion
    members = [(na, ni) for na in range(spec.n_max + 1) for ni in range(spec.n_max + 1)]
    Pa, Pi = spec.weights(spec.nbar_a), spec.weights(spec.nbar_i)
    P = np.array([Pa[na] * Pi[ni] for na, ni in members])
    cols = np.zeros((Na * Ni, len(members)), complex)
    for c, (na, ni) in enumerate(members):
        cols[na * Ni + ni, c] = 1.0
    final, _ = _propagate(params, {s: cols for s in SECTORS}, params.gate_time)
    a, b = INPUTS[label]
    amps = np.outer(a, b)
    goal_spin = bell_goal(label, math.copysign(1.0, params.delta))
    outs, member_F, member_F_local = [], [], []
    for c, fock in enumerate(members):
        vecs = {s: v[:, c] for s, v in final.items()}
        goal = _goal_state(goal_spin, params, fock)
        st = pi2_pulse(_assemble(params, vecs, amps, params.gate_time))
        outs.append(st)
        member_F.append(fidelity(st, goal))
        local = pi2_pulse(_assemble(params, vecs, amps, params.gate_time, stark_phase=False))
        member_F_local.append(fidelity(local, goal))
    member_F = np.array(member_F)
    F = float(P @ member_F / P.sum())
    F_local = float(P @ np.array(member_F_local) / P.sum())
    # Tr(rho_g rho_out) = sum_mm' P_m P_m' |<m', goal|psi_m>|^2
    goals = [_goal_state(goal_spin, params, fock).psi.ravel() for fock in members]
    G = np.array(goals)
    O = np.array([s.psi.ravel() for s in outs])
    overlaps = np.abs(G.conj() @ O.T) ** 2
    trace_overlap = float(P @ overlaps @ P)
    rho_spin = sum(p * np.einsum("abij,cdij->abcd", s.psi, s.psi.conj()) for p, s in zip(P, outs))
    rho_spin = rho_spin.reshape(4, 4) / P.sum()
    g = goal_spin.ravel()
    spin_F = float(np.real(g.conj() @ rho_spin @ g))
    return {"fidelity": F, "fidelity_local": F_local, "trace": float(P.sum()), "trace_analytic": spec.trace(),
            "trace_overlap": trace_overlap, "spin_fidelity": spin_F,
            "members": {f"{na},{ni}": float(f) for (na, ni), f in zip(members, member_F)},
            "weights": P.tolist()}
