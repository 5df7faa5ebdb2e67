"""Grid-based split-step simulation of the transverse gate with rf micromotion.

Each spin sector carries a wavefunction psi[x_i, x_a] over the ion and atom
coordinates. The ion sits in the bare rf quadrupole (no static field), the
atom in a harmonic trap; the trap-modified dressed potential, expanded to
third order about the equilibrium positions, acts when the atom is up, and
the bichromatic drive acts when the ion is up. Internally lengths are in
units of ell = sqrt(hbar / (mu_ai w_bar)), energies in hbar Omega_rf and time
in tau = Omega_rf t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft
from numba import njit

from .constants import E_CHARGE, HBAR, K_COULOMB, TWO_PI
from .dressed import DressingParams, match_drive, taylor3, v_tilde
from .species import Species, lithium7, ytterbium171_ion
from .trap import TrapParams, pseudopotential_frequency, secular_frequency
from .units import ScaledUnits

SECTOR_LABELS = ("uu", "ud", "du", "dd")   # atom spin first


class BoundaryLeakError(RuntimeError):
    """Probability reached the edge of the grid."""


class GridError(ValueError):
    """Grid too small or too coarse for the initial wavepackets."""


@dataclass(frozen=True)
class MMParams:
    """Micromotion gate parameters (SI, angular frequencies).

    ``ion_potential`` is "rf" for the Paul trap, "harmonic" for a static
    harmonic trap at the pseudopotential frequency, or "free". ``frozen_time``
    evaluates every time-dependent term at that fixed time. With ``ramp_drive``
    the ion drive is switched on together with the dressing, so the two forces
    keep cancelling in the up-up sector during the ramp.
    """
    trap: TrapParams
    omega_a: float
    d: float
    dressing: DressingParams | None
    eta_Omega: float
    delta_perp: float
    ramp_time: float
    t_end: float
    ion: Species = field(default_factory=ytterbium171_ion, compare=False)
    atom: Species = field(default_factory=lithium7, compare=False)
    ramp_shape: str = "sin2"
    ramp_drive: bool = True
    modulation: str = "plus"
    ion_potential: str = "rf"
    atom_trap: bool = True
    frozen_time: float | None = None
    steps_per_rf: int = 128

    def __post_init__(self):
        if self.ramp_shape not in ("sin2", "linear"):
            raise ValueError("ramp_shape must be 'sin2' or 'linear'")
        if self.ion_potential not in ("rf", "harmonic", "free"):
            raise ValueError("ion_potential must be 'rf', 'harmonic' or 'free'")
        if self.steps_per_rf < 100:
            raise ValueError("need at least 100 steps per rf period")
        if self.ramp_time >= 0.1 * self.t_end and self.ramp_time > 0:
            raise ValueError("ramp_time must be below 10% of t_end")

    @property
    def omega_i(self) -> float:
        """Reference ion frequency Omega_rf q / 2^(3/2) defining ell_i and the initial state."""
        return pseudopotential_frequency(self.trap)

    @property
    def omega_secular(self) -> float:
        return secular_frequency(self.trap)

    @property
    def omega_v(self) -> float:
        return self.omega_secular + self.delta_perp

    @property
    def ell_i(self) -> float:
        return math.sqrt(HBAR / (2 * self.ion.mass * self.omega_i))

    @property
    def ell_a(self) -> float:
        return math.sqrt(HBAR / (2 * self.atom.mass * self.omega_a))

    @property
    def dt(self) -> float:
        return self.trap.period / self.steps_per_rf

    @property
    def n_steps(self) -> int:
        return max(1, round(self.t_end / self.dt))

    def units(self) -> ScaledUnits:
        return ScaledUnits.build(self.ion, self.atom, self.omega_i, self.omega_a, self.trap.Omega_rf)

    def with_(self, **kw) -> "MMParams":
        return replace(self, **kw)


def default_params(**overrides) -> MMParams:
    """Li-7 / Yb-171+ transverse gate: q = 0.28, Omega_rf = 2pi 2.5 MHz, omega_a = 2pi 200 kHz,
    Omega = 2pi 13.1 MHz, Delta0 = 2pi 0.8 GHz, d = 1 um, delta = 2pi 1.064 kHz, 50 us ramp.

    The drive strength defaults to the rf-averaged force match.
    """
    trap = overrides.pop("trap", TrapParams(0.0, TWO_PI * 2.5e6, 0.28))
    ion = overrides.pop("ion", ytterbium171_ion())
    atom = overrides.pop("atom", lithium7())
    dressing = overrides.pop("dressing", None) or DressingParams(TWO_PI * 13.1e6, TWO_PI * 0.8e9, atom=atom)
    d = overrides.pop("d", 1e-6)
    delta = overrides.pop("delta_perp", TWO_PI * 1.064e3)
    eta = overrides.pop("eta_Omega", None)
    if eta is None:
        eta = match_drive(d, dressing, trap, ion, pseudopotential_frequency(trap))
    ramp = overrides.pop("ramp_time", 50e-6)
    # a symmetric ramp delays the effective switch-on by half its length
    t_end = overrides.pop("t_end", TWO_PI / abs(delta) + ramp / 2)
    base = MMParams(trap, TWO_PI * 200e3, d, dressing, eta, delta, ramp, t_end, ion, atom)
    return replace(base, **overrides)


@dataclass(frozen=True)
class Grid2D:
    """Uniform grid; extents are half-widths in metres, axis 0 ion, axis 1 atom."""
    extent_i: float
    extent_a: float
    n_i: int
    n_a: int

    def __post_init__(self):
        for n in (self.n_i, self.n_a):
            if n < 8 or n & (n - 1):
                raise GridError("point counts must be powers of two")

    @classmethod
    def for_params(cls, params: MMParams, n: int = 256, widths: float = 12.0) -> "Grid2D":
        return cls(widths * params.ell_i, widths * params.ell_a, n, n)

    @property
    def spacing(self) -> tuple[float, float]:
        return 2 * self.extent_i / self.n_i, 2 * self.extent_a / self.n_a

    def axes(self):
        """(x_i, x_a) coordinate vectors in metres."""
        xi = (np.arange(self.n_i) - self.n_i // 2) * self.spacing[0]
        xa = (np.arange(self.n_a) - self.n_a // 2) * self.spacing[1]
        return xi, xa

    def wavenumbers(self):
        return (TWO_PI * sfft.fftfreq(self.n_i, self.spacing[0]),
                TWO_PI * sfft.fftfreq(self.n_a, self.spacing[1]))

    def check(self, params: MMParams):
        if self.extent_i < 8 * params.ell_i or self.extent_a < 8 * params.ell_a:
            raise GridError("grid extents must cover 8 ground-state widths")
        ki, ka = self.wavenumbers()
        if np.abs(ki).max() * params.ell_i < 3 or np.abs(ka).max() * params.ell_a < 3:
            raise GridError("grid too coarse for the initial momentum spread")


@dataclass
class SectorWavefunction:
    sector: str
    psi: np.ndarray     # [x_i, x_a], normalised so that sum |psi|^2 dx_i dx_a = 1
    time: float = 0.0

    def density(self):
        return np.abs(self.psi) ** 2


def _gaussian(x, ell):
    g = np.exp(-x**2 / (4 * ell**2))
    return g


def init_gaussian(grid: Grid2D, params: MMParams, sectors=SECTOR_LABELS, x0_i: float = 0.0,
                  x0_a: float = 0.0) -> dict:
    """Product of oscillator ground states (widths ell_i, ell_a), one copy per sector."""
    grid.check(params)
    xi, xa = grid.axes()
    gi = _gaussian(xi - x0_i, params.ell_i)
    ga = _gaussian(xa - x0_a, params.ell_a)
    dxi, dxa = grid.spacing
    gi /= math.sqrt(np.sum(gi**2) * dxi)
    ga /= math.sqrt(np.sum(ga**2) * dxa)
    psi = np.outer(gi, ga).astype(complex)
    return {s: SectorWavefunction(s, psi.copy()) for s in sectors}


# --- potential bookkeeping ----------------------------------------------------------

def _ramp(t, params: MMParams) -> float:
    if params.ramp_time <= 0 or t >= params.ramp_time:
        return 1.0
    u = t / params.ramp_time
    return math.sin(math.pi * u / 2) ** 2 if params.ramp_shape == "sin2" else u


def _envelope(t, params: MMParams) -> float:
    c = math.cos(params.omega_v * t)
    return (1 + c) / 2 if params.modulation == "plus" else (1 - c) / 2


class _Model:
    """Dimensionless potentials on a grid, tabulated over one rf period."""

    def __init__(self, params: MMParams, grid: Grid2D):
        self.p = params
        self.grid = grid
        u = params.units()
        self.u = u
        ell = u.length_unit
        W = params.trap.Omega_rf
        xi, xa = grid.axes()
        self.xi, self.xa = xi / ell, xa / ell
        self.xi2, self.xa2 = self.xi**2, self.xa**2
        ki, ka = grid.wavenumbers()
        self.kin_i = HBAR / (2 * params.ion.mass * W) * ki**2          # per unit tau
        self.kin_a = HBAR / (2 * params.atom.mass * W) * ka**2
        self.dtau = TWO_PI / params.steps_per_rf
        # ion trap: coefficient of xbar^2 (times cos tau for rf)
        m_i, m_a = params.ion.mass, params.atom.mass
        if params.ion_potential == "rf":
            # potential energy -e * int E dx of the rf quadrupole field
            self.ion_c = -m_i * W * params.trap.q * ell**2 / (4 * HBAR)
        elif params.ion_potential == "harmonic":
            self.ion_c = m_i * params.omega_i**2 * ell**2 / (2 * HBAR * W)
        else:
            self.ion_c = 0.0
        self.atom_c = m_a * params.omega_a**2 * ell**2 / (2 * HBAR * W) if params.atom_trap else 0.0
        self.drive_c = params.eta_Omega / W * ell / params.ell_i
        self.omega_v = params.omega_v
        self._last = (None, None)
        self._tabulate()

    def _tabulate(self):
        p, N = self.p, self.p.steps_per_rf
        self.coeffs = []
        if p.dressing is None:
            return
        ell, E = self.u.length_unit, self.u.energy_unit
        for n in range(N):
            t = n * p.trap.period / N
            tc = taylor3(p.d, t, p.dressing, p.trap, p.ion)
            c = {}
            for (j, k), v in tc.values.items():
                c[(j, k)] = v * ell ** (j + k) / (math.factorial(j) * math.factorial(k) * E)
            self.coeffs.append(c)
        xi, xa = self.xi, self.xa
        self.pure_i = np.array([sum(c[(j, 0)] * xi**j for j in (1, 2, 3)) for c in self.coeffs])
        self.pure_a = np.array([sum(c[(0, k)] * xa**k for k in (1, 2, 3)) for c in self.coeffs])
        XI, XA = np.meshgrid(xi, xa, indexing="ij")
        mix = [(1, 1), (2, 1), (1, 2)]
        self.mixed = np.array([sum(c[jk] * XI ** jk[0] * XA ** jk[1] for jk in mix)
                               for c in self.coeffs])
        self.v00 = np.array([c[(0, 0)] for c in self.coeffs])
        self.mixed_max = np.abs(self.mixed).reshape(len(self.coeffs), -1).max(axis=1)

    def time(self, n: float) -> float:
        """Physical time of step index n (may be fractional)."""
        if self.p.frozen_time is not None:
            return self.p.frozen_time
        return n * self.p.dt

    def phase_index(self, t: float) -> int:
        N = self.p.steps_per_rf
        return int(round(t / self.p.trap.period * N)) % N

    def _mean_cos(self, w, ta, tb):
        # exact average of cos(w t) over the kick window; the point value for frozen time
        if self.p.frozen_time is not None or tb == ta:
            return math.cos(w * self.time(0) if self.p.frozen_time is not None else w * ta)
        return (math.sin(w * tb) - math.sin(w * ta)) / (w * (tb - ta))

    def cos_rf(self, t):
        return math.cos(self.p.trap.Omega_rf * t) if self.p.ion_potential == "rf" else 1.0

    def scalars(self, ta: float, tb: float):
        """(mean rf cosine, dressing amplitude, drive amplitude, kick length h, table index).

        The fast rf and drive cosines are averaged exactly over the kick window
        [ta, tb]; slow envelopes and the rf-periodic Taylor table are taken at
        its midpoint. Averaging the rf term removes the O(dt^2) shift of the
        numerical secular frequency that point sampling produces.
        """
        key = (ta, tb)
        if self._last[0] == key:
            return self._last[1]
        p = self.p
        tm = self.time(0) if p.frozen_time is not None else (ta + tb) / 2
        cos_rf = self._mean_cos(p.trap.Omega_rf, ta, tb) if p.ion_potential == "rf" else 1.0
        c = math.cos(self.omega_v * tm)
        env = (1 + c) / 2 if p.modulation == "plus" else (1 - c) / 2
        r = _ramp(tm, p)
        amp = r * env if p.dressing is not None else 0.0
        drive = self.drive_c * self._mean_cos(self.omega_v, ta, tb) * (r if p.ramp_drive else 1.0)
        out = (cos_rf, amp, drive, p.trap.Omega_rf * (tb - ta), self.phase_index(tm))
        self._last = (key, out)
        return out

    def ion_1d(self, ta, tb, ion_up, atom_up):
        cos_rf, amp, drive, _, k = self.scalars(ta, tb)
        v = (self.ion_c * cos_rf) * self.xi2
        if ion_up:
            v = v + drive * self.xi
        if atom_up and self.coeffs:
            v = v + amp * self.pure_i[k]
        return v

    def atom_1d(self, ta, tb, atom_up):
        _, amp, _, _, k = self.scalars(ta, tb)
        v = self.atom_c * self.xa2
        if atom_up and self.coeffs:
            v = v + amp * self.pure_a[k]
        return v

    def mixed_phase(self, ta, tb):
        """exp(-i h V_mixed) on the grid for the kick window."""
        _, amp, _, h, k = self.scalars(ta, tb)
        phi = (h * amp) * self.mixed[k]
        return _small_phase(phi, abs(h * amp) * self.mixed_max[k])

    def scalar_phase(self, ta, tb):
        """Phase accumulated from the position-independent part of the dressed potential."""
        _, amp, _, h, k = self.scalars(ta, tb)
        return h * amp * self.v00[k] if self.coeffs else 0.0

    def kick_2d(self, ta, tb, sector):
        atom_up, ion_up = _flags(sector)
        h = self.scalars(ta, tb)[3]
        f = np.outer(np.exp(-1j * h * self.ion_1d(ta, tb, ion_up, atom_up)),
                     np.exp(-1j * h * self.atom_1d(ta, tb, atom_up)))
        if atom_up and self.coeffs:
            f = f * self.mixed_phase(ta, tb)
        return f * np.exp(-1j * self.scalar_phase(ta, tb)) if atom_up else f


def _small_phase(phi, bound=None):
    """exp(-i phi) by a short series when |phi| is small (much cheaper than exp on a grid)."""
    bound = np.abs(phi).max() if bound is None else bound
    if bound > 0.1:
        return np.exp(-1j * phi)
    p2 = phi * phi
    out = np.empty(phi.shape, complex)
    if bound < 0.01:
        # truncation error below bound^5 / 120 < 1e-12
        out.real = 1 - p2 * (0.5 - p2 / 24)
        out.imag = -phi * (1 - p2 / 6)
    else:
        out.real = 1 - p2 * (0.5 - p2 * (1 / 24 - p2 / 720))
        out.imag = -phi * (1 - p2 * (1 / 6 - p2 / 120))
    return out


@njit(cache=True, fastmath=True)
def _kick_atom_up(psi, fi, fa, mixed, a, series):
    """psi[s, i, j] *= fi[s, i] fa[j] exp(-i a mixed[i, j]) in place.

    Fused form of ``_small_phase`` times the one-dimensional factors; avoids
    the grid-sized temporaries of the numpy expression. ``series`` selects the
    sixth-order expansion, valid when |a mixed| <= 0.1 everywhere.
    """
    ns, ni, na = psi.shape
    row = np.empty(na, np.complex128)
    for i in range(ni):
        if series:
            for j in range(na):
                phi = a * mixed[i, j]
                p2 = phi * phi
                row[j] = complex(1 - p2 * (0.5 - p2 * (1 / 24 - p2 / 720)),
                                 -phi * (1 - p2 * (1 / 6 - p2 / 120))) * fa[j]
        else:
            for j in range(na):
                phi = a * mixed[i, j]
                row[j] = complex(math.cos(phi), -math.sin(phi)) * fa[j]
        for k in range(ns):
            f = fi[k, i]
            for j in range(na):
                psi[k, i, j] *= row[j] * f


def _flags(sector: str):
    return sector[0] == "u", sector[1] == "u"


# --- stepping --------------------------------------------------------------------------

def split_step(wf: SectorWavefunction, t: float, dt: float, params: MMParams, grid: Grid2D,
               model: _Model | None = None) -> SectorWavefunction:
    """One symmetric step: half potential, kinetic in momentum space, half potential.

    ``dt`` may be negative for backward evolution. Each half kick averages
    the fast time dependence over its own half interval.
    """
    model = model or _Model(params, grid)
    tau = params.trap.Omega_rf * dt
    kin = np.exp(-1j * tau * (model.kin_i[:, None] + model.kin_a[None, :]))
    tm = t + dt / 2
    psi = wf.psi * model.kick_2d(t, tm, wf.sector)
    psi = sfft.ifft2(kin * sfft.fft2(psi))
    psi = psi * model.kick_2d(tm, t + dt, wf.sector)
    return SectorWavefunction(wf.sector, psi, t + dt)


@dataclass
class Trace:
    t: list = field(default_factory=list)
    x_i: list = field(default_factory=list)
    x_a: list = field(default_factory=list)
    n_i: list = field(default_factory=list)
    n_a: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    edge: list = field(default_factory=list)
    strobe: list = field(default_factory=list)

    def arrays(self) -> dict:
        return {k: np.asarray(v) for k, v in self.__dict__.items()}


class _Observer:
    def __init__(self, model: _Model, params: MMParams, grid: Grid2D):
        self.m, self.p, self.g = model, params, grid
        self.dxi, self.dxa = grid.spacing
        ki, ka = grid.wavenumbers()
        self.ki2, self.ka2 = ki**2, ka**2
        self.xi_m, self.xa_m = grid.axes()
        self.edge = np.zeros((grid.n_i, grid.n_a), bool)
        self.edge[:2, :] = self.edge[-2:, :] = True
        self.edge[:, :2] = self.edge[:, -2:] = True
        self.period = params.trap.period

    def record(self, tr: Trace, t, psi, sector):
        rho = np.abs(psi) ** 2 * self.dxi * self.dxa
        norm = rho.sum()
        pi, pa = rho.sum(axis=1), rho.sum(axis=0)
        xi = pi @ self.xi_m / norm
        xa = pa @ self.xa_m / norm
        phik = np.abs(sfft.fft2(psi)) ** 2
        phik /= phik.sum()
        p_i2 = HBAR**2 * (phik.sum(axis=1) @ self.ki2)
        p_a2 = HBAR**2 * (phik.sum(axis=0) @ self.ka2)
        x_i2 = pi @ self.xi_m**2 / norm
        x_a2 = pa @ self.xa_m**2 / norm
        p = self.p
        mi, ma = p.ion.mass, p.atom.mass
        n_i = (p_i2 / (2 * mi) + mi * p.omega_i**2 * x_i2 / 2) / (HBAR * p.omega_i) - 0.5
        n_a = (p_a2 / (2 * ma) + ma * p.omega_a**2 * x_a2 / 2) / (HBAR * p.omega_a) - 0.5
        # instantaneous energy of the ion trap plus atom trap, in J
        cos_rf = self.m.cos_rf(t)
        E_ion = p_i2 / (2 * mi) + self.m.ion_c * cos_rf * x_i2 / self.m.u.length_unit**2 * self.m.u.energy_unit
        E_atom = p_a2 / (2 * ma) + ma * p.omega_a**2 * x_a2 / 2
        phase = (t / self.period) % 1.0
        tr.strobe.append(min(phase, 1 - phase) < 1e-6)
        tr.t.append(t)
        tr.x_i.append(xi)
        tr.x_a.append(xa)
        tr.n_i.append(n_i)
        tr.n_a.append(n_a)
        tr.energy.append(E_ion + E_atom)
        tr.norm.append(norm)
        tr.edge.append(rho[self.edge].sum())


def _sample_steps(n_steps, n_samples, zoom, dt, steps_per_rf):
    """Step indices to record: a stroboscopic comb at fixed rf phase plus zoom windows.

    Sampling at a fixed rf phase removes the micromotion ripple from the
    coarse trace without filtering; the comb is as dense as whole rf periods
    allow while still giving at least ``n_samples`` points when possible.
    """
    periods = n_steps // steps_per_rf
    if periods >= 1:
        stride = steps_per_rf * max(1, periods // max(n_samples, 1))
    else:
        stride = max(1, n_steps // max(n_samples, 1))
    marks = set(range(0, n_steps + 1, stride))
    marks.add(n_steps)
    if zoom is not None:
        start, length = zoom
        a = int(start / dt)
        b = min(n_steps, int((start + length) / dt) + 1)
        marks.update(range(a, b + 1))
    return marks


def evolve_sectors(wfs: dict, params: MMParams, grid: Grid2D, n_steps: int | None = None,
                   n_samples: int = 1000, zoom=None, edge_tol: float = 1e-6,
                   model: _Model | None = None) -> dict:
    """Evolve sector wavefunctions together with merged half steps.

    Sectors with the atom down are propagated as separable one-dimensional
    problems (the atom then only feels its own trap). Returns
    ``{sector: (final SectorWavefunction, Trace)}``.
    """
    model = model or _Model(params, grid)
    n_steps = params.n_steps if n_steps is None else n_steps
    marks = _sample_steps(n_steps, n_samples, zoom, params.dt, params.steps_per_rf)
    obs = _Observer(model, params, grid)
    out = {}
    two_d = [s for s in wfs if _flags(s)[0]]
    one_d = [s for s in wfs if not _flags(s)[0]]
    if two_d:
        out.update(_run_2d(two_d, wfs, model, n_steps, marks, obs, edge_tol))
    if one_d:
        out.update(_run_1d(one_d, wfs, model, n_steps, marks, obs, edge_tol))
    return out


def _check_edge(tr: Trace, sector, tol):
    if tr.edge and tr.edge[-1] > tol:
        raise BoundaryLeakError(f"edge probability {tr.edge[-1]:.2e} in sector {sector}")


def _march(n_steps, marks, model, kick, drift, record):
    """Strang splitting with merged interior half kicks.

    ``kick(ta, tb)`` applies the potential over a window, ``drift()`` a full
    kinetic step, ``record(t)`` samples the state at a completed step.
    """
    dt = model.p.dt
    half = dt / 2
    t0 = model.time(0)
    if 0 in marks:
        record(t0)
    kick(0.0, half)
    for n in range(1, n_steps + 1):
        drift()
        t = n * dt
        if n in marks or n == n_steps:
            kick(t - half, t)
            record(model.time(n))
            if n < n_steps:
                kick(t, t + half)
        else:
            kick(t - half, t + half)


def _run_2d(sectors, wfs, model, n_steps, marks, obs, tol):
    kin = np.exp(-1j * model.dtau * (model.kin_i[:, None] + model.kin_a[None, :]))
    state = {"psi": np.array([wfs[s].psi for s in sectors])}
    traces = {s: Trace() for s in sectors}
    phase = [0.0]
    ion_up = [_flags(s)[1] for s in sectors]

    def kick(ta, tb):
        _, amp, _, h, k = model.scalars(ta, tb)
        fa = np.exp(-1j * h * model.atom_1d(ta, tb, True))
        fi = np.array([np.exp(-1j * h * model.ion_1d(ta, tb, up, True)) for up in ion_up])
        psi = state["psi"]
        if model.coeffs:
            a = h * amp
            _kick_atom_up(psi, fi, fa, model.mixed[k], a, abs(a) * model.mixed_max[k] <= 0.1)
        else:
            psi *= fa
            psi *= fi[:, :, None]
        phase[0] += model.scalar_phase(ta, tb)

    def drift():
        psi = sfft.fft2(state["psi"], axes=(1, 2), overwrite_x=True)
        psi *= kin
        state["psi"] = sfft.ifft2(psi, axes=(1, 2), overwrite_x=True)

    def record(t):
        for k, s in enumerate(sectors):
            obs.record(traces[s], t, state["psi"][k], s)
            _check_edge(traces[s], s, tol)

    _march(n_steps, marks, model, kick, drift, record)
    psi = state["psi"] * np.exp(-1j * phase[0])
    T = model.time(n_steps)
    return {s: (SectorWavefunction(s, psi[k], T), traces[s]) for k, s in enumerate(sectors)}


def _product_factors(sectors, wfs):
    rows = []
    for s in sectors:
        # rank-one split, exact for product inputs
        u, sv, vh = np.linalg.svd(wfs[s].psi)
        if sv.size > 1 and sv[1] > 1e-10 * sv[0]:
            raise ValueError("one-dimensional path needs a product wavefunction")
        rows.append((u[:, 0] * sv[0], vh[0]))
    phi_a = rows[0][1]
    for _, va in rows[1:]:
        if not np.allclose(va, phi_a):
            raise ValueError("atom-down sectors must share the atom wavefunction")
    return np.array([r[0] for r in rows]), phi_a.copy()


def _run_1d(sectors, wfs, model, n_steps, marks, obs, tol):
    # atom-down sectors: psi = phi_i(x_i) phi_a(x_a), the atom only feels its own trap
    phi_i, phi_a = _product_factors(sectors, wfs)
    state = {"i": phi_i, "a": phi_a}
    ion_up = [_flags(s)[1] for s in sectors]
    kin_i = np.exp(-1j * model.dtau * model.kin_i)
    kin_a = np.exp(-1j * model.dtau * model.kin_a)
    traces = {s: Trace() for s in sectors}

    def kick(ta, tb):
        h = model.scalars(ta, tb)[3]
        state["i"] = state["i"] * np.array(
            [np.exp(-1j * h * model.ion_1d(ta, tb, up, False)) for up in ion_up])
        state["a"] = state["a"] * np.exp(-1j * h * model.atom_1d(ta, tb, False))

    def drift():
        state["i"] = sfft.ifft(kin_i * sfft.fft(state["i"], axis=1), axis=1)
        state["a"] = sfft.ifft(kin_a * sfft.fft(state["a"]))

    def record(t):
        for k, s in enumerate(sectors):
            obs.record(traces[s], t, np.outer(state["i"][k], state["a"]), s)
            _check_edge(traces[s], s, tol)

    _march(n_steps, marks, model, kick, drift, record)
    T = model.time(n_steps)
    return {s: (SectorWavefunction(s, np.outer(state["i"][k], state["a"]), T), traces[s])
            for k, s in enumerate(sectors)}


def run_micromotion_gate(params: MMParams, grid: Grid2D | None = None, n_samples: int = 2500,
                         zoom=None, sectors=SECTOR_LABELS) -> dict:
    """Evolve all four spin sectors from the oscillator ground states to ``t_end``.

    Returns ``{sector: Trace arrays}`` plus ``"final"`` wavefunctions and
    ``"metrics"`` (see ``gate_metrics``).
    """
    grid = grid or Grid2D.for_params(params)
    wfs = init_gaussian(grid, params, sectors)
    res = evolve_sectors(wfs, params, grid, n_samples=n_samples, zoom=zoom)
    out = {s: res[s][1].arrays() for s in sectors}
    out["final"] = {s: res[s][0] for s in sectors}
    out["metrics"] = gate_metrics(out, params, sectors)
    return out


def gate_metrics(result: dict, params: MMParams, sectors=SECTOR_LABELS) -> dict:
    """Secular amplitude, return-to-orbit excursion and atom displacement per sector.

    Uses only the stroboscopic samples (fixed rf phase). The final excursion is
    the largest |<x_i>| over the last secular period; ripple is the peak-to-peak
    <x_i> within any dense zoom samples.
    """
    T_sec = TWO_PI / params.omega_secular
    m = {}
    for s in sectors:
        tr = result[s]
        st = tr["strobe"].astype(bool)
        t, x = tr["t"][st], tr["x_i"][st]
        zoom = ~st
        m[s] = {
            "max_secular_x_i": float(np.abs(x).max()),
            "final_excursion_x_i": float(np.abs(x[t >= t[-1] - T_sec]).max()),
            "mean_x_a_late": float(np.mean(tr["x_a"][st][t > params.ramp_time])),
            "ripple_x_i": float(np.ptp(tr["x_i"][zoom])) if zoom.any() else 0.0,
            "norm_drift": float(np.abs(tr["norm"] - tr["norm"][0]).max()),
            "max_edge": float(tr["edge"].max()),
        }
    return m


# --- classical orbit check --------------------------------------------------------------

_TAYLOR_KEYS = ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3))


class _ClassicalModel:
    """Forces for the classical orbit check, tabulated at the RK4 stage phases.

    RK4 with step T_rf / steps_per_rf only visits rf phases that are multiples
    of half a step, so trap factors and Taylor coefficients are exact table
    lookups.
    """

    def __init__(self, params: MMParams, steps_per_rf: int):
        p = self.p = params
        self.h = p.trap.period / steps_per_rf
        n_ph = 2 * steps_per_rf
        self.n_ph = n_ph
        ts = np.arange(n_ph) * self.h / 2
        m, e, k = p.ion.mass, E_CHARGE, K_COULOMB
        Q = p.trap.Omega_rf**2 * p.trap.q * np.cos(p.trap.Omega_rf * ts)
        self.P = (m * m * Q * Q / (4 * e * e)).tolist()
        self.B = (m * k * Q).tolist()
        self.C = e * e * k * k
        self.ion_k = (m * Q / 2).tolist()        # e E_trap / x on the ion
        dr = p.dressing
        self.xi1, self.xi2, self.xi3 = HBAR * dr.Omega**2, dr.Delta0, dr.alpha / (2 * HBAR)
        tabs = [taylor3(p.d, t, dr, p.trap, p.ion).values for t in ts]
        self.taylor = [[tb[key] for key in _TAYLOR_KEYS] for tb in tabs]
        self.k_drive = p.eta_Omega * HBAR / p.ell_i

    def accel(self, m_idx, t, rows, xs):
        """Accelerations for every row; ``m_idx`` indexes the half-step phase table."""
        p = self.p
        ph = m_idx % self.n_ph
        r = _ramp(t, p)
        c = math.cos(p.omega_v * t)
        amp = r * ((1 + c) / 2 if p.modulation == "plus" else (1 - c) / 2)
        drive = self.k_drive * c * (r if p.ramp_drive else 1.0)
        m_i, m_a = p.ion.mass, p.atom.mass
        wa2 = p.omega_a**2
        kq = self.ion_k[ph]
        P, B, C, d = self.P[ph], self.B[ph], self.C, p.d
        c10, c01, c20, c11, c02, c30, c21, c12, c03 = self.taylor[ph]
        out = []
        for (ion_up, atom_up, taylor), (xi, xa) in zip(rows, xs):
            Fi = kq * xi
            Fa = -m_a * wa2 * xa
            if ion_up:
                Fi -= drive
            if atom_up:
                if taylor:
                    dVi = (c10 + c20 * xi + c30 * xi * xi / 2 + c11 * xa + c21 * xi * xa
                           + c12 * xa * xa / 2)
                    dVa = (c01 + c02 * xa + c03 * xa * xa / 2 + c11 * xi + c21 * xi * xi / 2
                           + c12 * xi * xa)
                else:
                    X = xa + d
                    sep = X - xi
                    s2 = sep * sep
                    s3 = s2 * sep
                    s5 = s3 * s2
                    f = P * X * X + C / (s2 * s2) + B * X / s2
                    gp = -self.xi1 * self.xi3 / (self.xi2 + self.xi3 * f) ** 2
                    dVi = gp * (4 * C / s5 + 2 * B * X / s3)
                    dVa = gp * (2 * P * X - 4 * C / s5 + B / s2 - 2 * B * X / s3)
                Fi -= amp * dVi
                Fa -= amp * dVa
            out.append((Fi / m_i, Fa / m_a))
        return out


def classical_orbits(params: MMParams, rows, steps_per_rf: int = 100,
                     t_end: float | None = None, stride: int = 1):
    """RK4 orbits from rest at the equilibrium positions for several model rows.

    ``rows`` holds (ion_up, atom_up, use_taylor) triples. Returns
    (t, x_i[row, sample], x_a[row, sample]) in metres, keeping every
    ``stride``-th step.
    """
    cm = _ClassicalModel(params, steps_per_rf)
    h = cm.h
    n = int(round((params.t_end if t_end is None else t_end) / h))
    R = len(rows)
    x = [(0.0, 0.0)] * R
    v = [(0.0, 0.0)] * R
    keep_t, keep_i, keep_a = [0.0], [[0.0] * R], [[0.0] * R]
    for step in range(n):
        t = step * h
        m0 = 2 * step
        a1 = cm.accel(m0, t, rows, x)
        x2 = [(xi + h / 2 * vi, xa + h / 2 * va) for (xi, xa), (vi, va) in zip(x, v)]
        a2 = cm.accel(m0 + 1, t + h / 2, rows, x2)
        x3 = [(xi + h / 2 * vi + h * h / 4 * ai, xa + h / 2 * va + h * h / 4 * aa)
              for (xi, xa), (vi, va), (ai, aa) in zip(x, v, a1)]
        a3 = cm.accel(m0 + 1, t + h / 2, rows, x3)
        x4 = [(xi + h * vi + h * h / 2 * ai, xa + h * va + h * h / 2 * aa)
              for (xi, xa), (vi, va), (ai, aa) in zip(x, v, a2)]
        a4 = cm.accel(m0 + 2, t + h, rows, x4)
        nx, nv = [], []
        for r in range(R):
            (xi, xa), (vi, va) = x[r], v[r]
            nx.append((xi + h * vi + h * h / 6 * (a1[r][0] + a2[r][0] + a3[r][0]),
                       xa + h * va + h * h / 6 * (a1[r][1] + a2[r][1] + a3[r][1])))
            nv.append((vi + h / 6 * (a1[r][0] + 2 * a2[r][0] + 2 * a3[r][0] + a4[r][0]),
                       va + h / 6 * (a1[r][1] + 2 * a2[r][1] + 2 * a3[r][1] + a4[r][1])))
        x, v = nx, nv
        if (step + 1) % stride == 0 or step == n - 1:
            keep_t.append((step + 1) * h)
            keep_i.append([xx[0] for xx in x])
            keep_a.append([xx[1] for xx in x])
    return np.array(keep_t), np.array(keep_i).T, np.array(keep_a).T


def taylor_adequacy_check(params: MMParams, t_end: float | None = None, steps_per_rf: int = 100,
                          sectors=("ud", "uu"), compare_full_only: bool = False) -> dict:
    """Largest orbit difference between the full and third-order potentials.

    Runs the classical equations of motion for the atom-up sectors, the only
    ones that feel the dressed potential, and reports deviations in units of
    ell_i and ell_a. ``compare_full_only`` runs the full potential on both
    sides (a self-comparison that must give zero).
    """
    rows = []
    for s in sectors:
        atom_up, ion_up = _flags(s)
        rows += [(ion_up, atom_up, False), (ion_up, atom_up, not compare_full_only)]
    _, XI, XA = classical_orbits(params, rows, steps_per_rf, t_end)
    report = {}
    for k, s in enumerate(sectors):
        di = float(np.abs(XI[2 * k] - XI[2 * k + 1]).max() / params.ell_i)
        da = float(np.abs(XA[2 * k] - XA[2 * k + 1]).max() / params.ell_a)
        report[s] = {"ion": di, "atom": da, "max_x_i": float(np.abs(XI[2 * k]).max() / params.ell_i),
                     "max_x_a": float(np.abs(XA[2 * k]).max() / params.ell_a)}
    report["max_deviation_ion"] = max(report[s]["ion"] for s in sectors)
    report["max_deviation_atom"] = max(report[s]["atom"] for s in sectors)
    report["max_deviation"] = max(report["max_deviation_ion"], report["max_deviation_atom"])
    return report


def full_potential(params: MMParams, x_i, x_a, t):
    """Trap-modified dressed potential (J) at arbitrary ion/atom displacements."""
    return v_tilde(x_i, x_a, t, params.d, params.dressing, params.trap, params.ion)
