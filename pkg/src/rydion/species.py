"""Species records and quantum-defect tables."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

from .constants import (AMU, GROUND_POLARIZABILITY_AU, ISOTOPE_MASS_U, M_E,
                        RYDBERG_ENERGY)


@dataclass(frozen=True)
class QuantumDefectTable:
    """Quantum defects keyed by (l, j).

    Each entry is a tuple ``(delta0, delta2)`` of Rydberg-Ritz coefficients,
    ``delta(n) = delta0 + delta2 / (n - delta0)**2``. Missing ``(l, j)`` pairs
    are hydrogenic (zero defect).
    """
    species: str
    entries: Mapping[tuple[int, float], tuple[float, float]]
    provenance: str = ""

    def __post_init__(self):
        for key, (d0, _) in self.entries.items():
            if d0 < 0:
                raise ValueError(f"negative quantum defect for {self.species} {key}")

    def lookup(self, n: int, l: int, j: float) -> tuple[float, bool]:
        """Return ``(delta, found)``; ``found`` is False for the hydrogenic fallback."""
        key = (int(l), float(j))
        if key not in self.entries:
            return 0.0, False
        d0, d2 = self.entries[key]
        return max(d0 + d2 / (n - d0) ** 2, 0.0), True

    def defect(self, n: int, l: int, j: float) -> float:
        return self.lookup(n, l, j)[0]


def load_quantum_defects(path=None, species: str = "Li") -> QuantumDefectTable:
    """Read a defect table from a CSV-like file (``species, l, j, delta0[, delta2], comment``)."""
    if path is None:
        text = resources.files("rydion").joinpath("data/quantum_defects.csv").read_text("utf-8")
        source = "packaged quantum_defects.csv"
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        source = str(path)
    entries = {}
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    for row in csv.reader(lines, skipinitialspace=True):
        if len(row) < 4:
            raise ValueError(f"malformed defect record: {row!r}")
        if row[0].strip() != species:
            continue
        l, j, d0 = int(row[1]), float(row[2]), float(row[3])
        d2 = 0.0
        if len(row) > 4:
            try:
                d2 = float(row[4])
            except ValueError:  # fifth column is the comment
                pass
        entries[(l, j)] = (d0, d2)
    if not entries:
        raise ValueError(f"no quantum defects for species {species!r} in {source}")
    return QuantumDefectTable(species, entries, provenance=source)


@dataclass(frozen=True)
class Species:
    """A particle species. ``mass`` is the total mass in kg (ions: atom minus electrons)."""
    name: str
    mass: float
    charge: int = 0
    defects: QuantumDefectTable | None = field(default=None, compare=False)
    ground_polarizability_au: float | None = None

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.charge not in (0, 1):
            raise ValueError("charge must be 0 or +1")

    @property
    def core_mass(self) -> float:
        """Mass of the ionic core seen by the valence electron."""
        return self.mass - M_E

    @property
    def electron_reduced_mass(self) -> float:
        """Electron-core reduced mass m_e m_c / M."""
        if math.isinf(self.mass):
            return M_E
        return M_E * self.core_mass / self.mass

    @property
    def rydberg_energy(self) -> float:
        """Reduced-mass Rydberg energy hcR_M in J."""
        return RYDBERG_ENERGY * self.electron_reduced_mass / M_E


def _atom(label: str, table_name: str | None) -> Species:
    defects = load_quantum_defects(species=table_name) if table_name else None
    return Species(label, ISOTOPE_MASS_U[label] * AMU, 0, defects,
                   GROUND_POLARIZABILITY_AU.get(label))


def lithium6() -> Species:
    return _atom("Li6", "Li")


def lithium7() -> Species:
    return _atom("Li7", "Li")


def hydrogen() -> Species:
    return _atom("H1", "H")


def hydrogen_infinite_mass() -> Species:
    """Hydrogenic atom with a static nucleus (the R_inf limit)."""
    return Species("H_inf", math.inf, 0, load_quantum_defects(species="H"), 4.5)


def ytterbium171_ion() -> Species:
    return Species("Yb171+", ISOTOPE_MASS_U["Yb171"] * AMU - M_E, 1)


def reduced_mass(a: Species, b: Species) -> float:
    return a.mass * b.mass / (a.mass + b.mass)
