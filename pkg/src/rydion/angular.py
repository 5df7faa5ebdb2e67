"""Angular-momentum algebra: 3j symbols, Clebsch-Gordan coefficients and
spherical-tensor matrix elements in the spin-orbit coupled |l j m_j> basis."""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np


def _twice(x) -> int:
    t = round(2 * x)
    if abs(t - 2 * x) > 1e-9:
        raise ValueError(f"{x} is not a multiple of 1/2")
    return int(t)


@lru_cache(maxsize=None)
def _three_j_doubled(a, b, c, al, be, ga):
    # all arguments are twice the physical values
    if al + be + ga != 0:
        return 0.0
    if abs(al) > a or abs(be) > b or abs(ga) > c:
        return 0.0
    if c > a + b or c < abs(a - b):
        return 0.0
    if (a + b + c) % 2 or (a - al) % 2 or (b - be) % 2 or (c - ga) % 2:
        return 0.0
    f = math.factorial
    s1 = (a + b - c) // 2
    s2 = (a - b + c) // 2
    s3 = (-a + b + c) // 2
    s4 = (a + b + c) // 2 + 1
    tri = Fraction(f(s1) * f(s2) * f(s3), f(s4))
    pre = (f((a + al) // 2) * f((a - al) // 2) * f((b + be) // 2) * f((b - be) // 2)
           * f((c + ga) // 2) * f((c - ga) // 2))
    kmin = max(0, (b - c - al) // 2, (a - c + be) // 2)
    kmax = min(s1, (a - al) // 2, (b + be) // 2)
    total = 0
    for k in range(kmin, kmax + 1):
        den = (f(k) * f(s1 - k) * f((a - al) // 2 - k) * f((b + be) // 2 - k)
               * f((c - b + al) // 2 + k) * f((c - a - be) // 2 + k))
        total += Fraction((-1) ** k, den)
    sign = -1 if ((a - b - ga) // 2) % 2 else 1
    val = sign * math.sqrt(tri * pre) * float(total)
    return val


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol (Racah formula, exact rational arithmetic)."""
    return _three_j_doubled(_twice(j1), _twice(j2), _twice(j3), _twice(m1), _twice(m2), _twice(m3))


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """<j1 m1, j2 m2 | J M> in the Condon-Shortley convention."""
    phase = _twice(j1 - j2 + M) // 2
    return (-1) ** phase * math.sqrt(2 * J + 1) * wigner_3j(j1, j2, J, m1, m2, -M)


def tensor_element_lm(l, m, k, q, lp, mp) -> float:
    """<l m | C^k_q | l' m'> for the unnormalised spherical harmonic C^k_q = sqrt(4pi/(2k+1)) Y_kq."""
    if m != q + mp:
        return 0.0
    red = wigner_3j(l, k, lp, 0, 0, 0)
    if red == 0.0:
        return 0.0
    return ((-1) ** int(m) * math.sqrt((2 * l + 1) * (2 * lp + 1)) * red
            * wigner_3j(l, k, lp, -m, q, mp))


def tensor_components(k: int, direction) -> dict:
    """C^k_q evaluated at a unit vector, for q = -k..k (k = 1 or 2)."""
    x, y, z = np.asarray(direction, float) / np.linalg.norm(direction)
    if k == 1:
        return {-1: (x - 1j * y) / math.sqrt(2), 0: z + 0j, 1: -(x + 1j * y) / math.sqrt(2)}
    if k == 2:
        s = math.sqrt(3 / 8)
        return {-2: s * (x - 1j * y) ** 2, -1: math.sqrt(1.5) * z * (x - 1j * y),
                0: 0.5 * (3 * z * z - 1) + 0j,
                1: -math.sqrt(1.5) * z * (x + 1j * y), 2: s * (x + 1j * y) ** 2}
    raise ValueError("only rank 1 and 2 are supported")


# --- coupled |l j m_j> bookkeeping ---------------------------------------

def coupled_states(l: int):
    """[(j, m_j)] for the spin-1/2 coupled states of orbital l, ordered by j then m_j."""
    out = []
    for j in (l - 0.5, l + 0.5):
        if j < 0:
            continue
        out.extend((j, -j + i) for i in range(int(round(2 * j)) + 1))
    return out


def uncoupled_states(l: int):
    """[(m_l, m_s)] with m_s in (+1/2, -1/2) as the fast index."""
    return [(ml, ms) for ml in range(-l, l + 1) for ms in (0.5, -0.5)]


@lru_cache(maxsize=None)
def coupling_matrix(l: int) -> np.ndarray:
    """Clebsch-Gordan matrix U with |j m_j> = sum U[row, col] |m_l m_s>."""
    cs, us = coupled_states(l), uncoupled_states(l)
    U = np.zeros((len(cs), len(us)))
    for r, (j, mj) in enumerate(cs):
        for c, (ml, ms) in enumerate(us):
            if ml + ms == mj:
                U[r, c] = clebsch_gordan(l, ml, 0.5, ms, j, mj)
    return U


@lru_cache(maxsize=None)
def _orbital_tensor(l, lp, k, q) -> np.ndarray:
    M = np.zeros((2 * l + 1, 2 * lp + 1))
    for a, ml in enumerate(range(-l, l + 1)):
        for b, mlp in enumerate(range(-lp, lp + 1)):
            M[a, b] = tensor_element_lm(l, ml, k, q, lp, mlp)
    return M


_SPIN = {
    "x": np.array([[0, 0.5], [0.5, 0]], complex),
    "y": np.array([[0, -0.5j], [0.5j, 0]], complex),
    "z": np.array([[0.5, 0], [0, -0.5]], complex),
    "1": np.eye(2, dtype=complex),
}


def _unit_cartesian(l, lp):
    """Orbital matrices of the unit-vector components (x, y, z) of r-hat."""
    cm, c0, cp = (_orbital_tensor(l, lp, 1, q) for q in (-1, 0, 1))
    rx = (cm - cp) / math.sqrt(2)
    ry = 1j * (cm + cp) / math.sqrt(2)
    return {"x": rx.astype(complex), "y": ry, "z": c0.astype(complex)}


def _to_coupled(l, lp, orbital_matrix, spin_key="1") -> np.ndarray:
    unc = np.kron(orbital_matrix, _SPIN[spin_key])
    return coupling_matrix(l) @ unc @ coupling_matrix(lp).T


def projection_matrix(l, lp, direction) -> np.ndarray:
    """Coupled-basis matrix of n . r-hat for a unit vector n."""
    comps = tensor_components(1, direction)
    orb = sum(np.conj(comps[q]) * _orbital_tensor(l, lp, 1, q) for q in (-1, 0, 1))
    return _to_coupled(l, lp, orb)


def projection_sq_matrix(l, lp, direction) -> np.ndarray:
    """Coupled-basis matrix of (n . r-hat)^2 = 1/3 + (2/3) sum_q C2_q(n)* C2_q(r-hat)."""
    comps = tensor_components(2, direction)
    orb = sum(np.conj(comps[q]) * _orbital_tensor(l, lp, 2, q) for q in range(-2, 3))
    orb = (2 / 3) * orb
    if l == lp:
        orb = orb + np.eye(2 * l + 1) / 3
    return _to_coupled(l, lp, orb)


def spin_cross_matrix(l, lp, direction) -> np.ndarray:
    """Coupled-basis matrix of s . (n x r-hat)."""
    n = np.asarray(direction, float) / np.linalg.norm(direction)
    r = _unit_cartesian(l, lp)
    axes = "xyz"
    out = 0
    for i in range(3):
        for j in range(3):
            for kk in range(3):
                eps = _levi_civita(i, j, kk)
                if eps == 0 or n[j] == 0:
                    continue
                out = out + eps * n[j] * _to_coupled(l, lp, r[axes[kk]], axes[i])
    if isinstance(out, int):
        size = (len(coupled_states(l)), len(coupled_states(lp)))
        return np.zeros(size, complex)
    return out


def _levi_civita(i, j, k) -> int:
    return (i - j) * (j - k) * (k - i) // 2


def angular_element(bra, ket, tensor) -> complex:
    """Matrix element of a rank-1 or rank-2 spherical harmonic between coupled states.

    Parameters
    ----------
    bra, ket : tuple
        ``(l, j, m_j)``.
    tensor : tuple
        ``("dipole", q)`` for C^1_q or ``("quadrupole", q)`` for C^2_q.
    """
    kind, q = tensor
    k = {"dipole": 1, "quadrupole": 2}[kind]
    l, j, mj = bra
    lp, jp, mjp = ket
    if abs(j - l) != 0.5 or abs(jp - lp) != 0.5:
        raise ValueError("j must equal l +- 1/2")
    total = 0.0
    for ms in (0.5, -0.5):
        ml, mlp = mj - ms, mjp - ms
        if abs(ml) > l or abs(mlp) > lp:
            continue
        cg1 = clebsch_gordan(l, ml, 0.5, ms, j, mj)
        cg2 = clebsch_gordan(lp, mlp, 0.5, ms, jp, mjp)
        if cg1 == 0 or cg2 == 0:
            continue
        total += cg1 * cg2 * tensor_element_lm(l, int(round(ml)), k, q, lp, int(round(mlp)))
    return total
