"""Independent reference calculations used by the tests.

Nothing here imports the routines it checks; each oracle takes a different
numerical route (ODE integration, high-precision differentiation, closed
forms) to the same quantity.
"""
from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy.integrate import quad, solve_ivp

HBAR = 1.054571817e-34


def mathieu_beta_floquet(a: float, q: float) -> float:
    """Characteristic exponent from the monodromy matrix of x'' + (a - 2q cos 2tau) x = 0.

    Integrates both fundamental solutions over one period (pi) with a
    high-order adaptive Runge-Kutta scheme; for a stable solution the trace
    of the monodromy matrix is 2 cos(pi beta).
    """
    def rhs(tau, y):
        k = a - 2 * q * math.cos(2 * tau)
        return [y[1], -k * y[0], y[3], -k * y[2]]

    sol = solve_ivp(rhs, (0.0, math.pi), [1.0, 0.0, 0.0, 1.0], method="DOP853",
                    rtol=1e-13, atol=1e-15)
    y = sol.y[:, -1]
    trace = y[0] + y[3]
    return math.acos(trace / 2) / math.pi


def rk4_monodromy_beta(a: float, q: float, steps: int = 4000) -> float:
    """Same quantity with a fixed-step classical RK4 integrator."""
    h = math.pi / steps
    M = np.eye(2)

    def f(tau, Y):
        k = a - 2 * q * math.cos(2 * tau)
        return np.array([[0.0, 1.0], [-k, 0.0]]) @ Y

    tau = 0.0
    for _ in range(steps):
        k1 = f(tau, M)
        k2 = f(tau + h / 2, M + h / 2 * k1)
        k3 = f(tau + h / 2, M + h / 2 * k2)
        k4 = f(tau + h, M + h * k3)
        M = M + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        tau += h
    return math.acos(np.trace(M) / 2) / math.pi


def mp_partial(fun, j: int, k: int, x_i=0.0, x_a=0.0, dps: int = 40):
    """d^(j+k) fun / dx_i^j dx_a^k by mpmath numerical differentiation at high precision."""
    with mpmath.workdps(dps):
        val = mpmath.diff(lambda xi, xa: fun(xi, xa), (mpmath.mpf(x_i), mpmath.mpf(x_a)), (j, k))
    return float(val)


def hydrogen_1s_u(r):
    """u(r) = r R_10(r) = 2 r exp(-r) in atomic units."""
    r = np.asarray(r, float)
    return 2 * r * np.exp(-r)


def driven_oscillator_alpha(force, omega: float, ell: float, t: float) -> complex:
    """Coherent amplitude after a classical force F(t) acting through x = ell (a + a^dag).

    In the interaction picture of hbar omega a^dag a the state stays coherent
    with alpha(t) = -(i/hbar) int_0^t F(s) ell exp(i omega s) ds, exactly.
    """
    lim = max(50, int(4 * omega * t / (2 * math.pi)))
    # absolute floor so a component that integrates to ~0 does not chase roundoff
    floor = 1e-13 * t * max(abs(force(s)) for s in np.linspace(0, t, 101))
    re = quad(lambda s: force(s) * math.cos(omega * s), 0, t, limit=lim, epsabs=floor, epsrel=1e-11)[0]
    im = quad(lambda s: force(s) * math.sin(omega * s), 0, t, limit=lim, epsabs=floor, epsrel=1e-11)[0]
    return -1j * ell / HBAR * (re + 1j * im)


def coherent_amplitudes(alpha: complex, n: int) -> np.ndarray:
    """Fock amplitudes of |alpha> truncated to n levels."""
    k = np.arange(n)
    logf = np.array([math.lgamma(m + 1) for m in k])
    mag = np.exp(-abs(alpha) ** 2 / 2 + k * math.log(abs(alpha)) - logf / 2) if alpha != 0 \
        else (k == 0).astype(float)
    return mag * np.exp(1j * k * np.angle(alpha))


def harmonic_mean_position(t, x0: float, omega: float):
    """<x>(t) of a displaced ground state released in a harmonic well."""
    return x0 * np.cos(omega * np.asarray(t))


def free_gaussian_variance(t, sigma0: float, mass: float):
    """Spreading of a minimum-uncertainty Gaussian of position width sigma0."""
    return sigma0**2 * (1 + (HBAR * np.asarray(t) / (2 * mass * sigma0**2)) ** 2)


def thermal_trace(nbar: float, n_max: int) -> float:
    """Retained weight of one thermal mode truncated at n_max."""
    x = nbar / (nbar + 1)
    return 1 - x ** (n_max + 1)
