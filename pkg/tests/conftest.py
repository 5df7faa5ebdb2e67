import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

TWO_PI = 2 * math.pi

# filled by test_acceptance.py, printed at the end of the session
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def ion():
    from rydion.species import ytterbium171_ion
    return ytterbium171_ion()


@pytest.fixture(scope="session")
def li7():
    from rydion.species import lithium7
    return lithium7()


@pytest.fixture(scope="session")
def li6():
    from rydion.species import lithium6
    return lithium6()


@pytest.fixture(scope="session")
def reference_gate_params(ion, li7):
    """Gate parameters with the width pinned to 1.4 um and the quoted drive and detuning."""
    from rydion.constants import HBAR
    from rydion.dressed import DressingParams
    from rydion.gate import gate_params_from_dressing
    p = DressingParams(TWO_PI * 10.02e6, TWO_PI * 0.4e9, atom=li7)
    c4 = HBAR * p.Delta0 * (1.4e-6) ** 4
    return gate_params_from_dressing(p, ion, li7, omega_i=TWO_PI * 250e3, omega_a=TWO_PI * 205e3,
                                     c4=c4, eta_Omega=TWO_PI * 1.045e3, delta=TWO_PI * 1.040e3)


@pytest.fixture(scope="session")
def reference_gate_run(reference_gate_params):
    from rydion.gate import run_gate
    return run_gate(params=reference_gate_params, n_samples=200)


@pytest.fixture(scope="session")
def reference_thermal_run(reference_gate_params):
    from rydion.gate import ThermalSpec, run_thermal
    return run_thermal(ThermalSpec(0.25, 0.25, 3), reference_gate_params)


@pytest.fixture(scope="session")
def mm_smoke():
    """128 x 128 grid, 100 steps per rf period, full gate with a zoom window."""
    import time
    from rydion.micromotion import Grid2D, default_params, run_micromotion_gate
    p = default_params(steps_per_rf=100)
    g = Grid2D.for_params(p, n=128)
    t0 = time.perf_counter()
    res = run_micromotion_gate(p, g, zoom=(470e-6, 2e-6))
    res["wall_time"] = time.perf_counter() - t0
    res["params"] = p
    return res


@pytest.fixture(scope="session")
def taylor_report():
    from rydion.micromotion import default_params, taylor_adequacy_check
    return taylor_adequacy_check(default_params(d=1e-6))


@pytest.fixture(scope="session")
def li6_curves(li6):
    """Field-free curves: n = 25..35, all l, m_j = 1/2, 200 log points on 0.3..4 um."""
    import numpy as np
    from rydion.bo import BOBasis, diagonalize_curves
    from rydion.rydberg import BasisSpec
    basis = BOBasis(li6, BasisSpec(25, 35, 34))
    R = np.geomspace(0.3e-6, 4e-6, 200)
    return basis, diagonalize_curves(R, basis)
