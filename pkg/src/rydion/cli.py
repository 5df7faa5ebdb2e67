"""``rydion`` command-line front end.

Each experiment kind is a subcommand that reads a YAML config, runs the owning
module and writes CSV/JSON data plus a ``manifest.json`` listing every output
with its sha256. ``rydion figure ID`` runs a preconfigured experiment that
produces plot-ready data for one figure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import cache
from .config import KINDS, ConfigError, ExperimentConfig, load_config, parse_config
from .constants import AU_POLARIZABILITY, H_PLANCK, HBAR, TWO_PI

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICS = 0, 2, 3

FIGURES = {
    "fig2": ("bo-curves", {}),
    "figA": ("bo-curves", {"bo": {"n_min": 26, "n_max": 34, "l_max": 25,
                                  "trap_phases": ["max+", "zero", "max-"]}}),
    "fig3": ("dressed", {"dressing": {"Omega": TWO_PI * 10e6}}),
    "fig4": ("gate", {"gate": {"inputs": ["++"]}}),
    "fig5mm": ("micromotion", {}),
}

_INPUT_TAGS = {"++": "pp", "+-": "pm", "-+": "mp", "--": "mm"}


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return repr(float(x))


@dataclass
class Outputs:
    """Collects files written by one run so the manifest can list them."""
    directory: Path
    files: dict = field(default_factory=dict)

    def _write(self, name: str, data: bytes):
        path = self.directory / name
        path.write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        self._write(name, buf.getvalue().encode("utf-8"))

    def json(self, name: str, obj):
        text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
        self._write(name, text.encode("utf-8"))


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


# --- shared builders -------------------------------------------------------------

def _species(cfg: ExperimentConfig):
    from .species import lithium6, lithium7, ytterbium171_ion
    atom = {"Li6": lithium6, "Li7": lithium7}[cfg["species"]["atom"]]()
    return atom, ytterbium171_ion()


def _trap(cfg):
    from .trap import TrapParams
    t = cfg["trap"]
    try:
        return TrapParams(t["omega_i"], t["Omega_rf"], t["q"])
    except ValueError as exc:
        raise ConfigError("trap", str(exc)) from exc


def _dressing(cfg, atom):
    from .dressed import DressingParams, alpha_from_c4
    from .rydberg import make_state
    dr = cfg["dressing"]
    state = make_state(atom, dr["n"], dr["l"], dr["j"])
    alpha = None
    if "R_w" in dr:
        alpha = alpha_from_c4(HBAR * dr["Delta0"] * dr["R_w"] ** 4)
    return DressingParams(dr["Omega"], dr["Delta0"], target_state=state, atom=atom, alpha=alpha,
                          min_ratio=dr["min_ratio"])


def _pot_summary(dressing):
    from .dressed import AdiabaticPotential, force_profile, lifetime_enhancement
    pot = AdiabaticPotential.from_dressing(dressing)
    d_star = pot.force_maximum_distance
    fp = force_profile(d_star, pot)
    return pot, {
        "Omega_Hz": dressing.Omega / TWO_PI, "Delta0_Hz": dressing.Delta0 / TWO_PI,
        "A_over_h_kHz": pot.A / H_PLANCK / 1e3, "R_w_um": pot.R_w * 1e6,
        "C4_J_m4": pot.C4, "force_max_distance_um": d_star * 1e6,
        "force_max_distance_over_R_w": d_star / pot.R_w,
        "F_max_R_w_over_A": fp["F"] * pot.R_w / pot.A,
        "lifetime_enhancement": lifetime_enhancement(dressing),
    }


# --- runners ---------------------------------------------------------------------

def run_trap_info(cfg, out: Outputs, stem: str, threads: int) -> dict:
    from .trap import (char_lengths, mathieu_exponent, pseudopotential_frequency,
                       rf_crossover_distance, secular_frequency, secular_frequency_lowest_order)
    _, ion = _species(cfg)
    trap = _trap(cfg)
    report = {"ion": ion.name, "a": trap.a, "q": trap.q,
              "beta": mathieu_exponent(trap.a, trap.q),
              "secular_frequency_Hz": secular_frequency(trap) / TWO_PI,
              "secular_frequency_lowest_order_Hz": secular_frequency_lowest_order(trap) / TWO_PI,
              "secular_frequency_pure_rf_Hz": mathieu_exponent(0.0, trap.q) * trap.Omega_rf / 2 / TWO_PI,
              "pseudopotential_frequency_Hz": pseudopotential_frequency(trap) / TWO_PI,
              "rf_crossover_um": rf_crossover_distance(trap, ion) * 1e6}
    if trap.omega_i > 0:
        ell = char_lengths(trap, ion)
        report.update(ell_z_um=ell["ell_z"] * 1e6, ell_perp_um=ell["ell_perp"] * 1e6)
    out.json(f"{stem}.json", report)
    return {}


def run_bo_curves(cfg, out: Outputs, stem: str, threads: int) -> dict:
    from .bo import BOBasis, c4_second_order, diagonalize_curves, fit_c4
    from .rydberg import BasisSpec, defect_energy, make_state
    atom, ion = _species(cfg)
    b = cfg["bo"]
    try:
        spec = BasisSpec(b["n_min"], b["n_max"], b["l_max"], m_j=None if b["all_mj"] else (0.5,))
    except ValueError as exc:
        raise ConfigError("bo", str(exc)) from exc
    if not b["R_max"] > b["R_min"] > 0:
        raise ConfigError("bo.R_min", "need 0 < R_min < R_max")
    basis = BOBasis(atom, spec)
    R = np.geomspace(b["R_min"], b["R_max"], b["points"])
    target = make_state(atom, b["n"], b["l"], b["j"])
    E0 = defect_energy(atom, b["n"], b["l"], b["j"])
    c4 = c4_second_order(target, spec, atom)
    half = b["window"] / TWO_PI * H_PLANCK
    phases = b["trap_phases"] or [None]
    trap = _trap(cfg) if b["trap_phases"] else None
    summary = {"species": atom.name, "target": target.label, "basis_size": len(basis),
               "target_energy_GHz": E0 / H_PLANCK / 1e9, "C4_second_order_J_m4": c4}
    diag = {"basis_size": len(basis)}
    ref = -c4 / R**4 / H_PLANCK / 1e9 + E0 / H_PLANCK / 1e9
    for phase in phases:
        fc = None if phase is None else {"trap": trap, "phase": phase, "ion": ion,
                                         "geometry": b["geometry"]}
        curves = diagonalize_curves(R, basis, fc, threads=threads)
        asym = np.array([s.energy for s in curves.labels])
        keep = np.nonzero(np.abs(asym - E0) <= half)[0]
        keep = keep[np.argsort(asym[keep], kind="stable")]
        k = curves.curve_index(b["n"], b["l"], b["j"], target.m_j)
        name = stem if phase is None else f"{stem}_{phase.replace('+', 'plus').replace('-', 'minus')}"
        header = ["R_m"] + [f"eps_{i}_over_h_GHz" for i in range(len(keep))] + ["minus_C4_R4_over_h_GHz"]
        rows = ([R[i]] + list(curves.energies[i, keep] / H_PLANCK / 1e9) + [ref[i]]
                for i in range(len(R)))
        out.csv(f"{name}.csv", header, rows)
        shift = curves.energies[:, k] - E0
        others = np.delete(curves.energies, k, axis=1)
        gap = np.min(np.abs(others - curves.energies[:, [k]]), axis=1)
        far = R >= 1.5e-6
        rel = np.abs(shift[far] / (-c4 / R[far] ** 4) - 1)
        info = {
            "trap_phase": phase, "columns": {"R_m": "separation (m)",
                                             "eps_k_over_h_GHz": "adiabatic energy / h (GHz, ordinary frequency)",
                                             "minus_C4_R4_over_h_GHz": "target energy - C4/R^4 (GHz)"},
            "labels": [curves.labels[i].label for i in keep],
            "target_column": f"eps_{int(np.nonzero(keep == k)[0][0])}_over_h_GHz",
            "target_min_gap_GHz_above_500nm": float(gap[R >= 0.5e-6].min() / H_PLANCK / 1e9),
            "target_max_rel_dev_C4_above_1p5um": float(rel.max()) if rel.size else None,
            "C4_fit_J_m4": fit_c4(curves, k, E0, 1.5e-6, R[-1]),
            "min_overlap_link": float(curves.links[:, k].min()),
            "ambiguities": len(curves.ambiguities),
        }
        out.json(f"{name}.meta.json", info)
        summary[phase or "no_trap"] = {key: info[key] for key in info if key not in ("labels", "columns")}
        diag[f"ambiguities_{phase or 'no_trap'}"] = len(curves.ambiguities)
    out.json(f"{stem}_summary.json", summary)
    return diag


def run_dressed(cfg, out: Outputs, stem: str, threads: int) -> dict:
    from .dressed import AdiabaticPotential, c4_from_alpha, match_drive, v_dressed
    atom, ion = _species(cfg)
    base = _dressing(cfg, atom)
    dd = cfg["dressed"]
    R = np.linspace(dd["R_min"], dd["R_max"], dd["points"])
    c4_g = c4_from_alpha(atom.ground_polarizability_au * AU_POLARIZABILITY)
    cols = {"R_m": R, "V_ground_over_h_kHz": -c4_g / R**4 / H_PLANCK / 1e3}
    summaries = []
    for D in dd["Delta0_list"]:
        p = base.__class__(base.Omega, D, target_state=base.target_state, atom=atom,
                           alpha=base.alpha, min_ratio=base.min_ratio)
        pot = AdiabaticPotential.from_dressing(p)
        cols[f"V_Delta0_{D / TWO_PI / 1e9:g}GHz_over_h_kHz"] = v_dressed(R, pot) / H_PLANCK / 1e3
        summaries.append(_pot_summary(p)[1])
    out.csv(f"{stem}.csv", list(cols), zip(*cols.values()))
    out.json(f"{stem}.meta.json", {
        "columns": {"R_m": "atom-ion separation (m)",
                    "V_ground_over_h_kHz": "bare ground-state -C4/R^4 divided by h (kHz)",
                    "V_Delta0_*": "dressed potential / h (kHz) for the named detuning (ordinary GHz)"},
        "Omega_Hz": base.Omega / TWO_PI})
    pot, at_base = _pot_summary(base)
    d_star = pot.force_maximum_distance
    omega_i = cfg["trap"]["omega_i"]
    if omega_i > 0:
        at_base["matched_drive_static_Hz"] = match_drive(d_star, base, None, ion, omega_i) / TWO_PI
    out.json(f"{stem}_summary.json", {"configured": at_base, "scan": summaries})
    return {}


def _gate_params(cfg):
    from .gate import gate_params_from_dressing
    atom, ion = _species(cfg)
    g = cfg["gate"]
    dr = dict(cfg["dressing"])
    kw = {}
    if g["preset"] == "reference":
        dr.setdefault("R_w", 1.4e-6)
        kw["eta_Omega"] = g.get("eta_Omega", TWO_PI * 1.045e3)
        kw["delta"] = g.get("delta", TWO_PI * 1.040e3)
    else:
        for key in ("eta_Omega", "delta"):
            if key in g:
                kw[key] = g[key]
    values = dict(cfg.values, dressing=dr)
    dressing = _dressing(ExperimentConfig(cfg.kind, values, cfg.source), atom)
    if "d" in g:
        kw["d"] = g["d"]
    return gate_params_from_dressing(
        dressing, ion, atom, omega_i=g["omega_i"], omega_a=g["omega_a"], n_ion=g["n_ion"],
        n_atom=g["n_atom"], modulation=g["modulation"], steps_per_period=g["steps_per_period"], **kw)


def _gate_header(gp) -> dict:
    from .gate import analytic_phase
    return {"eta_Omega_Hz": gp.eta_Omega / TWO_PI, "delta_Hz": gp.delta / TWO_PI,
            "omega_i_Hz": gp.omega_i / TWO_PI, "omega_a_Hz": gp.omega_a / TWO_PI,
            "gate_time_us": gp.gate_time * 1e6, "stark_ratio": gp.stark_ratio,
            "force_N": gp.force, "analytic_phase": analytic_phase(gp),
            "n_ion": gp.n_ion, "n_atom": gp.n_atom}


def run_gate_cmd(cfg, out: Outputs, stem: str, threads: int) -> dict:
    from .gate import run_gate, spin_spin_phase
    gp = _gate_params(cfg)
    g = cfg["gate"]
    res = run_gate(tuple(g["inputs"]), gp, n_samples=g["samples"])
    summary = _gate_header(gp)
    summary["spin_spin_phase"] = spin_spin_phase(gp)
    summary["inputs"] = {}
    header = ["t_us", "P_uu", "P_ud", "P_du", "P_dd", "n_ion", "n_atom"]
    for label in g["inputs"]:
        r = res[label]
        name = stem if len(g["inputs"]) == 1 else f"{stem}_{_INPUT_TAGS[label]}"
        tr = r["trace"].copy()
        tr[:, 0] *= 1e6
        out.csv(f"{name}.csv", header, tr)
        summary["inputs"][label] = {k: r[k] for k in ("fidelity", "fidelity_local", "best_bell",
                                                       "norm", "leakage")}
        summary["inputs"][label]["bell_overlaps"] = r["bell_overlaps"]
    out.json(f"{stem}.meta.json", {"columns": {
        "t_us": "time (us)", "P_xy": "spin populations after the final pi/2 pulses (atom first)",
        "n_ion": "mean ion phonon number", "n_atom": "mean atom phonon number"}})
    out.json(f"{stem}_summary.json", summary)
    return {"max_leakage": max(res[k]["leakage"] for k in res), "n_ion": gp.n_ion,
            "n_atom": gp.n_atom, "steps_per_period": gp.steps_per_period}


def run_gate_thermal(cfg, out: Outputs, stem: str, threads: int) -> dict:
    from .gate import ThermalSpec, run_thermal
    gp = _gate_params(cfg)
    th = cfg["thermal"]
    res = run_thermal(ThermalSpec(th["nbar_a"], th["nbar_i"], th["n_max"]), gp, th["input"])
    summary = _gate_header(gp)
    summary.update(input=th["input"], nbar_a=th["nbar_a"], nbar_i=th["nbar_i"], **res)
    out.json(f"{stem}_summary.json", summary)
    return {"n_max": th["n_max"], "n_ion": gp.n_ion, "n_atom": gp.n_atom}


def _mm_params(cfg):
    from .micromotion import default_params
    atom, ion = _species(cfg)
    m = cfg["micromotion"]
    kw = dict(trap=_trap(cfg), ion=ion, atom=atom, dressing=_dressing(cfg, atom), d=m["d"],
              delta_perp=m["delta_perp"], ramp_time=m["ramp"], omega_a=m["omega_a"],
              ramp_shape=m["ramp_shape"], ramp_drive=m["ramp_drive"],
              steps_per_rf=m["steps_per_rf"])
    for key in ("eta_Omega", "t_end"):
        if key in m:
            kw[key] = m[key]
    return default_params(**kw)


def run_micromotion_cmd(cfg, out: Outputs, stem: str, threads: int, zoom=None) -> dict:
    from .micromotion import SECTOR_LABELS, Grid2D, run_micromotion_gate
    p = _mm_params(cfg)
    m = cfg["micromotion"]
    grid = Grid2D.for_params(p, n=cfg["grid"]["points"], widths=cfg["grid"]["widths"])
    grid.check(p)
    if zoom is None and "zoom_start" in m:
        zoom = (m["zoom_start"], m.get("zoom_length", 2e-6))
    res = run_micromotion_gate(p, grid, n_samples=m["samples"], zoom=zoom)
    header = ["t_us", "sector", "x_i_nm", "x_a_nm", "n_i_eff", "n_a_eff"]

    def rows(strobe):
        for s in SECTOR_LABELS:
            tr = res[s]
            sel = tr["strobe"].astype(bool) == strobe
            for t, xi, xa, ni, na in zip(tr["t"][sel], tr["x_i"][sel], tr["x_a"][sel],
                                         tr["n_i"][sel], tr["n_a"][sel]):
                yield (t * 1e6, s, xi * 1e9, xa * 1e9, ni, na)

    out.csv(f"{stem}.csv", header, rows(True))
    if zoom is not None:
        out.csv(f"{stem}_zoom.csv", header, rows(False))
    out.json(f"{stem}.meta.json", {"columns": {
        "t_us": "time (us)", "sector": "spin sector, atom first (u = up, d = down)",
        "x_i_nm": "<x_ion> (nm)", "x_a_nm": "<x_atom> (nm)",
        "n_i_eff": "effective ion phonon number", "n_a_eff": "effective atom phonon number"},
        "sampling": "main file at a fixed rf phase; zoom file densely within the window"})
    met = res["metrics"]
    ref = met["ud"]["max_secular_x_i"]
    summary = {
        "eta_Omega_Hz": p.eta_Omega / TWO_PI, "delta_perp_Hz": p.delta_perp / TWO_PI,
        "secular_frequency_Hz": p.omega_secular / TWO_PI, "t_end_us": p.t_end * 1e6,
        "ell_i_nm": p.ell_i * 1e9, "ell_a_nm": p.ell_a * 1e9, "grid_points": grid.n_i,
        "steps_per_rf": p.steps_per_rf, "n_steps": p.n_steps, "metrics": met,
        "uu_suppression": ref / max(met["uu"]["max_secular_x_i"], 1e-300),
        "return_ratio": {s: met[s]["final_excursion_x_i"] / met[s]["max_secular_x_i"]
                         for s in ("ud", "du")},
    }
    out.json(f"{stem}_summary.json", summary)
    return {"grid_points": grid.n_i, "n_steps": p.n_steps,
            "max_norm_drift": max(v["norm_drift"] for v in met.values()),
            "max_edge_probability": max(v["max_edge"] for v in met.values())}


def run_taylor_check(cfg, out: Outputs, stem: str, threads: int) -> dict:
    from .dressed import match_drive
    from .micromotion import taylor_adequacy_check
    tc = cfg["taylor_check"]
    cfg.values["micromotion"]["d"] = tc["d"]
    p = _mm_params(cfg)
    rep = taylor_adequacy_check(p, t_end=tc.get("t_end"), steps_per_rf=tc["steps_per_rf"])
    drive = {m: match_drive(p.d, p.dressing, p.trap, p.ion, p.omega_i, m) / TWO_PI
             for m in ("factorized", "exact")}
    drive["static"] = match_drive(p.d, p.dressing, None, p.ion, p.omega_i) / TWO_PI
    out.json(f"{stem}_summary.json", {"d_um": p.d * 1e6, "deviation_ell_units": rep,
                                      "matched_drive_Hz": drive})
    return {"steps_per_rf": tc["steps_per_rf"]}


RUNNERS = {
    "trap-info": run_trap_info, "bo-curves": run_bo_curves, "dressed": run_dressed,
    "gate": run_gate_cmd, "gate-thermal": run_gate_thermal, "micromotion": run_micromotion_cmd,
    "taylor-check": run_taylor_check,
}
_STEMS = {"trap-info": "trap_info", "bo-curves": "bo_curves", "dressed": "dressed",
          "gate": "gate", "gate-thermal": "gate_thermal", "micromotion": "micromotion",
          "taylor-check": "taylor_check"}


def run(cfg: ExperimentConfig, out_dir, threads: int = 1, stem: str | None = None,
        zoom=None) -> dict:
    """Run one experiment, write its outputs and return the manifest (also written last)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = Outputs(out_dir)
    stem = stem or _STEMS[cfg.kind]
    t0 = time.perf_counter()
    kw = {"zoom": zoom} if cfg.kind == "micromotion" else {}
    try:
        diagnostics = RUNNERS[cfg.kind](cfg, out, stem, threads, **kw)
    except BaseException:
        # a failed run leaves no unlisted files behind
        for name in out.files:
            (out_dir / name).unlink(missing_ok=True)
        raise
    manifest = {"experiment": cfg.kind, "config_hash": cfg.hash, "code_version": __version__,
                "wall_time_s": time.perf_counter() - t0, "outputs": dict(sorted(out.files.items())),
                "diagnostics": diagnostics}
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return manifest


def figure_config(fig_id: str) -> ExperimentConfig:
    if fig_id not in FIGURES:
        raise ConfigError("figure", f"unknown figure id {fig_id!r}; valid ids: "
                          + ", ".join(sorted(FIGURES)))
    kind, raw = FIGURES[fig_id]
    cfg = parse_config({"experiment": kind})
    for block, vals in raw.items():
        cfg.values[block].update(vals)
    return cfg


def _error_codes():
    from .dressed import DressingRegimeError, LevelCrossingError
    from .gate import CutoffError, GateParamsError, IntegrationError
    from .micromotion import BoundaryLeakError, GridError
    from .rydberg import DegenerateDenominatorError, NumerovError
    from .trap import TrapInstabilityError
    # plain ValueErrors come from parameter checks in the modules
    validation = (ConfigError, GateParamsError, DressingRegimeError, GridError,
                  TrapInstabilityError, ValueError)
    numerics = (NumerovError, CutoffError, IntegrationError, BoundaryLeakError,
                LevelCrossingError, DegenerateDenominatorError)
    return validation, numerics


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rydion", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"rydion {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", required=True, help="YAML config file")
        _common(sp)
        if kind == "micromotion":
            sp.add_argument("--zoom", nargs=2, type=float, metavar=("START_US", "LEN_US"),
                            help="dense sampling window for micromotion ripple")
    fp = sub.add_parser("figure", help="emit the data behind one figure")
    fp.add_argument("figure_id", help="one of " + ", ".join(sorted(FIGURES)))
    _common(fp)
    return ap


def _common(sp):
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--no-cache", action="store_true", help="bypass the radial-integral cache")
    sp.add_argument("--threads", type=int, default=1, help="worker threads where supported")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    validation, numerics = _error_codes()
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        if args.command == "figure":
            cfg = figure_config(args.figure_id)
            stem = args.figure_id
        else:
            cfg = load_config(args.config, args.command)
            stem = None
        cache.configure(enabled=cfg["cache"]["enabled"] and not args.no_cache,
                        directory=cfg["cache"].get("dir"))
        out_dir = args.out or cfg["output"]["dir"]
        zoom = None
        if getattr(args, "zoom", None):
            zoom = (args.zoom[0] * 1e-6, args.zoom[1] * 1e-6)
        manifest = run(cfg, out_dir, args.threads, stem, zoom)
    except validation as exc:
        print(f"rydion: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except numerics as exc:
        print(f"rydion: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    print(f"rydion: wrote {len(manifest['outputs'])} files to {out_dir} "
          f"in {manifest['wall_time_s']:.1f} s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
