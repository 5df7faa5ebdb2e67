import json
import math
import shutil
import subprocess

import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from rydion.cli import EXIT_NUMERICS, EXIT_OK, EXIT_VALIDATION, FIGURES, main
from rydion.config import KINDS, ConfigError, dump_config, load_config, parse_config

TWO_PI = 2 * math.pi


def _write(tmp_path, body, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(body if isinstance(body, str) else yaml.safe_dump(body), encoding="utf-8")
    return str(path)


def _same(a, b):
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, float):
        return a == pytest.approx(b, rel=1e-15, abs=0)
    return a == b


class TestValidation:
    def test_missing_unit_suffix_names_key(self):
        with pytest.raises(ConfigError) as err:
            parse_config({"experiment": "trap-info", "trap": {"omega_i": 250}})
        assert err.value.path == "trap.omega_i"
        assert "unit suffix" in str(err.value)

    def test_wrong_dimension_suffix(self):
        with pytest.raises(ConfigError, match="trap.omega_i_um"):
            parse_config({"experiment": "trap-info", "trap": {"omega_i_um": 250}})

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as err:
            parse_config({"experiment": "gate", "gate": {"fidelity_target": 0.99}})
        assert err.value.path == "gate.fidelity_target"

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config({"experiment": "gate", "plotting": {}})

    def test_kind_mismatch(self):
        with pytest.raises(ConfigError):
            parse_config({"experiment": "gate"}, "dressed")

    def test_units_converted_once(self):
        cfg = parse_config({"experiment": "trap-info", "trap": {"omega_i_kHz": 200}})
        assert cfg["trap"]["omega_i"] == pytest.approx(TWO_PI * 200e3, rel=1e-15)
        cfg = parse_config({"experiment": "micromotion", "micromotion": {"d_nm": 800}})
        assert cfg["micromotion"]["d"] == pytest.approx(0.8e-6, rel=1e-15)

    def test_frequency_list_needs_suffix(self):
        with pytest.raises(ConfigError):
            parse_config({"experiment": "dressed", "dressed": {"Delta0_list": [1, 2]}})

    def test_bool_is_not_a_number(self):
        with pytest.raises(ConfigError):
            parse_config({"experiment": "trap-info", "trap": {"q": True}})

    def test_grid_power_of_two(self):
        with pytest.raises(ConfigError):
            parse_config({"experiment": "micromotion", "grid": {"points": 100}})


class TestRoundTrip:
    @pytest.mark.parametrize("kind", KINDS)
    def test_defaults(self, kind):
        cfg = parse_config({"experiment": kind})
        again = parse_config(dump_config(cfg))
        assert again.kind == kind
        assert _same(cfg.values, again.values)

    @given(f=st.floats(1.0, 1e7), d=st.floats(1e-8, 1e-5), n=st.integers(2, 20))
    @settings(max_examples=50, deadline=None)
    def test_through_yaml_text(self, f, d, n):
        cfg = parse_config({"experiment": "gate",
                            "gate": {"omega_i_Hz": f, "d_m": d, "n_ion": n}})
        text = yaml.safe_dump(dump_config(cfg))
        again = parse_config(yaml.safe_load(text))
        assert _same(cfg.values, again.values)

    def test_hash_depends_on_values_only(self):
        a = parse_config({"experiment": "trap-info", "trap": {"omega_i_kHz": 250}})
        b = parse_config({"experiment": "trap-info", "trap": {"omega_i_Hz": 250e3}})
        c = parse_config({"experiment": "trap-info", "trap": {"omega_i_kHz": 251}})
        assert a.hash == b.hash != c.hash


class TestCommands:
    def test_trap_info(self, tmp_path):
        cfg = _write(tmp_path, {"experiment": "trap-info", "trap": {"omega_i_kHz": 250}})
        assert main(["trap-info", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
        report = json.loads((tmp_path / "o" / "trap_info.json").read_text())
        assert report["ell_z_um"] == pytest.approx(6.9, abs=0.05)

    def test_validation_exit_code(self, tmp_path, capsys):
        cfg = _write(tmp_path, "experiment: trap-info\ntrap:\n  omega_i: 250\n")
        assert main(["trap-info", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_VALIDATION
        assert "trap.omega_i" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["gate", "--config", str(tmp_path / "nope.yaml")]) == EXIT_VALIDATION

    def test_bad_threads(self, tmp_path):
        cfg = _write(tmp_path, "experiment: trap-info\n")
        assert main(["trap-info", "--config", cfg, "--out", str(tmp_path / "o"),
                     "--threads", "0"]) == EXIT_VALIDATION

    def test_unknown_figure_lists_ids(self, tmp_path, capsys):
        assert main(["figure", "fig9", "--out", str(tmp_path)]) == EXIT_VALIDATION
        err = capsys.readouterr().err
        for fig in FIGURES:
            assert fig in err

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        # three Fock states cannot hold the displaced ion
        cfg = _write(tmp_path, {"experiment": "gate",
                                "gate": {"n_ion": 3, "n_atom": 3, "inputs": ["++"], "samples": 10}})
        out = tmp_path / "o"
        assert main(["gate", "--config", cfg, "--out", str(out)]) == EXIT_NUMERICS
        assert "CutoffError" in capsys.readouterr().err
        assert not any(out.iterdir())

    def test_console_script(self, tmp_path):
        exe = shutil.which("rydion")
        if exe is None:
            pytest.skip("console script not installed")
        cfg = _write(tmp_path, "experiment: trap-info\ntrap: {q: 0.28, bogus: 1}\n")
        proc = subprocess.run([exe, "trap-info", "--config", cfg, "--out", str(tmp_path)],
                              capture_output=True, text=True)
        assert proc.returncode == EXIT_VALIDATION
        assert "trap.bogus" in proc.stderr


def _run_twice(tmp_path, body, kind):
    cfg = _write(tmp_path, body)
    manifests = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main([kind, "--config", cfg, "--out", str(out)]) == EXIT_OK
        manifests.append((out, json.loads((out / "manifest.json").read_text())))
    return manifests


class TestManifest:
    @pytest.mark.parametrize("kind,body", [
        ("trap-info", {"experiment": "trap-info"}),
        ("dressed", {"experiment": "dressed", "dressed": {"points": 50}}),
    ])
    def test_deterministic(self, tmp_path, kind, body):
        (_, m1), (_, m2) = _run_twice(tmp_path, body, kind)
        assert m1["config_hash"] == m2["config_hash"]
        assert m1["outputs"] == m2["outputs"]

    def test_no_orphans_and_checksums(self, tmp_path):
        import hashlib
        (out, m), _ = _run_twice(tmp_path, {"experiment": "dressed", "dressed": {"points": 50}},
                                 "dressed")
        files = {p.name for p in out.iterdir()}
        assert files == set(m["outputs"]) | {"manifest.json"}
        for name, digest in m["outputs"].items():
            assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest

    def test_csv_format(self, tmp_path):
        (out, _), _ = _run_twice(tmp_path, {"experiment": "dressed", "dressed": {"points": 50}},
                                 "dressed")
        text = (out / "dressed.csv").read_text(encoding="utf-8")
        lines = text.splitlines()
        assert lines[0].startswith("R_m,")
        data = np.loadtxt(lines[1:], delimiter=",")
        assert data.shape == (50, len(lines[0].split(",")))
        assert np.all(np.isfinite(data))

    def test_config_reload_keeps_hash(self, tmp_path):
        cfg = load_config(_write(tmp_path, {"experiment": "dressed", "dressing": {"Omega_MHz": 12}}))
        again = parse_config(dump_config(cfg))
        assert again.hash == cfg.hash
