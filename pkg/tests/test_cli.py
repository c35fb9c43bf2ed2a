"""Command-line workflows: ground, linres, oracle, propcheck."""

from pathlib import Path

import numpy as np
import pytest

from mclr import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _run(capsys, argv):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_ground_writes_checkpoint(tmp_path, capsys):
    ck = tmp_path / "state.ckpt"
    code, out, _ = _run(capsys, [
        "ground", "--config", str(CONFIGS / "harmonic_n2_m2.cfg"),
        "--checkpoint", str(ck)])
    assert code == 0
    assert ck.exists()
    line = [l for l in out.splitlines() if l.startswith("energy =")][0]
    energy = float(line.split("=")[1])
    assert energy == pytest.approx(1.0393239, abs=1e-5)
    assert "# config sha256" in out


def test_ground_missing_key_names_it(tmp_path, capsys):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("[system]\nstatistics = boson\nparticles = 2\n"
                   "[grid]\npoints = 16\nx_min = -4\nx_max = 4\n")
    code, _, err = _run(capsys, ["ground", "--config", str(cfg),
                                 "--checkpoint", str(tmp_path / "x.ckpt")])
    assert code == 1
    assert "orbitals" in err


def test_ground_nonconvergence_exit_code(tmp_path, capsys):
    cfg = tmp_path / "hard.cfg"
    cfg.write_text((CONFIGS / "harmonic_n2_m2.cfg").read_text()
                   .replace("max_iter = 500", "max_iter = 1")
                   .replace("tol_orb = 1e-8", "tol_orb = 1e-15"))
    code, _, err = _run(capsys, ["ground", "--config", str(cfg),
                                 "--checkpoint", str(tmp_path / "x.ckpt")])
    assert code == 2
    assert "residual" in err


def test_ground_resume_reproduces_energy(tmp_path, capsys):
    ck = tmp_path / "state.ckpt"
    cfg = str(CONFIGS / "harmonic_n2_m2.cfg")
    _, out1, _ = _run(capsys, ["ground", "--config", cfg, "--checkpoint", str(ck)])
    code, out2, _ = _run(capsys, ["ground", "--config", cfg,
                                  "--checkpoint", str(ck), "--resume"])
    assert code == 0
    e1 = float([l for l in out1.splitlines() if l.startswith("energy")][0].split("=")[1])
    e2 = float([l for l in out2.splitlines() if l.startswith("energy")][0].split("=")[1])
    assert e1 == e2


def test_linres_outputs(tmp_path, capsys):
    ck = tmp_path / "state.ckpt"
    cfg = str(CONFIGS / "free_ladder_m2.cfg")
    _run(capsys, ["ground", "--config", cfg, "--checkpoint", str(ck)])
    code, out, _ = _run(capsys, [
        "linres", "--checkpoint", str(ck), "--config", cfg,
        "--out-dir", str(tmp_path), "--dump-matrix"])
    assert code == 0
    spectrum = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert any(l.startswith("index,") for l in spectrum)
    low = [l for l in out.splitlines() if l.startswith("lowest_excitations")][0]
    first = float(low.split("=")[1].split()[0])
    assert first == pytest.approx(1.0, abs=1e-4)
    assert (tmp_path / "weights.csv").exists()
    assert (tmp_path / "response_matrix.ckpt").exists()
    zero_line = [l for l in out.splitlines() if l.startswith("zero_modes")][0]
    assert "expected 10" in zero_line


def test_linres_interacting_zero_mode_count(tmp_path, capsys):
    ck = tmp_path / "state.ckpt"
    cfg = str(CONFIGS / "harmonic_n2_m2.cfg")
    _run(capsys, ["ground", "--config", cfg, "--checkpoint", str(ck)])
    code, out, _ = _run(capsys, ["linres", "--checkpoint", str(ck),
                                 "--config", cfg, "--out-dir", str(tmp_path)])
    assert code == 0
    zero_line = [l for l in out.splitlines() if l.startswith("zero_modes")][0]
    assert zero_line.split("=")[1].split()[0].strip() == "10"
    assert "zero_mode_warning" not in out


def test_oracle_bdg_table(capsys):
    code, out, _ = _run(capsys, ["oracle", "--which", "bdg",
                                 "--config", str(CONFIGS / "bdg_m1.cfg")])
    assert code == 0
    max_line = [l for l in out.splitlines() if l.startswith("max_diff")][0]
    assert float(max_line.split("=")[1]) < 1e-7


def test_oracle_se_self_test(tmp_path, capsys):
    cfg = tmp_path / "se.cfg"
    cfg.write_text((CONFIGS / "harmonic_n2_m2.cfg").read_text()
                   .replace("points = 64", "points = 20"))
    code, out, _ = _run(capsys, ["oracle", "--which", "se", "--config", str(cfg)])
    assert code == 0
    assert "PASS" in out


def test_oracle_coupled_oscillators(capsys):
    code, out, _ = _run(capsys, ["oracle", "--which", "osc",
                                 "--config", str(CONFIGS / "coupled_pair_m44.cfg")])
    assert code == 0
    rows = [l for l in out.splitlines() if l and l[0].isdigit() is False
            and "abs_diff" not in l]
    diffs = [float(l.split()[-1]) for l in out.splitlines()
             if l.strip() and l.split()[0].isdigit()]
    assert max(diffs) < 1e-3


def test_linres_tol_zero_flag(tmp_path, capsys):
    # an absurdly large threshold swallows the true excitations into the
    # zero-mode bucket, proving the flag reaches the classifier
    ck = tmp_path / "state.ckpt"
    cfg = str(CONFIGS / "harmonic_n2_m2.cfg")
    _run(capsys, ["ground", "--config", cfg, "--checkpoint", str(ck)])
    code, out, _ = _run(capsys, [
        "linres", "--checkpoint", str(ck), "--config", cfg,
        "--out-dir", str(tmp_path), "--tol-zero", "1.5"])
    assert code == 0
    zero_line = [l for l in out.splitlines() if l.startswith("zero_modes")][0]
    assert int(zero_line.split("=")[1].split()[0]) > 10
    assert "zero_mode_warning" in out


def test_statistics_override_flag(tmp_path, capsys):
    # same config solved as fermions via the override: Pauli energy 2.0
    cfg = tmp_path / "free.cfg"
    cfg.write_text((CONFIGS / "free_ladder_m2.cfg").read_text())
    code, out, _ = _run(capsys, [
        "ground", "--config", str(cfg), "--statistics", "fermion",
        "--checkpoint", str(tmp_path / "f.ckpt")])
    assert code == 0
    energy = float([l for l in out.splitlines()
                    if l.startswith("energy")][0].split("=")[1])
    assert energy == pytest.approx(2.0, abs=1e-6)


def test_malformed_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("[system\nstatistics = boson\n")
    code, _, err = _run(capsys, ["ground", "--config", str(cfg),
                                 "--checkpoint", str(tmp_path / "x.ckpt")])
    assert code == 1
    assert "line" in err.lower()


def test_linres_writes_reconstruction(tmp_path, capsys):
    ck = tmp_path / "state.ckpt"
    cfg = str(CONFIGS / "harmonic_n2_m2.cfg")
    _run(capsys, ["ground", "--config", cfg, "--checkpoint", str(ck)])
    code, out, _ = _run(capsys, ["linres", "--checkpoint", str(ck),
                                 "--config", cfg, "--out-dir", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "reconstruction.ckpt").exists()
    from mclr import checkpoint as ckpt_mod
    header, arrays = ckpt_mod.load_arrays(tmp_path / "reconstruction.ckpt")
    assert header["kind"] == "reconstruction"
    assert arrays["dphi_minus"].shape == (2, 64)


def test_propcheck_diagnostics(tmp_path, capsys):
    ck = tmp_path / "state.ckpt"
    cfg = str(CONFIGS / "harmonic_n2_m2.cfg")
    _run(capsys, ["ground", "--config", cfg, "--checkpoint", str(ck)])
    code, out, _ = _run(capsys, [
        "propcheck", "--checkpoint", str(ck), "--perturb", "0.02",
        "--dt", "2e-4", "--steps", "50"])
    assert code == 0
    vals = dict(l.split(" = ") for l in out.splitlines() if " = " in l)
    assert float(vals["orb_diff_cond"]) < 1e-8
    assert float(vals["coeff_diff_cond"]) < 1e-8
