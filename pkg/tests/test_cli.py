"""Command-line interface tests: configs, presets, artifacts, determinism."""

import json
import math

import numpy as np
import pytest

import kdslab.cli as cli
from kdslab.config import ConfigError, PRESETS, parse_config, preset_config

from conftest import bisect_root


TINY_EVOLVE = """\
schema_version = 1
run = evolve
name = tiny
M0 = 1.0
Lambda = 0.06
a = 0.0
n_r = 48
n_theta = 16
t_end = 4.0
snapshot_every = 1.0
source.m = 0
source.l = 0
source.t_on = 0.0
source.t_off = 2.0
source.r_center = 3.9
source.r_width = 0.6
write_fields = 1
"""


def test_horizons_artifacts(tmp_path):
    cfg_path = tmp_path / "h.cfg"
    cfg_path.write_text("""\
schema_version = 1
run = horizons
name = h
M0 = 1.0
Lambda = 0.06
a = 0.0
""")
    out = tmp_path / "out"
    code = cli.main(["horizons", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0
    rec = json.loads((out / "geometry.jsonl").read_text().strip())
    cubic = lambda r: r ** 3 - 50.0 * r + 100.0
    assert abs(rec["r_minus"] - bisect_root(cubic, 2.0, 3.0)) < 1e-9
    assert abs(rec["r_plus"] - bisect_root(cubic, 5.0, 6.0)) < 1e-9
    assert rec["kappa_minus"] > 0 and rec["kappa_plus"] > 0
    assert rec["alpha"] == 0.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["run"] == "horizons"
    assert len(manifest["config_sha256"]) == 64


def test_malformed_config_names_key(tmp_path, capsys):
    cfg_path = tmp_path / "bad.cfg"
    cfg_path.write_text("schema_version = 1\nrun = horizons\nbogus_key = 3\n")
    code = cli.main(["horizons", "--config", str(cfg_path),
                     "--out", str(tmp_path / "o")])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "config"
    assert "bogus_key" in err["detail"]


def test_missing_required_key():
    with pytest.raises(ConfigError, match="run"):
        parse_config("schema_version = 1\n")


def test_bad_value_type():
    with pytest.raises(ConfigError, match="n_r"):
        parse_config("schema_version = 1\nrun = evolve\nn_r = fast\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("schema_version = 1\nrun = evolve\nM0 = 1\nM0 = 2\n")


def test_subcommand_config_mismatch(tmp_path, capsys):
    cfg_path = tmp_path / "h.cfg"
    cfg_path.write_text("schema_version = 1\nrun = horizons\n")
    code = cli.main(["evolve", "--config", str(cfg_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "config"


def test_presets_exist_and_validate():
    names = cli.list_scenarios()
    assert len(names) >= 5
    # snapshot of the shipped preset names
    assert names == ["dirichlet-horizon", "gap-scan-default",
                     "minkowski-check", "sds-baseline", "slow-kerr"]
    for name in names:
        cfg = preset_config(name)
        assert cfg.run in ("crosscheck", "convergence", "evolve-dirichlet",
                           "gap-scan")


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        preset_config("not-a-preset")


def test_list_scenarios_output(capsys):
    code = cli.main(["list-scenarios"])
    assert code == 0
    text = capsys.readouterr().out
    for name in PRESETS:
        assert name in text


def test_evolve_artifacts_and_fields_roundtrip(tmp_path):
    cfg_path = tmp_path / "e.cfg"
    cfg_path.write_text(TINY_EVOLVE)
    out = tmp_path / "out"
    code = cli.main(["evolve", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0
    assert (out / "series.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert "pi0" in report and report["final_sup"] > 0
    series = cli.read_series_csv(out / "series.csv")
    assert set(series) >= {"t", "l2", "l2_core", "sup", "energy_t",
                           "probe_re", "probe_im"}
    r, theta, times, snaps = cli.read_fields_binary(out / "fields.bin")
    assert r.size == 48 and theta.size == 16
    assert len(snaps) == times.size
    # the final stored snapshot matches the reported final sup norm
    assert math.isclose(np.abs(snaps[-1][0]).max(), report["final_sup"],
                        rel_tol=1e-12)


def test_determinism_byte_identical_csv(tmp_path):
    cfg_path = tmp_path / "e.cfg"
    cfg_path.write_text(TINY_EVOLVE.replace("write_fields = 1",
                                            "write_fields = 0"))
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert cli.main(["evolve", "--config", str(cfg_path),
                         "--out", str(out)]) == 0
        outs.append((out / "series.csv").read_bytes())
    assert outs[0] == outs[1]


def test_decay_fit_subcommand(tmp_path):
    t = np.linspace(0.0, 40.0, 2001)
    y = np.exp(-0.3 * t) * np.cos(2.0 * t)
    series_path = tmp_path / "series.csv"
    cli._write_csv(series_path, {"t": t, "probe_re": y})
    cfg_path = tmp_path / "f.cfg"
    cfg_path.write_text(f"""\
schema_version = 1
run = decay-fit
name = f
fit.input = {series_path}
fit.column = probe_re
""")
    out = tmp_path / "out"
    assert cli.main(["decay-fit", "--config", str(cfg_path),
                     "--out", str(out)]) == 0
    rec = json.loads((out / "fit.jsonl").read_text().strip())
    assert abs(rec["nu_fit"] - 0.3) < 0.01
    assert rec["good"]


def test_decay_fit_requires_input():
    with pytest.raises(ConfigError, match="fit.input"):
        parse_config("schema_version = 1\nrun = decay-fit\n")


def test_qnm_subcommand(tmp_path):
    cfg_path = tmp_path / "q.cfg"
    cfg_path.write_text("""\
schema_version = 1
run = qnm
name = q
M0 = 1.0
Lambda = 0.06
a = 0.0
qnm.l = 1
qnm.m = 0
qnm.guess_re = 0.185
qnm.guess_im = -0.07
""")
    out = tmp_path / "out"
    assert cli.main(["qnm", "--config", str(cfg_path), "--out", str(out)]) == 0
    table = cli.read_series_csv(out / "modes.csv")
    assert abs(table["re_omega"][0] - 0.185369) < 1e-4
    assert abs(table["im_omega"][0] + 0.070060) < 1e-4
    assert table["residual"][0] < 1e-8


def test_runtime_error_single_line_record(tmp_path, capsys):
    cfg_path = tmp_path / "q.cfg"
    # a guess in an empty region: the polisher reports NoRoot
    cfg_path.write_text("""\
schema_version = 1
run = qnm
name = q
qnm.guess_re = 5.0
qnm.guess_im = -0.01
""")
    code = cli.main(["qnm", "--config", str(cfg_path),
                     "--out", str(tmp_path / "o")])
    assert code == 1
    lines = [ln for ln in capsys.readouterr().err.splitlines() if ln.strip()]
    err = json.loads(lines[-1])
    assert err["error"] == "NoRoot"
