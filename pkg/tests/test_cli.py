import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from bandedge import cli
from bandedge.errors import ConfigError

FREE_BANDS = """
job = "bands"

[discretization]
truncation = 4
resolution = 16
bands = 3

[output]
path = "{out}"
format = "csv"
figures = {figures}
"""


def write_config(tmp_path, text, name="job.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_config_defaults(tmp_path):
    path = write_config(tmp_path, 'job = "selfcheck"\n')
    cfg = cli.load_config(path)
    assert cfg.job == "selfcheck"
    assert cfg.truncation == 8
    assert cfg.out_format == "csv"


def test_unknown_key_rejected(tmp_path):
    path = write_config(tmp_path, 'job = "bands"\n[lattice]\nb3 = [1, 0]\n')
    with pytest.raises(ConfigError):
        cli.load_config(path)


def test_unknown_section_rejected(tmp_path):
    path = write_config(tmp_path, 'job = "bands"\n[mystery]\nx = 1\n')
    with pytest.raises(ConfigError):
        cli.load_config(path)


def test_unknown_job_rejected(tmp_path):
    path = write_config(tmp_path, 'job = "frobnicate"\n')
    with pytest.raises(ConfigError):
        cli.load_config(path)


def test_missing_config_exit_code(tmp_path, capsys):
    code = cli.main(["--config", str(tmp_path / "absent.toml")])
    assert code == 2


def test_invalid_coefficients_exit_code(tmp_path):
    # Constant A violates the zero-mean normalization: config error.
    text = """
job = "bands"

[coefficients]
A1 = [[0, 0, 0.5, 0.0]]

[output]
path = "%s"
""" % (tmp_path / "out")
    path = write_config(tmp_path, text)
    assert cli.main(["--config", str(path)]) == 2


def test_bands_job_free_set(tmp_path):
    out = tmp_path / "out"
    path = write_config(
        tmp_path, FREE_BANDS.format(out=out, figures="true")
    )
    assert cli.main(["--config", str(path)]) == 0
    lines = (out / "bands.csv").read_text().splitlines()
    data = [ln for ln in lines if not ln.startswith("#")]
    header, rows = data[0], data[1:]
    assert header.split(",")[:4] == ["t1", "t2", "k1", "k2"]
    assert len(header.split(",")) == 4 + 3
    assert len(rows) == 256
    first = rows[0].split(",")
    assert float(first[4]) == pytest.approx(0.0, abs=1e-12)
    assert (out / "bands.png").exists()


def test_repeat_runs_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    p1 = write_config(tmp_path, FREE_BANDS.format(out=out1, figures="true"), "a.toml")
    p2 = write_config(tmp_path, FREE_BANDS.format(out=out2, figures="true"), "b.toml")
    assert cli.main(["--config", str(p1)]) == 0
    assert cli.main(["--config", str(p2), "--workers", "2"]) == 0
    for name in ("bands.csv", "bands.png"):
        assert filecmp.cmp(out1 / name, out2 / name, shallow=False), name


def test_json_round_trip_bit_for_bit(tmp_path):
    out = tmp_path / "out"
    text = """
job = "extrema"

[discretization]
truncation = 3
resolution = 12
bands = 1

[coefficients]
V = [[1, 0, 0.5, 0.0], [-1, 0, 0.5, 0.0]]

[extrema]
band = 1
kind = "min"
eps = 0.1

[output]
path = "%s"
format = "json"
figures = false
""" % out
    path = write_config(tmp_path, text)
    assert cli.main(["--config", str(path)]) == 0
    raw = (out / "extrema.json").read_text(encoding="utf-8")
    loaded = json.loads(raw)
    redumped = json.dumps(loaded, indent=1, sort_keys=True) + "\n"
    assert redumped == raw
    assert loaded["band"] == 1
    assert loaded["classification"] in ("isolated", "extended", "unresolved")


def test_discrete_job_emits_edges_and_torus(tmp_path):
    out = tmp_path / "out"
    text = """
job = "discrete"

[discrete]
v0 = 0.0
v1 = 2.0
resolution = 64
torus_sizes = [2, 4]

[output]
path = "%s"
figures = false
""" % out
    path = write_config(tmp_path, text)
    assert cli.main(["--config", str(path)]) == 0
    edges_rows = [
        ln for ln in (out / "band_edges.csv").read_text().splitlines()
        if not ln.startswith("#")
    ]
    vals = [float(x) for x in edges_rows[1].split(",")]
    assert vals == pytest.approx(
        [1 - np.sqrt(5), 0.0, 2.0, 1 + np.sqrt(5)], abs=1e-12
    )
    assert (out / "torus.csv").exists()
    assert (out / "levelset_0.csv").exists()
    assert (out / "levelset_2.csv").exists()


def test_discriminant_job_csv_columns(tmp_path):
    out = tmp_path / "out"
    text = """
job = "discriminant"

[discretization]
truncation = 3

[discriminant]
lambda_re = 0.0
k2_start = -0.4
k2_stop = 0.4
k2_count = 5

[output]
path = "%s"
figures = false
""" % out
    path = write_config(tmp_path, text)
    assert cli.main(["--config", str(path)]) == 0
    rows = [
        ln for ln in (out / "discriminant.csv").read_text().splitlines()
        if not ln.startswith("#")
    ]
    assert rows[0] == "k2,re,im,abs,flag"
    assert len(rows) == 1 + 5
    flags = [int(r.split(",")[4]) for r in rows[1:]]
    assert flags == [0, 0, 1, 0, 0]  # flags exactly at k2 = 0


def test_selfcheck_job(tmp_path, capsys):
    out = tmp_path / "out"
    path = write_config(
        tmp_path, f'job = "selfcheck"\n[output]\npath = "{out}"\n'
    )
    assert cli.main(["--config", str(path)]) == 0
    report = json.loads((out / "selfcheck.json").read_text())
    assert report["passed"] is True
    assert (out / "selfcheck.txt").exists()
    captured = capsys.readouterr()
    assert "PASS" in captured.out


def test_t1scan_job_csv(tmp_path):
    out = tmp_path / "out"
    text = """
job = "t1scan"

[discretization]
truncation = 2

[t1scan]
lambda_re = 0.0
k2 = [0.0, 0.3]

[output]
path = "%s"
""" % out
    path = write_config(tmp_path, text)
    assert cli.main(["--config", str(path)]) == 0
    rows = [
        ln for ln in (out / "t1scan.csv").read_text().splitlines()
        if not ln.startswith("#")
    ]
    assert rows[0] == "k2,re_k1,im_k1,cluster,multiplicity"
    dim = (2 * 2 + 1) ** 2
    assert len(rows) == 1 + 2 * (2 * dim)
    assert (out / "t1scan.png").exists()
