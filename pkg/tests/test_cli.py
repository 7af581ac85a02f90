import csv
import io
from contextlib import redirect_stdout

import numpy as np
import pytest

from torsolve.cli import (
    CONVERGENCE_COLUMNS,
    CURVE_COLUMNS,
    SUMMARY_COLUMNS,
    ConfigError,
    load_config,
    main,
)
from torsolve.material import TtoFgm
from torsolve.postprocess import FIELD_COLUMNS

BASE = """
[geometry]
shape = rectangle
b = 5
h = 10
n_elements = 120
m_target = 162

[material]
mode = homogeneous
E = 210600
nu = 0.3
sigma_y = {sigma_y}
alpha = 0

[solver]
jacobian = analytic
max_iter = {max_iter}

[schedule]
theta_ratio = 0.5
ratios = {ratios}

[convergence]
grid = 60:60, 120:98
theta_ratio = 2.0

[output]
directory = {out}
"""


def write_cfg(tmp_path, sigma_y=24, max_iter=50, ratios="0.5, 1.5, 2.5", name="run.ini"):
    path = tmp_path / name
    path.write_text(BASE.format(sigma_y=sigma_y, max_iter=max_iter, ratios=ratios, out=tmp_path / "out"))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_load_config_and_overrides(tmp_path):
    cfg = load_config(write_cfg(tmp_path), {"theta_ratio": 2.0, "out_dir": None})
    assert cfg.theta_ratio == 2.0
    assert cfg.shape.kind == "rectangle" and cfg.n_elements == 120
    assert cfg.ratios == (0.5, 1.5, 2.5)
    assert cfg.grid == ((60, 60), (120, 98))
    assert cfg.options.jacobian == "analytic"


def test_fgm_config_with_infinite_q(tmp_path):
    path = tmp_path / "fgm.ini"
    path.write_text("[geometry]\nshape = rectangle\nb = 5\nh = 10\n[material]\nmode = fgm_tto\n"
                    "E_c = 5000\nnu_c = 0.25\nE_m = 3000\nnu_m = 0.25\nsigma_ym = 5\nE_mh = 500\nk = 3\nq = inf\n")
    cfg = load_config(path)
    assert isinstance(cfg.material, TtoFgm)
    assert cfg.material.R == 1.0 and cfg.material.h == 10.0


@pytest.mark.parametrize("edit", [
    lambda s: s.replace("shape = rectangle", "shape = hexagon"),
    lambda s: s.replace("alpha = 0", "alpha = 2"),
    lambda s: s.replace("E = 210600", "E = abc"),
    lambda s: s.replace("[material]", "[materials]"),
    lambda s: s.replace("b = 5", "b = -5"),
    lambda s: s.replace("jacobian = analytic", "jacobian = secant"),
    lambda s: s.replace("ratios = 0.5, 1.5, 2.5", "ratios = 1.5, 0.5"),
])
def test_config_errors_exit_2(tmp_path, edit, capsys):
    path = write_cfg(tmp_path)
    path.write_text(edit(path.read_text()))
    with pytest.raises(ConfigError):
        load_config(path)
    assert main(["solve", "--config", str(path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.ini")]) == 2


def test_solve_elastic_ratio(tmp_path):
    out = tmp_path / "a"
    assert main(["solve", "--config", str(write_cfg(tmp_path)), "--out", str(out)]) == 0
    header, rows = read_csv(out / "summary.csv")
    assert tuple(header) == SUMMARY_COLUMNS
    row = dict(zip(header, rows[0]))
    assert float(row["theta_ratio"]) == pytest.approx(0.5)
    assert float(row["plastic_fraction"]) == 0.0
    assert row["newton_iters"] == "1"
    header, rows = read_csv(out / "fields.csv")
    assert tuple(header) == FIELD_COLUMNS
    assert len(rows) > 100


def test_solve_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", str(cfg), "--theta-ratio", "2.0", "--out", str(a)]) == 0
    assert main(["solve", "--config", str(cfg), "--theta-ratio", "2.0", "--out", str(b)]) == 0
    for name in ("fields.csv", "summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert b"\r\n" not in (a / "fields.csv").read_bytes()


def test_floats_round_trip(tmp_path):
    out = tmp_path / "a"
    main(["solve", "--config", str(write_cfg(tmp_path)), "--theta-ratio", "1.5", "--out", str(out)])
    _, rows = read_csv(out / "fields.csv")
    for cell in rows[0][:-1]:
        assert repr(float(cell)) == cell


def test_solver_failure_exit_3_leaves_no_files(tmp_path, capsys):
    out = tmp_path / "fail"
    cfg = write_cfg(tmp_path, max_iter=2)
    assert main(["solve", "--config", str(cfg), "--theta-ratio", "3.0", "--out", str(out)]) == 3
    assert "solver error" in capsys.readouterr().err
    assert not (out / "fields.csv").exists() and not (out / "summary.csv").exists()


def test_sweep_outputs(tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--config", str(write_cfg(tmp_path)), "--out", str(out)]) == 0
    header, rows = read_csv(out / "curve.csv")
    assert tuple(header) == CURVE_COLUMNS
    assert [float(r[1]) for r in rows] == pytest.approx([0.5, 1.5, 2.5])
    steps = sorted((out / "fields_at_steps").glob("*.csv"))
    assert len(steps) == 3


def test_partial_sweep_exit_4(tmp_path):
    out = tmp_path / "p"
    cfg = write_cfg(tmp_path, max_iter=2, ratios="0.5, 0.9, 3.0")
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 4
    _, rows = read_csv(out / "curve.csv")
    assert len(rows) == 2


def test_elastic_sweep_is_linear(tmp_path):
    out = tmp_path / "e"
    cfg = write_cfg(tmp_path, sigma_y=1e9, ratios="0.01, 0.1, 0.5, 0.9")
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    _, rows = read_csv(out / "curve.csv")
    stiffness = [float(r[2]) / float(r[0]) for r in rows]
    assert np.allclose(stiffness, stiffness[0], rtol=1e-8)


def test_convergence_table(tmp_path):
    out = tmp_path / "c"
    assert main(["convergence", "--config", str(write_cfg(tmp_path)), "--out", str(out)]) == 0
    header, rows = read_csv(out / "convergence.csv")
    assert tuple(header) == CONVERGENCE_COLUMNS
    assert [(r[0], r[1]) for r in rows] == [("60", "60"), ("120", "98")]
    assert all(1.3 < float(r[3]) < 1.9 for r in rows)
    assert float(rows[1][3]) == pytest.approx(1.55, abs=0.1)


def test_reference_command(tmp_path):
    buf = io.StringIO()
    with redirect_stdout(buf):
        assert main(["reference", "--config", str(write_cfg(tmp_path))]) == 0
    lines = buf.getvalue().splitlines()
    assert lines[0] == "M_el,M_pl"
    m_el, m_pl = (float(v) for v in lines[1].split(","))
    assert m_el == pytest.approx(852.2, rel=5e-4) and m_pl == pytest.approx(1443.4, rel=5e-4)


def test_bad_theta_ratio_flag(tmp_path):
    assert main(["solve", "--config", str(write_cfg(tmp_path)), "--theta-ratio", "-1"]) == 2
