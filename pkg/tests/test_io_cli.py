import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from fatebands import DatasetError, FunctionalSample, TimeGrid, predict_propensity
from fatebands.cli import main
from fatebands.io import read_sample_csv, write_sample_csv

DATA = Path(__file__).parent / "data"


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def numeric(path):
    header, rows = read_table(path)
    return header, np.array([[float(v) for v in r] for r in rows])


# ---------------------------------------------------------------- io

def test_csv_round_trip_exact(tmp_path, rng):
    n, L = 25, 7
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2)) * 1e5, rng.random(n) < 0.5])
    z = np.r_[np.ones(10), np.zeros(15)].astype(int)
    grid = TimeGrid(np.sort(rng.uniform(0, 1, L)))
    s = FunctionalSample(grid=grid, Y=rng.normal(size=(n, L)) / 3, z=z, X=X,
                         covariate_names=("a", "b", "flag"))
    write_sample_csv(s, tmp_path / "d.csv")
    back, ids = read_sample_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.Y, s.Y)
    np.testing.assert_array_equal(back.X, s.X)
    np.testing.assert_array_equal(back.z, s.z)
    np.testing.assert_array_equal(back.grid.points, grid.points)
    assert back.covariate_names == ("a", "b", "flag") and ids[0] == "1"


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.mark.parametrize("lines, fragment", [
    (["id,z,x,t=0,t=1", "a,1,0.5,1,2", "b,0,oops,1,2"], "line 3"),
    (["id,z,x,t=0,t=1", "a,1,0.5,1,2", "b,2,0.5,1,2"], "line 3"),
    (["id,z,x,t=0,t=1", "a,1,0.5,1", "b,0,0.5,1,2"], "line 2"),
    (["id,z,x,t=0,t=1", "a,1,0.5,1,nan", "b,0,0.5,1,2"], "line 2"),
    (["id,z,x,t=1,t=0", "a,1,0.5,1,2", "b,0,0.5,1,2"], "line 1"),
    (["id,z,t=0,x,t=1", "a,1,0.5,1,2", "b,0,0.5,1,2"], "line 1"),
    (["z,id,x,t=0,t=1", "a,1,0.5,1,2"], "line 1"),
    (["id,z,x,y", "a,1,0.5,1"], "line 1"),
])
def test_parse_errors_carry_line_numbers(tmp_path, lines, fragment):
    with pytest.raises(DatasetError, match=fragment):
        read_sample_csv(write_lines(tmp_path / "bad.csv", lines))


def test_single_arm_file_rejected(tmp_path):
    path = write_lines(tmp_path / "one.csv", ["id,z,t=0,t=1", "a,1,1,2", "b,1,3,4"])
    with pytest.raises(DatasetError):
        read_sample_csv(path)


# ---------------------------------------------------------------- fit-effect

@pytest.fixture(scope="module")
def null_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("null")
    assert main(["make-synthetic", "--n", "800", "--seed", "11", "--null-effect",
                 "--out-dir", str(out)]) == 0
    return out / "data.csv"


def test_null_effect_bands_straddle_zero(null_data, tmp_path):
    assert main(["fit-effect", "--data", str(null_data), "--kind", "pointwise",
                 "--kind", "kr-gauss", "--out-dir", str(tmp_path)]) == 0
    header, tab = numeric(tmp_path / "effect.csv")
    col = {h: j for j, h in enumerate(header)}
    assert np.all(np.abs(tab[:, col["estimate"]]) < 4 * tab[:, col["se"]])
    assert np.all(tab[:, col["lower_kr-gauss"]] <= 0) and np.all(tab[:, col["upper_kr-gauss"]] >= 0)
    # simultaneous at least as wide as pointwise everywhere
    assert np.all(tab[:, col["lower_kr-gauss"]] <= tab[:, col["lower_pointwise"]])
    assert np.all(tab[:, col["upper_kr-gauss"]] >= tab[:, col["upper_pointwise"]])
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["n"] == 800 and rep["n1"] + rep["n0"] == 800 and rep["K"] == 9
    kinds = {b["kind"]: b for b in rep["bands"]}
    assert kinds["pointwise"]["df"] == 799
    assert kinds["kr-gauss"]["u"] >= kinds["pointwise"]["u"]
    assert kinds["kr-gauss"]["integral_tau"] > 0
    assert len(rep["input"]["sha256"]) == 64


def test_fatt_and_residual_policy(null_data, tmp_path):
    assert main(["fit-effect", "--data", str(null_data), "--kind", "pointwise",
                 "--estimand", "fatt", "--df-policy", "residual",
                 "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["estimand"] == "fatt" and rep["bands"][0]["df"] == 800 - 20


def test_golden_effect_table(tmp_path):
    """Fixed dataset: repeated runs are byte-identical and match the stored table."""
    data = tmp_path / "golden_input.csv"
    shutil.copy(DATA / "golden_input.csv", data)
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main(["fit-effect", "--data", str(data), "--kind", "pointwise", "--kind",
                     "kr-gauss", "--kind", "kr-t", "--out-dir", str(d)]) == 0
        outs.append(d)
    for name in ("effect.csv", "report.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    h_got, got = numeric(outs[0] / "effect.csv")
    h_want, want = numeric(DATA / "golden_effect.csv")
    assert h_got == h_want
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)


def test_missing_file_and_bad_data_exit_nonzero(tmp_path, capsys):
    assert main(["fit-effect", "--data", str(tmp_path / "nope.csv"),
                 "--out-dir", str(tmp_path)]) != 0
    bad = write_lines(tmp_path / "bad.csv", ["id,z,t=0,t=1", "a,1,1,x", "b,0,1,2"])
    assert main(["fit-effect", "--data", str(bad), "--out-dir", str(tmp_path)]) != 0
    assert "line 2" in capsys.readouterr().err


# ---------------------------------------------------------------- overlap

def test_overlap_null_propensity_centred(tmp_path):
    cfg = tmp_path / "g0.toml"
    cfg.write_text("[dgp]\ngrid_size = 5\ngamma = [0, 0, 0, 0, 0, 0, 0, 0, 0, 0]\n")
    assert main(["make-synthetic", "--config", str(cfg), "--n", "3000", "--seed", "5",
                 "--out-dir", str(tmp_path)]) == 0
    assert main(["overlap", "--data", str(tmp_path / "data.csv"),
                 "--out-dir", str(tmp_path)]) == 0
    header, hist = numeric(tmp_path / "overlap_histogram.csv")
    mids = (hist[:, 0] + hist[:, 1]) / 2
    for col in (2, 3):
        assert abs(np.sum(mids * hist[:, col]) / hist[:, col].sum() - 0.5) < 0.05
    rep = json.loads((tmp_path / "overlap.json").read_text())
    assert rep["converged"] and not rep["separation_detected"]


def test_overlap_extremes_match_scan(null_data, tmp_path):
    assert main(["overlap", "--data", str(null_data), "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "overlap.json").read_text())
    _, coef = read_table(tmp_path / "propensity_coefficients.csv")
    gamma = np.array([float(r[1]) for r in coef])
    assert all(float(r[2]) > 0 for r in coef)
    sample, _ = read_sample_csv(null_data)
    pi = predict_propensity(gamma, sample.X)
    t, c = pi[sample.z == 1], pi[sample.z == 0]
    assert rep["min_pi_treated"] == pytest.approx(t.min(), rel=1e-12)
    assert rep["max_pi_treated"] == pytest.approx(t.max(), rel=1e-12)
    assert rep["min_pi_control"] == pytest.approx(c.min(), rel=1e-12)
    assert rep["max_pi_control"] == pytest.approx(c.max(), rel=1e-12)


def test_overlap_separation_reported(tmp_path):
    lines = ["id,z,x,t=0,t=1"]
    for i, x in enumerate(np.r_[np.linspace(-3, -1, 20), np.linspace(1, 3, 20)]):
        lines.append(f"{i},{int(x > 0)},{float(x)!r},{i},{2 * i}")
    data = write_lines(tmp_path / "sep.csv", lines)
    with pytest.warns(RuntimeWarning, match="separation"):
        assert main(["overlap", "--data", str(data), "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "overlap.json").read_text())
    assert rep["separation_detected"] and not rep["converged"]
    assert any("separation" in w for w in rep["warnings"])


# ---------------------------------------------------------------- make-synthetic

def test_make_synthetic_shape(tmp_path):
    assert main(["make-synthetic", "--n", "500", "--seed", "1", "--out-dir", str(tmp_path)]) == 0
    header, rows = read_table(tmp_path / "data.csv")
    assert len(rows) == 500
    assert sum(h.startswith("t=") for h in header) == 43
    assert header[:2] == ["id", "z"] and len(header) == 2 + 9 + 43
    th, truth = read_table(tmp_path / "truth.csv")
    assert th == ["t", "fate", "fatt"] and len(truth) == 43


def test_make_synthetic_noise_free_matches_beta(tmp_path):
    assert main(["make-synthetic", "--n", "200", "--seed", "2", "--sigma-scale", "0",
                 "--out-dir", str(tmp_path)]) == 0
    sample, _ = read_sample_csv(tmp_path / "data.csv")
    _, rows = read_table(tmp_path / "beta.csv")
    beta = {arm: np.array([[float(v) for v in r[2:]] for r in rows if r[0] == str(arm)])
            for arm in (0, 1)}
    for arm in (0, 1):
        X, Y = sample.arm(arm)
        np.testing.assert_array_equal(Y, X @ beta[arm])


def test_make_synthetic_requires_seed(tmp_path):
    assert main(["make-synthetic", "--out-dir", str(tmp_path)]) != 0


def test_round_trip_recovers_truth(tmp_path):
    hits = 0
    for seed in range(100):
        d = tmp_path / str(seed)
        assert main(["make-synthetic", "--n", "500", "--seed", str(seed),
                     "--out-dir", str(d)]) == 0
        assert main(["fit-effect", "--data", str(d / "data.csv"), "--out-dir", str(d)]) == 0
        header, tab = numeric(d / "effect.csv")
        _, truth = numeric(d / "truth.csv")
        lo, hi = tab[:, header.index("lower_kr-gauss")], tab[:, header.index("upper_kr-gauss")]
        hits += bool(np.all((lo <= truth[:, 1]) & (truth[:, 1] <= hi)))
    assert hits >= 90


# ---------------------------------------------------------------- simulate

SMALL_SIM = """
[dgp]
grid_size = 15

[simulation]
replicates = 4
sizes = [250, 500, 1000]
"""


def test_simulate_requires_seed(tmp_path):
    assert main(["simulate", "--out-dir", str(tmp_path)]) != 0


def test_simulate_table_shape_and_repeatability(tmp_path):
    cfg = tmp_path / "sim.toml"
    cfg.write_text(SMALL_SIM)
    runs = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        assert main(["simulate", "--config", str(cfg), "--seed", "99",
                     "--out-dir", str(d)]) == 0
        runs.append(d)
    for name in ("coverage.csv", "coverage_table.csv", "sample_bands.csv",
                 "coverage_report.json"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()
    header, rows = read_table(runs[0] / "coverage_table.csv")
    assert header == ["scenario", "type", "250", "500", "1000"]
    assert [(r[0], r[1]) for r in rows] == [
        ("fixed-gauss", "I"), ("fixed-gauss", "II"), ("fixed-gauss", "III"),
        ("fixed-gauss", "IV"), ("random-gauss", "II"), ("random-gauss", "IV"),
        ("fixed-t10", "II"), ("fixed-t10", "IV")]
    h, cov = read_table(runs[0] / "coverage.csv")
    assert len(cov) == 8 * 3
    assert all(r[h.index("replicates_used")] == "4" for r in cov)
    _, bands = read_table(runs[0] / "sample_bands.csv")
    assert len(bands) == 3 * 3 * 15


def test_simulate_single_replicate(tmp_path):
    cfg = tmp_path / "one.toml"
    cfg.write_text('[dgp]\ngrid_size = 9\n[simulation]\nreplicates = 1\nsizes = [250]\n'
                   '[[scenario]]\nname = "one"\ndesign = "fixed"\n')
    assert main(["simulate", "--config", str(cfg), "--seed", "3", "--out-dir", str(tmp_path)]) == 0
    h, rows = read_table(tmp_path / "coverage.csv")
    assert len(rows) == 4
    assert {float(r[h.index("coverage")]) for r in rows} <= {0.0, 100.0}


def test_simulate_bad_config(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[dgp]\nwobble = 3\n")
    assert main(["simulate", "--config", str(cfg), "--seed", "1",
                 "--out-dir", str(tmp_path)]) != 0
    cfg.write_text("[dgp\n")
    assert main(["simulate", "--config", str(cfg), "--seed", "1",
                 "--out-dir", str(tmp_path)]) != 0
