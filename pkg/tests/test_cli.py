import numpy as np
import pytest

from lhsd.cli import main
from lhsd.io import read_csv, read_dataset

MIXTURE_INI = """
[experiment]
seed = 1
[dataset:mix]
generator = mixture
ambient_d = 12
component_dims = 2, 5
num_samples = 260
num_reference = 200
[time]
t = 0.05
[methods]
list = lhsd, flipd
"""


@pytest.fixture
def mixture_ini(tmp_path):
    path = tmp_path / "mix.ini"
    path.write_text(MIXTURE_INI)
    return path


def test_generate_data(tmp_path, mixture_ini):
    out = tmp_path / "mix.csv"
    assert main(["generate-data", "--spec", str(mixture_ini), "--out", str(out)]) == 0
    ds = read_dataset(out)
    assert ds.points.shape == (260, 12)
    assert set(np.unique(ds.gt_lid)) == {2.0, 5.0}


def test_generate_data_needs_single_dataset(tmp_path):
    ini = tmp_path / "two.ini"
    ini.write_text("[experiment]\nseed=0\n[dataset:a]\ngenerator=moon\n"
                   "[dataset:b]\ngenerator=funnel\n")
    assert main(["generate-data", "--spec", str(ini), "--out", str(tmp_path / "x")]) == 2
    assert main(["generate-data", "--spec", str(ini), "--out", str(tmp_path / "x"),
                 "--dataset", "b"]) == 0


def test_estimate_from_data_file(tmp_path, mixture_ini):
    data = tmp_path / "mix.csv"
    main(["generate-data", "--spec", str(mixture_ini), "--out", str(data)])
    out = tmp_path / "est.csv"
    rc = main(["estimate", "--data", str(data), "--num-reference", "200", "--t", "0.05",
               "--method", "lhsd", "--method", "flipd-hutch", "--out", str(out),
               "--jobs", "1"])
    assert rc == 0
    assert out.read_text().startswith("# config_sha256=")
    rows = read_csv(out)
    assert len(rows) == 120
    lh = [r for r in rows if r["method"] == "lhsd"]
    assert all(int(r["hvp_calls"]) <= 40 for r in lh)
    assert all(r["n_ref"] == "200" for r in rows)


def test_estimate_to_stdout(capsys):
    assert main(["estimate", "--affine", "8:2:3", "--t", "0.05", "--jobs", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# config_sha256=") and len(lines) == 5


def test_estimate_clamps_m():
    assert main(["estimate", "--affine", "4:1:2", "--t", "0.05", "--slq-m", "9",
                 "--jobs", "1"]) == 0


def test_benchmark_shape_and_determinism(tmp_path):
    outs = []
    for jobs in ("1", "2", "1"):
        out = tmp_path / f"b{len(outs)}"
        rc = main(["benchmark", "--affine", "16:4:12", "--t-auto", "--diag-points", "4",
                   "--method", "lhsd", "--method", "flipd-hutch", "--out", str(out),
                   "--jobs", jobs])
        assert rc == 0
        outs.append(out)
    summary = read_csv(outs[0] / "summary.csv")
    assert len(summary) == 1 and list(summary[0]) == ["dataset", "t", "lhsd", "flipd-hutch"]
    for name in ("records.csv", "summary.csv"):
        first = (outs[0] / name).read_bytes()
        assert all((o / name).read_bytes() == first for o in outs[1:])
    assert not (outs[0] / "PARTIAL").exists()


def test_jobs_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("LHSD_JOBS", "zero")
    assert main(["benchmark", "--affine", "8:2:3", "--t", "0.05",
                 "--out", str(tmp_path / "o")]) == 2


def test_benchmark_failure_leaves_partial_marker(tmp_path, mixture_ini):
    data = tmp_path / "mix.csv"
    main(["generate-data", "--spec", str(mixture_ini), "--out", str(data)])
    out = tmp_path / "fail"
    # two reference points leave LPCA with no admissible neighborhood size
    rc = main(["benchmark", "--data", str(data), "--num-reference", "2", "--t", "0.05",
               "--method", "flipd", "--method", "lpca", "--out", str(out), "--jobs", "1"])
    assert rc == 1
    assert (out / "PARTIAL").exists()
    assert len(read_csv(out / "records.csv")) == 258
    assert not (out / "summary.csv").exists()


def test_transition_mass_outputs(tmp_path, capsys):
    out = tmp_path / "tm"
    rc = main(["transition-mass", "--affine", "16:4:8", "--t-grid", "0.01:0.3:16",
               "--diag-points", "4", "--out", str(out), "--jobs", "1"])
    assert rc == 0
    mass = read_csv(out / "transition_mass.csv")
    assert len(mass) == 16
    zone = read_csv(out / "safe_zone.csv")[0]
    assert zone["t_lo"] != "NONE"
    assert float(zone["t_lo"]) <= float(zone["t_selected"]) <= float(zone["t_hi"])
    assert (out / "spectrum.csv").exists() and (out / "filter_profile.csv").exists()
    assert "safe zone [" in capsys.readouterr().out


def test_transition_mass_collapse_regime(tmp_path, capsys):
    out = tmp_path / "tm"
    rc = main(["transition-mass", "--affine", "16:4:8", "--t-grid", "0.6:1.0:5",
               "--diag-points", "4", "--out", str(out), "--jobs", "1"])
    assert rc == 0
    zone = read_csv(out / "safe_zone.csv")[0]
    assert zone["t_lo"] == "NONE" and zone["all_collapsed"] == "1"
    assert all(r["collapsed"] == "1" for r in read_csv(out / "transition_mass.csv"))


def test_t_auto_without_zone_is_estimation_error(tmp_path):
    rc = main(["estimate", "--affine", "16:4:3", "--t-auto", "--t-grid", "0.6:1.0:5",
               "--diag-points", "4", "--jobs", "1", "--out", str(tmp_path / "e.csv")])
    assert rc == 1


def test_spectrum_command(tmp_path):
    out = tmp_path / "sp"
    assert main(["spectrum", "--affine", "16:4:8", "--t", "0.05", "--diag-points", "3",
                 "--out", str(out), "--jobs", "1"]) == 0
    rows = read_csv(out / "spectrum.csv")
    assert len(rows) == 48


@pytest.mark.parametrize("argv", [
    ["estimate", "--config", "/nonexistent.ini"],
    ["estimate", "--data", "/nonexistent.csv", "--t", "0.1"],
    ["estimate", "--t", "0.1"],
    ["estimate", "--affine", "8:2", "--t", "0.1"],
    ["estimate", "--affine", "8:2:3", "--t", "0.1", "--t-auto"],
    ["estimate", "--affine", "8:2:3", "--t", "0.1", "--filter-c", "-1"],
    ["transition-mass", "--affine", "8:2:3", "--t-grid", "0.5:0.1:3"],
])
def test_config_errors_exit_2(argv):
    assert main(argv) == 2


def test_perturbed_oracle_runs():
    assert main(["estimate", "--affine", "16:4:2", "--t", "0.05", "--oracle", "perturbed",
                 "--epsilon", "0.01", "--method", "flipd", "--jobs", "1"]) == 0
