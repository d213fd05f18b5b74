import json

import numpy as np
import pytest
import yaml

from oscillattr.cli import main, run
from oscillattr.config import ConfigError, load_config, parse_config
from oscillattr.coupling import build_laplacian, save_matrix

LOCKED = {
    "model": {"N": 4, "d": 1, "bc": "periodic"},
    "params": {"alpha": 10, "K": 12, "beta": 1, "f": 0, "eps": 0.5, "g": "sin"},
    "numerics": {"dt": 0.001, "T": 2, "n_seeds": 2, "seed0": 3, "n_cloud": 32, "n_bins": 8},
}


def _write(tmp_path, cfg, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def test_check_conditions(tmp_path):
    cfg = _write(tmp_path, LOCKED)
    assert main(["check-conditions", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "conditions.json").read_text())
    assert rep["gap_ok"] is True and rep["lambda1"] == pytest.approx(2.0)
    assert all(k == k.lower() for k in rep)
    meta = json.loads((tmp_path / "o" / "conditions.json.meta.json").read_text())
    assert meta["config_digest"] == load_config(cfg).digest() and meta["tool_version"]


def test_spectrum(tmp_path):
    cfg = _write(tmp_path, {"model": {"N": 2, "d": 1, "bc": "neumann"}})
    assert run("spectrum", cfg, tmp_path / "o") == 0
    rep = json.loads((tmp_path / "o" / "spectrum.json").read_text())
    np.testing.assert_allclose(rep["eigenvalues"], [0, 2], atol=1e-12)
    assert (tmp_path / "o" / "mu.csv").read_text().startswith("i,lambda,mu_plus_re")


def test_invalid_field_exit_code(tmp_path, capsys):
    bad = {**LOCKED, "params": {**LOCKED["params"], "alpha": -1}}
    assert run("check-conditions", _write(tmp_path, bad)) == 2
    assert "params.alpha" in capsys.readouterr().err


@pytest.mark.parametrize("raw, where", [
    ({"params": {"alpah": 1}}, "params.alpah"),
    ({"extra": 1}, "extra"),
    ({"numerics": {"delta": 1.5}}, "numerics.delta"),
    ({"numerics": {"n_seeds": 2.5}}, "numerics.n_seeds"),
    ({"model": {"bc": "dirichlet"}}, "model.bc"),
    ({"params": {"g": "cos"}}, "params.g"),
    ({"params": {"eps": [0.1, -0.1]}}, "params.eps[1]"),
    ({"outputs": {"formats": ["xml"]}}, "outputs.formats"),
])
def test_strict_config(raw, where):
    with pytest.raises(ConfigError) as info:
        parse_config(raw)
    assert info.value.where == where


def test_vector_and_table_config(tmp_path):
    cfg = parse_config({"model": {"N": 3}, "params": {
        "f": [0.1, 0.2, 0.3], "eps": 0.2,
        "g": {"table": [0.0, 1.0, 0.0, -1.0], "kappa": 6.283185307179586}}})
    p = cfg.oscillator_params(3)
    np.testing.assert_array_equal(p.f, [0.1, 0.2, 0.3])
    assert p.g_model.name == "table"
    with pytest.raises(ConfigError):
        cfg.oscillator_params(4)


def test_matrix_file(tmp_path):
    save_matrix(build_laplacian(3, 1, 1.0, "periodic"), tmp_path / "A.txt")
    cfg = _write(tmp_path, {"model": {"matrix_file": "A.txt"}, "params": {"alpha": 2, "K": 1}})
    assert run("spectrum", cfg, tmp_path / "o") == 0
    rep = json.loads((tmp_path / "o" / "spectrum.json").read_text())
    assert rep["lambda1"] == pytest.approx(3.0)

    missing = _write(tmp_path, {"model": {"matrix_file": "nope.txt"}}, "m.yaml")
    assert run("spectrum", missing) == 2

    (tmp_path / "I.txt").write_text("2 1\n1 0\n0 1\n")
    ident = _write(tmp_path, {"model": {"matrix_file": "I.txt"}}, "i.yaml")
    assert run("check-conditions", ident, tmp_path / "o2") == 2
    assert run("spectrum", ident, tmp_path / "o3") == 2


def test_blow_up_exit_code(tmp_path):
    (tmp_path / "neg.txt").write_text("2 1\n-1 1\n1 -1\n")
    cfg = dict(LOCKED, model={"matrix_file": "neg.txt"})
    # (HA) rejects the matrix before any integration
    assert run("simulate", _write(tmp_path, cfg)) == 2


def test_blow_up_reported(tmp_path, monkeypatch):
    from oscillattr import cli
    from oscillattr.dynamics import BlowUpError

    def boom(cfg, seed):
        raise BlowUpError(10, 0.01)

    monkeypatch.setattr(cli, "_simulate_one", boom)
    assert run("simulate", _write(tmp_path, LOCKED), tmp_path / "o") == 3


def _bodies(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.suffix == ".csv"}


@pytest.mark.parametrize("cmd", ["simulate", "rotation", "attractor"])
def test_deterministic_csv(tmp_path, cmd):
    cfg = _write(tmp_path, LOCKED)
    assert run(cmd, cfg, tmp_path / "a") == 0
    assert run(cmd, cfg, tmp_path / "b") == 0
    a, b = _bodies(tmp_path / "a"), _bodies(tmp_path / "b")
    assert a and a == b


def test_workers_do_not_change_results(tmp_path):
    cfg = _write(tmp_path, dict(LOCKED, numerics={**LOCKED["numerics"], "n_seeds": 6}))
    assert run("rotation", cfg, tmp_path / "one", workers=1) == 0
    assert run("rotation", cfg, tmp_path / "two", workers=2) == 0
    assert _bodies(tmp_path / "one") == _bodies(tmp_path / "two")


def test_artifact_contents(tmp_path):
    cfg = _write(tmp_path, LOCKED)
    assert run("attractor", cfg, tmp_path / "o") == 0
    head = (tmp_path / "o" / "attractor.csv").read_text().splitlines()[0]
    assert head == "seed,T,s,q_1,q_2,q_3,q_4,q_5,q_6,q_7"
    rep = json.loads((tmp_path / "o" / "attractor.json").read_text())
    assert len(rep["runs"]) == 2
    assert {"lipschitz_est", "periodicity_defect", "max_bin_spread", "e2_diameter"} <= set(rep["runs"][0]["curve_fit"])

    assert run("rotation", cfg, tmp_path / "r") == 0
    rot = json.loads((tmp_path / "r" / "rotation.json").read_text())
    assert {"rho_hat", "spread_j", "spread_seed", "locking"} <= set(rot)
    assert rot["locking"]["condition"]["gap_ok"] is True
    assert (tmp_path / "r" / "rotation.csv").read_text().startswith("seed,j,T,slope")
    meta = json.loads((tmp_path / "r" / "rotation.csv.meta.json").read_text())
    assert meta["seeds"] == load_config(cfg).seeds("rotation")


def test_simulate_sde_kind(tmp_path):
    cfg = dict(LOCKED, numerics={**LOCKED["numerics"], "kind": "sde", "record_every": 500})
    assert run("simulate", _write(tmp_path, cfg), tmp_path / "o") == 0
    files = sorted((tmp_path / "o").glob("trajectory_*.csv"))
    assert len(files) == 2
    lines = files[0].read_text().splitlines()
    assert lines[0] == "t,j,u,udot" and len(lines) == 1 + 5 * 4


def test_formats_filter(tmp_path):
    cfg = dict(LOCKED, outputs={"formats": ["json"]})
    assert run("rotation", _write(tmp_path, cfg), tmp_path / "o") == 0
    assert not list((tmp_path / "o").glob("*.csv"))


def test_seed_derivation():
    cfg = parse_config(LOCKED)
    s = cfg.seeds("rotation")
    assert s[1] - s[0] == 1 and s != cfg.seeds("attractor")
