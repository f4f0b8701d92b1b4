"""Config schema, artifact emission, exit codes, and determinism."""

import hashlib
import json
import xml.etree.ElementTree as ET

import pytest

from cgolab import ConfigError
from cgolab.cli import ExperimentConfig, main, run
from cgolab.dtn import DtnMatrix, load_field

SMALL_GRID = {"grid": {"n": 1, "nx": 17, "nt": 17, "T": 1.0}}


def _write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# schema


def test_defaults_fill_and_round_trip():
    cfg = ExperimentConfig()
    assert cfg["grid"]["nx"] == 33
    assert cfg["reconstruct"]["rho"] == "auto"
    assert cfg["noise"]["seed"] is None
    clone = ExperimentConfig(cfg.to_dict())
    assert clone.to_json() == cfg.to_json()


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        ExperimentConfig({"gird": {}})
    with pytest.raises(ConfigError, match="nxx"):
        ExperimentConfig({"grid": {"nxx": 33}})


def test_leaf_type_validation():
    with pytest.raises(ConfigError, match="expected an integer"):
        ExperimentConfig({"seed": 1.5})
    with pytest.raises(ConfigError, match="expected an integer"):
        ExperimentConfig({"seed": True})
    with pytest.raises(ConfigError, match="expected a number"):
        ExperimentConfig({"grid": {"T": "one"}})
    with pytest.raises(ConfigError, match="expected true/false"):
        ExperimentConfig({"reconstruct": {"use_hermitian": "yes"}})
    with pytest.raises(ConfigError, match="number or 'auto'"):
        ExperimentConfig({"reconstruct": {"rho": "big"}})
    assert ExperimentConfig({"reconstruct": {"rho": 8}})["reconstruct"]["rho"] == 8.0
    assert ExperimentConfig({"noise": {"seed": None}})["noise"]["seed"] is None
    with pytest.raises(ConfigError, match="root"):
        ExperimentConfig([1, 2])


# ---------------------------------------------------------------------------
# artifacts


def test_forward_emits_artifacts_and_valid_manifest(tmp_path):
    cfg = ExperimentConfig(SMALL_GRID)
    summary = run("forward", cfg, tmp_path / "out")
    assert summary["max_abs"] == pytest.approx(1.0)
    out = tmp_path / "out"
    names = {p.name for p in out.iterdir()}
    assert names == {"solution.field", "neumann_trace.csv", "summary.json",
                     "manifest.json"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "forward"
    assert manifest["config"]["grid"]["nx"] == 17
    for name, digest in manifest["files"].items():
        actual = hashlib.sha256((out / name).read_bytes()).hexdigest()
        assert actual == digest
    field = load_field(out / "solution.field")
    assert field.grid.nx == 17
    header = (out / "neumann_trace.csv").read_text().splitlines()[0]
    assert header == "t,p0000,p0001"


def test_dtn_matrix_artifact_is_loadable(tmp_path):
    cfg = ExperimentConfig({**SMALL_GRID, "dtn": {"k_max": 2}})
    summary = run("dtn", cfg, tmp_path / "out")
    m = DtnMatrix.load(tmp_path / "out" / "dtn_matrix.dtn")
    assert m.matrix.shape == (summary["rows"], summary["cols"]) == (10, 10)
    assert summary["operator_norm"] == pytest.approx(38.556, abs=0.01)


def test_pairing_check_passes_at_small_scale(tmp_path):
    cfg = ExperimentConfig({**SMALL_GRID, "pairing": {"cases": 3, "threshold": 0.2}})
    summary = run("pairing-check", cfg, tmp_path / "out")
    assert summary["worst_rel_gap"] < 0.05
    rows = (tmp_path / "out" / "pairing.csv").read_text().splitlines()
    assert rows[0] == "case,boundary_re,boundary_im,volume_re,volume_im,rel_gap"
    assert len(rows) == 4


def test_cgo_check_reports_decay_and_svg(tmp_path):
    cfg = ExperimentConfig({"grid": {"n": 1, "nx": 17, "nt": 65, "T": 1.0}})
    summary = run("cgo-check", cfg, tmp_path / "out")
    assert summary["slope_minus"] < -0.15
    svg = (tmp_path / "out" / "cgo_decay.svg").read_text()
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")


def test_reconstruct_emits_slice_table(tmp_path):
    cfg = ExperimentConfig({**SMALL_GRID, "reconstruct": {
        "rho": 4.0, "R": 4.0, "measure_delta": False, "basis_k_max": 2}})
    summary = run("reconstruct", cfg, tmp_path / "out")
    assert summary["error"] == pytest.approx(0.0473, abs=2e-3)
    assert summary["delta"] is None
    rows = (tmp_path / "out" / "slices.csv").read_text().splitlines()
    assert rows[0] == "index,xi,tau,feasible,value_re,value_im"
    assert len(rows) > 1
    load_field(tmp_path / "out" / "estimate.field")


def test_stability_sweep_and_recovery_summaries(tmp_path):
    cfg = ExperimentConfig({**SMALL_GRID, "potential": {"family": "zero"},
                            "sweep": {"kind": "noise", "noise_levels": [1e-2, 1e-3]},
                            "reconstruct": {"basis_k_max": 2}})
    summary = run("stability-sweep", cfg, tmp_path / "a")
    assert summary["fit_used"] == 2
    assert (tmp_path / "a" / "sweep.svg").exists()

    cfg2 = ExperimentConfig({**SMALL_GRID, "semilinear": {
        "family": "linear", "slope": 1.0, "ref_family": "linear",
        "ref_slope": 1.0, "levels": [0.0, 0.5]},
        "reconstruct": {"basis_k_max": 2}})
    summary2 = run("recover-nonlinearity", cfg2, tmp_path / "b")
    assert summary2["sup_prime_error"] == 0.0
    header = (tmp_path / "b" / "nonlinearity.csv").read_text().splitlines()[0]
    assert header == ("s,a_prime,a_value,truth_prime,truth_value,d_prime,"
                      "raw_window,gain")


def test_identical_configs_give_identical_bytes(tmp_path):
    payload = {**SMALL_GRID, "seed": 5, "pairing": {"cases": 2, "threshold": 0.2}}
    run("pairing-check", ExperimentConfig(payload), tmp_path / "one")
    run("pairing-check", ExperimentConfig(payload), tmp_path / "two")
    for name in ("pairing.csv", "summary.json", "manifest.json"):
        assert (tmp_path / "one" / name).read_bytes() == \
            (tmp_path / "two" / name).read_bytes()
    # a different seed must change the seeded sample draws
    carleman = {**SMALL_GRID, "carleman": {"samples": 7, "rhos": [4.0]}}
    run("carleman-check", ExperimentConfig({**carleman, "seed": 5}), tmp_path / "c5")
    run("carleman-check", ExperimentConfig({**carleman, "seed": 6}), tmp_path / "c6")
    assert (tmp_path / "c5" / "carleman.csv").read_bytes() != \
        (tmp_path / "c6" / "carleman.csv").read_bytes()


def test_run_rejects_unknown_command(tmp_path):
    with pytest.raises(ConfigError, match="subcommand"):
        run("fit-everything", ExperimentConfig(), tmp_path)


# ---------------------------------------------------------------------------
# exit codes


def test_main_success_and_seed_override(tmp_path):
    path = _write_config(tmp_path, {**SMALL_GRID,
                                    "pairing": {"cases": 2, "threshold": 0.2}})
    rc = main(["pairing-check", "--config", path, "--out", str(tmp_path / "out"),
               "--seed", "5"])
    assert rc == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 5


def test_main_config_errors_exit_2(tmp_path, capsys):
    rc = main(["forward", "--config", str(tmp_path / "missing.json")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err

    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json", encoding="utf-8")
    assert main(["forward", "--config", str(bad_json)]) == 2

    unknown = _write_config(tmp_path, {"grid": {"nxx": 17}}, "unknown.json")
    assert main(["forward", "--config", unknown]) == 2

    bad_grid = _write_config(tmp_path, {"grid": {"n": 5}}, "badgrid.json")
    rc = main(["forward", "--config", bad_grid, "--out", str(tmp_path / "g")])
    assert rc == 2

    path = _write_config(tmp_path, SMALL_GRID, "ok.json")
    assert main(["forward", "--config", path, "--threads", "0"]) == 2


def test_main_numerical_failure_exits_3(tmp_path, capsys):
    path = _write_config(tmp_path, {**SMALL_GRID,
                                    "pairing": {"cases": 2, "threshold": 1e-12}})
    rc = main(["pairing-check", "--config", path, "--out", str(tmp_path / "out")])
    assert rc == 3
    assert "numerical failure" in capsys.readouterr().err


def test_main_rejects_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["does-not-exist"])
