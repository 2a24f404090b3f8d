"""End-to-end pipeline runs, manifest reruns, and the error contract."""
import hashlib
import json
from importlib import resources

import numpy as np
import pytest

from chronoflow import demography as dem
from chronoflow.cli import main
from conftest import write_csv


def run_cli(*args):
    return main([str(a) for a in args])


def read_manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))


def assert_outputs_intact(out_dir):
    manifest = read_manifest(out_dir)
    assert manifest["outputs"], "pipeline wrote no outputs"
    for entry in manifest["outputs"]:
        digest = hashlib.sha256(
            (out_dir / entry["path"]).read_bytes()).hexdigest()
        assert digest == entry["sha256"], entry["path"]
    return manifest


def assert_rerun_identical(subcommand, out1, out2):
    """Replaying a manifest must reproduce every output byte for byte."""
    manifest = read_manifest(out1)
    code = run_cli(*subcommand, "--config", out1 / "manifest.json",
                   "--out", out2)
    assert code == 0
    for entry in manifest["outputs"]:
        assert (out1 / entry["path"]).read_bytes() == \
            (out2 / entry["path"]).read_bytes(), entry["path"]


def error_payload(capsys):
    data = json.loads(capsys.readouterr().out.strip())
    assert set(data) == {"error"}
    assert set(data["error"]) == {"type", "message"}
    return data["error"]


def write_config(path, cfg):
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def panel_csv(path):
    rng = np.random.default_rng(0)
    rows = []
    for sid in ("north", "south"):
        level = rng.normal(0.0, 1.0)
        for t in range(20):
            a = level + 0.1 * t + rng.normal(0.0, 0.2)
            rows.append([sid, float(t), repr(float(a)),
                         repr(float(2.0 * a + rng.normal(0.0, 0.05)))])
    write_csv(path, ["series_id", "time", "a", "b"], rows)
    return path


def wander_csv(path, n_series=12, steps=40):
    rng = np.random.default_rng(6)
    rows = []
    for i in range(n_series):
        x = rng.normal(0.0, 0.1, 2)
        for t in range(steps + 1):
            rows.append([f"w{i:02d}", float(t) * 0.1,
                         repr(float(x[0])), repr(float(x[1]))])
            x = x - 0.5 * x * 0.1 + np.sqrt(0.02) * rng.normal(size=2)
    write_csv(path, ["series_id", "time", "x", "y"], rows)
    return path


# ---------------------------------------------------------------------------
# pipelines and reruns
# ---------------------------------------------------------------------------

def test_version_flag():
    with pytest.raises(SystemExit) as excinfo:
        run_cli("--version")
    assert excinfo.value.code == 0


def test_pca_pipeline_rerun(tmp_path):
    cfg = write_config(tmp_path / "cfg.json",
                       {"input": str(panel_csv(tmp_path / "panel.csv"))})
    out1, out2 = tmp_path / "out", tmp_path / "re"
    assert run_cli("pca", "--config", cfg, "--out", out1) == 0
    manifest = assert_outputs_intact(out1)
    assert manifest["config"]["seed"] == 0
    assert manifest["config"]["format"] == "csv"
    assert manifest["config"]["subcommand"] == "pca"
    assert_rerun_identical(("pca",), out1, out2)


def test_markov_estimate_then_simulate(tmp_path):
    rng = np.random.default_rng(4)
    steps = np.where(rng.random(800) < 0.55, 1, -1)
    walk = np.concatenate([[0], np.cumsum(steps)]).astype(float)
    rows = [["walk", float(t), repr(float(v))] for t, v in enumerate(walk)]
    write_csv(tmp_path / "walk.csv", ["series_id", "time", "x"], rows)
    lo, hi = walk.min(), walk.max()
    est_cfg = write_config(tmp_path / "est.json", {
        "input": str(tmp_path / "walk.csv"),
        "column": "x",
        "bin_edges": np.linspace(lo, hi, 7).tolist(),
    })
    est_out = tmp_path / "est"
    assert run_cli("markov", "estimate", "--config", est_cfg,
                   "--out", est_out) == 0
    kernel = json.loads((est_out / "kernel.json").read_text(encoding="utf-8"))
    matrix = np.asarray(kernel["matrix"])
    np.testing.assert_allclose(matrix.sum(axis=1), 1.0, atol=1e-9)

    sim_cfg = write_config(tmp_path / "sim.json", {
        "kernel": str(est_out / "kernel.json"), "steps": 100})
    sim_out, sim_re = tmp_path / "sim", tmp_path / "sim_re"
    assert run_cli("markov", "simulate", "--config", sim_cfg, "--seed", 7,
                   "--out", sim_out) == 0
    assert read_manifest(sim_out)["config"]["seed"] == 7
    assert_rerun_identical(("markov", "simulate"), sim_out, sim_re)

    json_out = tmp_path / "sim_json"
    assert run_cli("markov", "simulate", "--config", sim_cfg,
                   "--format", "json", "--out", json_out) == 0
    names = [e["path"] for e in read_manifest(json_out)["outputs"]]
    assert any(n.endswith(".json") for n in names)
    assert_rerun_identical(("markov", "simulate"), json_out,
                           tmp_path / "sim_json_re")


def test_markov_embed_master_order(tmp_path):
    embed_cfg = write_config(tmp_path / "embed.json",
                             {"matrix": [[0.9, 0.1], [0.2, 0.8]]})
    out = tmp_path / "embed"
    assert run_cli("markov", "embed", "--config", embed_cfg,
                   "--out", out) == 0
    verdict = json.loads(
        (out / "embeddability.json").read_text(encoding="utf-8"))
    assert verdict["status"] == "embeddable"
    assert_rerun_identical(("markov", "embed"), out, tmp_path / "embed_re")

    master_cfg = write_config(tmp_path / "master.json", {
        "rates": {"states": 2, "rates": [[-1.0, 1.0], [1.0, -1.0]]},
        "p0": [1.0, 0.0], "t_final": 1.0, "dt": 0.01})
    assert run_cli("markov", "master", "--config", master_cfg,
                   "--out", tmp_path / "master") == 0

    rng = np.random.default_rng(11)
    walk = np.cumsum(np.where(rng.random(3000) < 0.5, 1, -1)).astype(float)
    rows = [["w", float(t), repr(float(v))] for t, v in enumerate(walk)]
    write_csv(tmp_path / "order.csv", ["series_id", "time", "x"], rows)
    order_cfg = write_config(tmp_path / "order.json", {
        "input": str(tmp_path / "order.csv"),
        "bin_width": max(1.0, float(np.ptp(walk)) // 4 + 1),
        "max_lag": 2})
    assert run_cli("markov", "order", "--config", order_cfg,
                   "--out", tmp_path / "order") == 0


def test_nullmodel_reference_rerun(tmp_path):
    out1, out2 = tmp_path / "null", tmp_path / "null_re"
    assert run_cli("nullmodel", "--out", out1) == 0
    report = json.loads((out1 / "nullmodel.json").read_text(encoding="utf-8"))
    assert report["p_value"] < 0.05
    assert len(report["modes"]) >= 2
    assert report["stationary"]["unique"]
    assert_rerun_identical(("nullmodel",), out1, out2)


def test_sde_pipeline_chain(tmp_path):
    fit_cfg = write_config(tmp_path / "fit.json", {
        "input": str(wander_csv(tmp_path / "ou.csv")),
        "grid": {"x_min": -0.4, "x_max": 0.4, "y_min": -0.4, "y_max": 0.4,
                 "nx": 5, "ny": 5}})
    fit_out = tmp_path / "fit"
    assert run_cli("sde", "fit", "--config", fit_cfg, "--out", fit_out) == 0
    field_path = str(fit_out / "field.json")

    sample_cfg = write_config(tmp_path / "sample.json", {
        "field": field_path, "x0": [0.0, 0.0], "dt": 0.02, "t_final": 2.0})
    sample_out = tmp_path / "sample"
    assert run_cli("sde", "sample", "--config", sample_cfg,
                   "--out", sample_out) == 0
    assert_rerun_identical(("sde", "sample"), sample_out,
                           tmp_path / "sample_re")

    cycles_cfg = write_config(tmp_path / "cycles.json", {
        "field": field_path, "dt": 0.02,
        "query": {"origin": [0.0, 0.0], "epsilon1": 0.2, "epsilon2": 0.1,
                  "horizon": 1.0, "n_samples": 50}})
    cycles_out = tmp_path / "cycles"
    assert run_cli("sde", "cycles", "--config", cycles_cfg,
                   "--out", cycles_out) == 0
    cycles = json.loads(
        (cycles_out / "cycles.json").read_text(encoding="utf-8"))
    assert 0.0 <= cycles["probability"] <= 1.0

    helm_cfg = write_config(tmp_path / "helm.json", {"field": field_path})
    assert run_cli("sde", "helmholtz", "--config", helm_cfg,
                   "--out", tmp_path / "helm") == 0

    plot_cfg = write_config(tmp_path / "plot.json", {"field": field_path})
    plot_out = tmp_path / "plot"
    assert run_cli("sde", "plot", "--config", plot_cfg,
                   "--out", plot_out) == 0
    names = [e["path"] for e in read_manifest(plot_out)["outputs"]]
    assert any(n.endswith(".svg") for n in names)
    assert_rerun_identical(("sde", "plot"), plot_out, tmp_path / "plot_re")


def test_demography_pipeline_chain(tmp_path):
    grow = dem.LeslieModel([0.9, 0.9], [0.8])
    decline = dem.LeslieModel([0.25, 0.25], [0.45])
    model = dem.DemographicHmm(
        (grow, decline), 1, np.array([[[0.8, 0.3], [0.2, 0.7]]]),
        np.zeros(6, dtype=np.int64), [0.5, 0.5])
    model_path = write_config(tmp_path / "model.json", dem.hmm_to_dict(model))

    sim_cfg = write_config(tmp_path / "sim.json",
                           {"model": str(model_path), "T": 6})
    sim_out = tmp_path / "sim"
    assert run_cli("demography", "simulate", "--config", sim_cfg,
                   "--seed", 1, "--out", sim_out) == 0
    assert_rerun_identical(("demography", "simulate"), sim_out,
                           tmp_path / "sim_re")

    _, _, totals = dem.simulate_hmm(model, 6, seed=1)
    obs = dem.sample_radiocarbon(totals, 12, seed=2)
    dem.write_observations(tmp_path / "obs.csv", obs)

    ll_cfg = write_config(tmp_path / "ll.json", {
        "model": str(model_path), "observations": str(tmp_path / "obs.csv")})
    ll_out = tmp_path / "ll"
    assert run_cli("demography", "loglik", "--config", ll_cfg,
                   "--out", ll_out) == 0
    report = json.loads((ll_out / "loglik.json").read_text(encoding="utf-8"))
    assert report["n_observations"] == len(obs)
    assert report["log_likelihood"] < 0

    fit_cfg = write_config(tmp_path / "fit.json", {
        "model": str(model_path), "observations": str(tmp_path / "obs.csv"),
        "ascent": {"n_starts": 2, "max_sweeps": 12, "profile_points": 5}})
    fit_out = tmp_path / "fit"
    assert run_cli("demography", "fit", "--config", fit_cfg, "--seed", 3,
                   "--out", fit_out) == 0
    fitted = json.loads(
        (fit_out / "inference.json").read_text(encoding="utf-8"))
    assert fitted["log_likelihood"] >= report["log_likelihood"] - 1e-9
    assert_rerun_identical(("demography", "fit"), fit_out,
                           tmp_path / "fit_re")


def test_hinge_on_shipped_scores(tmp_path):
    scores = resources.files("chronoflow") / "data/sawtooth_scores.csv"
    cfg = write_config(tmp_path / "hinge.json",
                       {"scores": str(scores), "n_breaks": 2})
    out = tmp_path / "hinge"
    assert run_cli("hinge", "--config", cfg, "--out", out) == 0
    fit = json.loads((out / "fit.json").read_text(encoding="utf-8"))
    np.testing.assert_allclose(fit["breakpoints"], [-2.5, -0.5], atol=0.05)
    assert_rerun_identical(("hinge",), out, tmp_path / "hinge_re")


# ---------------------------------------------------------------------------
# error contract
# ---------------------------------------------------------------------------

def test_missing_input_exits_3(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json",
                       {"input": str(tmp_path / "absent.csv")})
    assert run_cli("pca", "--config", cfg, "--out", tmp_path / "out") == 3
    assert error_payload(capsys)["type"] == "ParseError"


def test_invalid_matrix_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json",
                       {"matrix": [[1.4, -0.4], [0.2, 0.8]]})
    assert run_cli("markov", "embed", "--config", cfg,
                   "--out", tmp_path / "out") == 2
    assert error_payload(capsys)["type"] == "SchemaError"


def test_manifest_subcommand_mismatch_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json",
                       {"input": str(panel_csv(tmp_path / "panel.csv"))})
    out = tmp_path / "out"
    assert run_cli("pca", "--config", cfg, "--out", out) == 0
    assert run_cli("hinge", "--config", out / "manifest.json",
                   "--out", tmp_path / "re") == 2
    payload = error_payload(capsys)
    assert payload["type"] == "SchemaError"
    assert "pca" in payload["message"]


def test_reducible_kernel_exits_4(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", {
        "kernel": {"states": 2, "matrix": [[1.0, 0.0], [0.0, 1.0]],
                   "bin_edges": [0.0, 1.0, 2.0]},
        "ensemble": {"n_series": 3,
                     "start_distribution": {"values": [0.5, 1.5],
                                            "weights": [0.5, 0.5]},
                     "length_distribution": {"values": [12],
                                             "weights": [1.0]},
                     "seed": 0}})
    assert run_cli("nullmodel", "--config", cfg,
                   "--out", tmp_path / "out") == 4
    assert error_payload(capsys)["type"] == "NoUniqueStationaryError"


def test_unsupported_start_exits_2(tmp_path, capsys):
    fit_cfg = write_config(tmp_path / "fit.json", {
        "input": str(wander_csv(tmp_path / "ou.csv", n_series=6, steps=30)),
        "grid": {"x_min": -0.4, "x_max": 0.4, "y_min": -0.4, "y_max": 0.4,
                 "nx": 5, "ny": 5}})
    fit_out = tmp_path / "fit"
    assert run_cli("sde", "fit", "--config", fit_cfg, "--out", fit_out) == 0
    sample_cfg = write_config(tmp_path / "sample.json", {
        "field": str(fit_out / "field.json"),
        "x0": [9.0, 9.0], "dt": 0.02, "t_final": 1.0})
    assert run_cli("sde", "sample", "--config", sample_cfg,
                   "--out", tmp_path / "out") == 2
    assert error_payload(capsys)["type"] == "UnsupportedNodeError"


def test_bad_format_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json",
                       {"matrix": [[1.0, 0.0], [0.0, 1.0]], "format": "xml"})
    assert run_cli("markov", "embed", "--config", cfg,
                   "--out", tmp_path / "out") == 2
    assert error_payload(capsys)["type"] == "SchemaError"
