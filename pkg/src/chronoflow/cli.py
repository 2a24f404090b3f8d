"""Command-line entry point: one subcommand per pipeline.

Every run writes its outputs plus a manifest.json echoing the fully
resolved configuration (seed included), the tool version, the wall-clock
duration, and a sha256 digest per output file.  Outputs are deterministic:
re-running with the same configuration (for example by passing a previous
manifest as --config) reproduces every CSV/JSON/SVG byte for byte; only the
manifest's duration field differs.

Exit codes: 0 success, 2 configuration schema violation, 3 input parse
failure, 4 numerical failure.  Failures print a machine-readable JSON
object {"error": {"type", "message"}} to stdout.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from . import dataset as ds
from . import demography as dem
from . import hinge as hg
from . import markov as mk
from . import nullmodel as nm
from . import sde
from . import svgplot
from .exceptions import (
    ChronoflowError,
    EmptyEnsembleError,
    NumericalError,
    ParseError,
    SchemaError,
    UnsupportedNodeError,
)

logger = logging.getLogger("chronoflow.cli")

_EXIT_CODES = (
    (ParseError, 3),
    (NumericalError, 4),
    (UnsupportedNodeError, 2),
    (EmptyEnsembleError, 2),
    (SchemaError, 2),
    (ChronoflowError, 4),
)


# ---------------------------------------------------------------------------
# small IO helpers
# ---------------------------------------------------------------------------

def _write_json(out_dir: str, name: str, obj) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _write_text(out_dir: str, name: str, text: str) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _write_csv(out_dir: str, name: str, header, rows) -> str:
    import csv as _csv

    path = os.path.join(out_dir, name)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _cell(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _dataset_rows(data: ds.Dataset):
    header = ["series_id", "time"] + list(data.variable_names)
    rows = []
    for series in data.series:
        for t, vals in zip(series.times, series.values):
            rows.append([series.series_id, _cell(float(t))]
                        + [_cell(float(v)) for v in vals])
    return header, rows


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _load_json_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}")


def _maybe_file(value, loader, what: str):
    """Accept an inline object or a path to a JSON file holding one."""
    if isinstance(value, str):
        value = _load_json_file(value)
    if not isinstance(value, dict):
        raise SchemaError(f"{what} must be an object or a path to one")
    return loader(value)


def _require(cfg: dict, key: str, what: str = ""):
    if key not in cfg:
        raise SchemaError(f"config is missing required key {key!r}"
                          + (f" ({what})" if what else ""))
    return cfg[key]


# ---------------------------------------------------------------------------
# subcommand pipelines; each returns the list of files written
# ---------------------------------------------------------------------------

def _cmd_pca(cfg: dict, out_dir: str, seed: int, fmt: str) -> list[str]:
    data = ds.load_dataset(_require(cfg, "input", "dataset CSV path"))
    impute = cfg.get("impute", "drop-incomplete")
    n_components = int(cfg.get("n_components", 2))
    result = ds.run_pca(data, impute=impute)
    scores = ds.scores_dataset(data, result, n_components=n_components)
    header, rows = _dataset_rows(scores)
    return [
        _write_json(out_dir, "pca.json", result.to_dict()),
        _write_csv(out_dir, "scores.csv", header, rows),
    ]


def _load_kernel(value) -> mk.TransitionKernel:
    return _maybe_file(value, mk.kernel_from_dict, "kernel")


def _first_series_states(cfg: dict) -> np.ndarray:
    """The state sequence a markov subcommand operates on."""
    data = ds.load_dataset(_require(cfg, "input", "dataset CSV path"))
    name = cfg.get("column")
    col = data.column(name) if name else 0
    sid = cfg.get("series")
    if sid is None:
        if len(data.series) != 1:
            raise SchemaError(
                f"input has {len(data.series)} series; set 'series' to pick one")
        series = data.series[0]
    else:
        match = [s for s in data.series if s.series_id == str(sid)]
        if not match:
            raise SchemaError(f"no series named {sid!r} in input")
        series = match[0]
    values = series.values[:, col]
    return values[~np.isnan(values)]


def _cmd_markov_estimate(cfg, out_dir, seed, fmt) -> list[str]:
    data = ds.load_dataset(_require(cfg, "input", "dataset CSV path"))
    edges = cfg.get("bin_edges")
    prior = float(cfg.get("prior_count", 0.0))
    if edges is not None:
        kernel = nm.fit_conditional_kernel(data, edges)
        if prior:
            raise SchemaError("prior_count is only supported without binning")
    else:
        name = cfg.get("column")
        col = data.column(name) if name else 0
        seqs = []
        for series in data.series:
            vals = series.values[:, col]
            seqs.append(vals[~np.isnan(vals)])
        count = cfg.get("state_count")
        if count is None:
            tops = [s.max() for s in seqs if s.size]
            if not tops:
                raise SchemaError("input holds no values to estimate from")
            count = int(max(tops)) + 1
        kernel = mk.estimate_chain(seqs, int(count), prior_count=prior)
    return [_write_json(out_dir, "kernel.json", mk.kernel_to_dict(kernel))]


def _cmd_markov_simulate(cfg, out_dir, seed, fmt) -> list[str]:
    kernel = _load_kernel(_require(cfg, "kernel"))
    start = int(cfg.get("start_state", 0))
    steps = int(_require(cfg, "steps"))
    states = mk.simulate_chain(kernel, start, steps, seed)
    if fmt == "json":
        payload = {"states": states.tolist()}
        if kernel.binning is not None:
            payload["values"] = kernel.binning.centers[states].tolist()
        return [_write_json(out_dir, "chain.json", payload)]
    header = ["step", "state"]
    rows = [[i, int(s)] for i, s in enumerate(states)]
    if kernel.binning is not None:
        header.append("value")
        centers = kernel.binning.centers
        for row in rows:
            row.append(_cell(float(centers[row[1]])))
    return [_write_csv(out_dir, "chain.csv", header, rows)]


def _cmd_markov_embed(cfg, out_dir, seed, fmt) -> list[str]:
    if "matrix" in cfg:
        kernel = mk.TransitionKernel(np.asarray(cfg["matrix"], dtype=float),
                                     time_step=float(cfg.get("time_step", 1.0)))
    else:
        kernel = _load_kernel(_require(cfg, "kernel", "kernel path or matrix"))
    verdict = mk.check_embeddability(
        kernel, tolerance=float(cfg.get("tolerance", 1e-8)))
    payload = {
        "status": verdict.status,
        "reason": verdict.reason,
        "generator": (None if verdict.generator is None
                      else mk.rate_matrix_to_dict(verdict.generator)),
    }
    return [_write_json(out_dir, "embeddability.json", payload)]


def _cmd_markov_order(cfg, out_dir, seed, fmt) -> list[str]:
    values = _first_series_states(cfg)
    if not np.all(values == np.floor(values)):
        raise SchemaError("order test needs integer state values")
    seq = values.astype(np.int64)
    width = cfg.get("bin_width")
    if width is not None:
        seq = mk.coarse_grain(seq, int(width))
    report = mk.test_markov_order(seq,
                                  max_lag=int(cfg.get("max_lag", 3)),
                                  threshold=float(cfg.get("threshold", 0.05)))
    payload = {
        "max_lag_tested": report.max_lag_tested,
        "divergences": report.divergences.tolist(),
        "verdict": report.verdict,
        "lag": report.lag,
        "threshold": report.threshold,
    }
    return [_write_json(out_dir, "order.json", payload)]


def _cmd_markov_master(cfg, out_dir, seed, fmt) -> list[str]:
    rates = _maybe_file(_require(cfg, "rates"), mk.rate_matrix_from_dict,
                        "rates")
    p0 = np.asarray(_require(cfg, "p0"), dtype=float)
    trajectory = mk.integrate_master_equation(
        rates, p0, float(_require(cfg, "t_final")), float(_require(cfg, "dt")))
    if fmt == "json":
        return [_write_json(out_dir, "master.json", {
            "times": trajectory.times.tolist(),
            "probabilities": trajectory.probabilities.tolist()})]
    header = ["time"] + [f"p_{i}" for i in range(rates.states)]
    rows = [[_cell(float(t))] + [_cell(float(p)) for p in row]
            for t, row in zip(trajectory.times, trajectory.probabilities)]
    return [_write_csv(out_dir, "master.csv", header, rows)]


def _load_field(value) -> sde.DriftDiffusionField:
    return _maybe_file(value, sde.field_from_dict, "field")


def _grid_from_cfg(cfg: dict) -> sde.GridSpec:
    g = _require(cfg, "grid", "grid spec object")
    try:
        return sde.GridSpec(float(g["x_min"]), float(g["x_max"]),
                            float(g["y_min"]), float(g["y_max"]),
                            int(g["nx"]), int(g["ny"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed grid spec: {exc}")


def _cmd_sde_fit(cfg, out_dir, seed, fmt) -> list[str]:
    data = ds.load_dataset(_require(cfg, "input", "scores CSV path"))
    grid = _grid_from_cfg(cfg)
    bandwidth = cfg.get("bandwidth")
    field = sde.estimate_drift_diffusion(
        data, grid, None if bandwidth is None else float(bandwidth))
    return [_write_json(out_dir, "field.json", sde.field_to_dict(field))]


def _cmd_sde_sample(cfg, out_dir, seed, fmt) -> list[str]:
    field = _load_field(_require(cfg, "field"))
    x0 = _require(cfg, "x0", "starting point [x, y]")
    trajectory = sde.sample_sde(field, np.asarray(x0, dtype=float),
                                float(_require(cfg, "dt")),
                                float(_require(cfg, "t_final")), seed)
    if fmt == "json":
        return [_write_json(out_dir, "trajectory.json", {
            "times": trajectory.times.tolist(),
            "positions": trajectory.positions.tolist(),
            "exited": trajectory.exited})]
    rows = [[_cell(float(t)), _cell(float(x)), _cell(float(y))]
            for t, (x, y) in zip(trajectory.times, trajectory.positions)]
    return [_write_csv(out_dir, "trajectory.csv", ["time", "x", "y"], rows)]


def _cmd_sde_cycles(cfg, out_dir, seed, fmt) -> list[str]:
    field = _load_field(_require(cfg, "field"))
    q = _require(cfg, "query", "cycle query object")
    try:
        query = sde.CycleQuery(
            origin=(float(q["origin"][0]), float(q["origin"][1])),
            epsilon1=float(q["epsilon1"]), epsilon2=float(q["epsilon2"]),
            horizon=float(q["horizon"]), n_samples=int(q["n_samples"]),
            seed=seed)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed cycle query: {exc}")
    estimate = sde.return_probability(field, query,
                                      dt=float(cfg.get("dt", 0.01)))
    payload = estimate.to_dict()
    payload["query"] = {"origin": list(query.origin),
                        "epsilon1": query.epsilon1,
                        "epsilon2": query.epsilon2,
                        "horizon": query.horizon,
                        "n_samples": query.n_samples,
                        "seed": query.seed}
    return [_write_json(out_dir, "cycles.json", payload)]


def _cmd_sde_helmholtz(cfg, out_dir, seed, fmt) -> list[str]:
    field = _load_field(_require(cfg, "field"))
    decomposition = sde.helmholtz_decompose(field)
    return [_write_json(out_dir, "helmholtz.json", {
        "scalar_potential": decomposition.scalar_potential.tolist(),
        "stream_function": decomposition.stream_function.tolist(),
        "residual_norm": decomposition.residual_norm,
        "filled_nodes": decomposition.filled_nodes})]


def _cmd_sde_plot(cfg, out_dir, seed, fmt) -> list[str]:
    field = _load_field(_require(cfg, "field"))
    svg = svgplot.field_chart(field, title="drift field")
    return [_write_text(out_dir, "field.svg", svg)]


def _cmd_nullmodel(cfg, out_dir, seed, fmt) -> list[str]:
    kernel_cfg = cfg.get("kernel")
    ensemble_cfg = cfg.get("ensemble")
    if kernel_cfg is None or ensemble_cfg is None:
        ref_kernel, ref_spec = nm.reference_configuration()
    kernel = (ref_kernel if kernel_cfg is None
              else _maybe_file(kernel_cfg, mk.kernel_from_dict, "kernel"))
    spec = (ref_spec if ensemble_cfg is None
            else _maybe_file(ensemble_cfg, nm.spec_from_dict, "ensemble"))
    # the ensemble spec's own seed is authoritative unless one was given
    if seed is not None and seed != spec.seed:
        spec = nm.EnsembleSpec(spec.n_series, spec.start_distribution,
                               spec.length_distribution, seed)
    cfg["seed"] = spec.seed
    ensemble = nm.generate_ensemble(kernel, spec)
    pooled = np.concatenate([s.values[:, 0] for s in ensemble.series])
    report = nm.bimodality_test(pooled,
                                n_bootstrap=int(cfg.get("n_bootstrap", 1000)),
                                seed=spec.seed + 1)
    stationary = mk.stationary_distribution(kernel)
    payload = report.to_dict()
    payload["stationary"] = {"unique": True,
                             "distribution": stationary.tolist()}
    edges, counts = report.histogram
    svg = svgplot.histogram_chart(edges, counts, title="pooled values",
                                  x_label="value")
    header, rows = _dataset_rows(ensemble)
    return [
        _write_json(out_dir, "nullmodel.json", payload),
        _write_text(out_dir, "histogram.svg", svg),
        _write_csv(out_dir, "ensemble.csv", header, rows),
    ]


def _parse_events(path: str) -> dict[str, float]:
    import csv as _csv

    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open events file {path}: {exc}")
    events: dict[str, float] = {}
    with fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != \
                ["series_id", "onset_time"]:
            raise ParseError(f"{path}: header must be series_id,onset_time")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{line_no}: expected 2 columns")
            try:
                events[row[0].strip()] = float(row[1])
            except ValueError as exc:
                raise ParseError(f"{path}:{line_no}: {exc}")
    return events


def _cmd_hinge(cfg, out_dir, seed, fmt) -> list[str]:
    data = ds.load_dataset(_require(cfg, "scores", "scores CSV path"))
    x_col = data.column("pc1") if "pc1" in data.variable_names else 0
    y_col = data.column("pc2") if "pc2" in data.variable_names else \
        min(1, data.variable_count - 1)
    if x_col == y_col:
        raise SchemaError("scores input needs two variables")
    values, _, _ = data.stacked()
    points = values[:, [x_col, y_col]]
    points = points[~np.isnan(points).any(axis=1)]
    restarts = int(cfg.get("restarts", 8))
    n_breaks = cfg.get("n_breaks")
    if n_breaks is None:
        fit = hg.select_breakpoint_count(points,
                                         int(cfg.get("max_breaks", 3)),
                                         restarts=restarts, seed=seed)
    else:
        fit = hg.fit_sawtooth(points, int(n_breaks), restarts=restarts,
                              seed=seed)
    width = float(cfg.get("window_width", 1.0))
    curve = ds.sliding_window_mean(points, width)
    svg = svgplot.hinge_chart(points, curve, fit, title="piecewise fit")
    outputs = [
        _write_json(out_dir, "fit.json", fit.to_dict()),
        _write_text(out_dir, "hinge.svg", svg),
    ]
    events_path = cfg.get("events")
    if events_path is not None:
        events = _parse_events(str(events_path))
        report = hg.mg_timing_report(data, events, fit)
        outputs.append(_write_json(out_dir, "timing.json", report.to_dict()))
    return outputs


def _load_hmm(value) -> dem.DemographicHmm:
    return _maybe_file(value, dem.hmm_from_dict, "model")


def _cmd_demography_simulate(cfg, out_dir, seed, fmt) -> list[str]:
    model = _load_hmm(_require(cfg, "model"))
    horizon = int(cfg.get("T", model.horizon))
    path, populations, totals = dem.simulate_hmm(model, horizon, seed)
    header = (["period", "regime", "total"]
              + [f"z_{j}" for j in range(model.n_classes)])
    rows = []
    for t in range(horizon):
        rows.append([t, int(path.q[t]), _cell(float(totals[t]))]
                    + [_cell(float(v)) for v in populations[t]])
    svg = svgplot.line_chart([("total population", np.arange(horizon), totals)],
                             title="population trajectory",
                             x_label="period", y_label="total")
    return [
        _write_csv(out_dir, "population.csv", header, rows),
        _write_text(out_dir, "population.svg", svg),
    ]


def _cmd_demography_loglik(cfg, out_dir, seed, fmt) -> list[str]:
    model = _load_hmm(_require(cfg, "model"))
    observations = dem.parse_observations(
        _require(cfg, "observations", "observations CSV path"))
    ll = dem.forward_log_likelihood(model, observations)
    return [_write_json(out_dir, "loglik.json",
                        {"log_likelihood": ll,
                         "n_observations": len(observations)})]


def _cmd_demography_fit(cfg, out_dir, seed, fmt) -> list[str]:
    skeleton = _load_hmm(_require(cfg, "model"))
    observations = dem.parse_observations(
        _require(cfg, "observations", "observations CSV path"))
    ascent = cfg.get("ascent")
    config = None
    if ascent is not None:
        try:
            config = dem.AscentConfig(**ascent)
        except TypeError as exc:
            raise SchemaError(f"malformed ascent config: {exc}")
    result = dem.infer_transitions(skeleton, observations, config=config,
                                   seed=seed)
    return [
        _write_json(out_dir, "fitted_model.json",
                    dem.hmm_to_dict(result.model)),
        _write_json(out_dir, "inference.json", {
            "log_likelihood": result.log_likelihood,
            "converged": result.converged,
            "intervals": result.intervals.tolist()}),
    ]


_PIPELINES = {
    "pca": _cmd_pca,
    "markov estimate": _cmd_markov_estimate,
    "markov simulate": _cmd_markov_simulate,
    "markov embed": _cmd_markov_embed,
    "markov order": _cmd_markov_order,
    "markov master": _cmd_markov_master,
    "sde fit": _cmd_sde_fit,
    "sde sample": _cmd_sde_sample,
    "sde cycles": _cmd_sde_cycles,
    "sde helmholtz": _cmd_sde_helmholtz,
    "sde plot": _cmd_sde_plot,
    "nullmodel": _cmd_nullmodel,
    "hinge": _cmd_hinge,
    "demography simulate": _cmd_demography_simulate,
    "demography loglik": _cmd_demography_loglik,
    "demography fit": _cmd_demography_fit,
}


# ---------------------------------------------------------------------------
# argument parsing and the run wrapper
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chronoflow",
        description="Stochastic-process analyses of historical time series")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config (or a previous run's "
                                         "manifest) for this subcommand")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", default=".",
                        help="output directory (default: current)")
    common.add_argument("--format", choices=("json", "csv"),
                        help="format for tabular outputs (default csv)")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("pca", parents=[common])
    for name, actions in (("markov", ("estimate", "simulate", "embed",
                                      "order", "master")),
                          ("sde", ("fit", "sample", "cycles", "helmholtz",
                                   "plot")),
                          ("demography", ("simulate", "loglik", "fit"))):
        group = sub.add_parser(name)
        inner = group.add_subparsers(dest="action", required=True)
        for action in actions:
            inner.add_parser(action, parents=[common])
    sub.add_parser("nullmodel", parents=[common])
    sub.add_parser("hinge", parents=[common])
    return parser


def _resolve_config(args) -> tuple[str, dict, int, str]:
    name = args.subcommand
    if getattr(args, "action", None):
        name = f"{name} {args.action}"
    cfg: dict = {}
    if args.config:
        loaded = _load_json_file(args.config)
        if "config" in loaded and "outputs" in loaded:
            loaded = loaded["config"]  # a manifest: rerun its config
            if not isinstance(loaded, dict):
                raise SchemaError("manifest 'config' field is not an object")
        cfg = dict(loaded)
    declared = cfg.pop("subcommand", None)
    if declared is not None and declared != name:
        raise SchemaError(
            f"config is for {declared!r} but {name!r} was invoked")
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None and name != "nullmodel":
        seed = 0  # nullmodel defaults to its ensemble spec's seed instead
    if seed is not None:
        seed = int(seed)
    fmt = args.format if args.format is not None else cfg.get("format", "csv")
    if fmt not in ("json", "csv"):
        raise SchemaError(f"format must be json or csv, not {fmt!r}")
    cfg["seed"] = seed
    cfg["format"] = fmt
    return name, cfg, seed, fmt


def run(name: str, cfg: dict, out_dir: str) -> dict:
    """Execute one pipeline and write its manifest; returns the manifest.

    Pipelines may normalize cfg in place (for example filling in the seed
    actually used); the manifest echoes the final state.
    """
    pipeline = _PIPELINES[name]
    os.makedirs(out_dir, exist_ok=True)
    started = time.monotonic()
    seed = cfg.get("seed")
    if seed is None and name != "nullmodel":
        seed = 0
        cfg["seed"] = 0
    fmt = cfg.get("format", "csv")
    try:
        paths = pipeline(cfg, out_dir, seed, fmt)
    except (ValueError, TypeError, KeyError) as exc:
        # malformed config values (for example a non-numeric steps count)
        raise SchemaError(str(exc)) from exc
    duration = time.monotonic() - started
    echo = dict(cfg)
    echo["subcommand"] = name
    manifest = {
        "config": echo,
        "tool_version": __version__,
        "duration_seconds": duration,
        "outputs": [{"path": os.path.basename(p), "sha256": _sha256(p)}
                    for p in paths],
    }
    _write_json(out_dir, "manifest.json", manifest)
    return manifest


def main(argv=None) -> int:
    level = os.environ.get("CHRONOFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        name, cfg, _, _ = _resolve_config(args)
        run(name, cfg, args.out)
        return 0
    except ChronoflowError as exc:
        for cls, code in _EXIT_CODES:
            if isinstance(exc, cls):
                break
        else:
            code = 4
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)}}, sort_keys=True))
        logger.error("%s: %s", type(exc).__name__, exc)
        return code
    except np.linalg.LinAlgError as exc:
        print(json.dumps({"error": {"type": "NumericalError",
                                    "message": str(exc)}}, sort_keys=True))
        logger.error("linear algebra failure: %s", exc)
        return 4
    except Exception as exc:  # last resort: keep the contract machine-readable
        print(json.dumps({"error": {"type": "InternalError",
                                    "message": f"{type(exc).__name__}: {exc}"}},
                         sort_keys=True))
        logger.exception("unexpected failure")
        return 1


if __name__ == "__main__":
    sys.exit(main())
