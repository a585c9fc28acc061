"""Batch front-end: load a model/signal configuration, run the requested
analyses, and emit machine-readable reports.

Subcommands mirror the analyses: ``analyze`` runs the config's analysis
list, ``sweep`` repeats the signal comparison across parameter values,
``certify`` and ``blackwell`` are focused single-analysis runs.  All
randomness flows from the single config seed through fixed per-analysis
tags, so a bundle is reproducible byte-for-byte and the report of one
analysis does not depend on which others were requested.

Exit codes: 0 on success, 2 for configuration errors, 3 when an analysis
fails at runtime.  A certificate legitimately reporting FAIL or
NoCertificate is data, not an error, and exits 0.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .decision_core import (
    DecisionModel,
    FiniteFeasible,
    SolverConfig,
    optimize_first,
    payoff_set,
    precautionary_compare,
    second_stage_value,
)
from .errors import ConfigError, NoCertificate, PrecautionError
from .model_zoo import FamilySpec, build_model, foc_certificate
from .prob import (
    Dist,
    Garbling,
    JointSignalModel,
    StateSpace,
    blackwell_sample_test,
    full_info,
    garble,
    load_joint_model,
    no_info,
)
from .support_geometry import convexity_probe, decomposition_certificate

ANALYSES = ("optimize", "compare", "certify", "probe", "blackwell", "foc")
_SEED_TAGS = {"optimize": 11, "compare": 12, "certify": 13, "probe": 14, "blackwell": 15, "foc": 16, "sweep": 17}
_RANDOMIZED = {"certify", "probe", "blackwell"}


@dataclass
class ExperimentConfig:
    """A validated experiment description."""

    doc: dict
    model_doc: dict
    spec: FamilySpec | None
    model: DecisionModel
    sig_fine: JointSignalModel
    sig_coarse: JointSignalModel
    solver: SolverConfig
    analyses: list[str]
    seed: int | None
    output: Path | None
    options: dict = field(default_factory=dict)


@dataclass
class ReportBundle:
    """Per-analysis reports plus a manifest; knows how to write itself."""

    reports: dict
    statuses: dict
    manifest: dict
    csv_tables: dict = field(default_factory=dict)

    @property
    def errored(self) -> bool:
        return any(s != "ok" for s in self.statuses.values())

    def write(self, outdir: Path) -> None:
        outdir.mkdir(parents=True, exist_ok=True)
        for name, report in self.reports.items():
            _atomic_write(outdir / f"{name}.json", _json_bytes(report))
        for name, rows in self.csv_tables.items():
            _atomic_write(outdir / f"{name}.csv", _csv_bytes(rows))
        _atomic_write(outdir / "manifest.json", _json_bytes(self.manifest))
        _atomic_write(outdir / "summary.txt", self.summary().encode("utf-8"))

    def summary(self) -> str:
        lines = [f"precaution {self.manifest['version']}  config {self.manifest['config_hash'][:12]}"]
        for name, status in self.statuses.items():
            lines.append(f"{name}: {status}")
        return "\n".join(lines) + "\n"


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _json_bytes(doc) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n").encode("utf-8")


def _csv_bytes(rows: list[list]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue().encode("utf-8")


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _analysis_seed(seed: int, analysis: str) -> int:
    return int(np.random.SeedSequence((seed, _SEED_TAGS[analysis])).generate_state(1)[0])


# ---------------------------------------------------------------------------
# configuration parsing
# ---------------------------------------------------------------------------


def _build_table_model(doc: dict) -> DecisionModel:
    try:
        states = StateSpace(np.asarray(doc["states"], dtype=float))
        a_values = np.asarray(doc["a_values"], dtype=float)
        menu = np.asarray(doc["b_points"], dtype=float)
        tensor = np.asarray(doc["utilities"], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"missing table field {exc}", "/model/table") from exc
    if menu.ndim == 1:
        menu = menu[:, None]
    if np.any(np.diff(a_values) <= 0):
        raise ConfigError("a_values must be strictly increasing", "/model/table/a_values")
    if tensor.shape != (a_values.size, menu.shape[0], states.m):
        raise ConfigError(
            f"utilities shape {tensor.shape} != (len(a_values), len(b_points), m)",
            "/model/table/utilities",
        )
    n = menu.shape[1]
    feas = FiniteFeasible(menu)

    def utility(a, b, x):
        t = np.clip(np.searchsorted(a_values, a) - 1, 0, max(a_values.size - 2, 0))
        if a_values.size == 1:
            slab = tensor[0]
        else:
            span = a_values[t + 1] - a_values[t]
            w = 0.0 if span == 0 else float(np.clip((a - a_values[t]) / span, 0.0, 1.0))
            slab = (1.0 - w) * tensor[t] + w * tensor[t + 1]
        b_arr = np.asarray(b, dtype=float)
        flat = b_arr.reshape(-1, n)
        idx = np.argmin(np.max(np.abs(flat[:, None, :] - menu[None, :, :]), axis=2), axis=1)
        x_arr = np.asarray(x, dtype=float)
        xi = np.clip(np.searchsorted(states.values, x_arr.reshape(-1)), 0, states.m - 1)
        out = slab[idx][:, xi]
        shape = np.broadcast_shapes(b_arr.shape[:-1], x_arr.shape)
        return out.reshape(shape)

    return DecisionModel(
        utility=utility,
        first_interval=(float(a_values[0]), float(a_values[-1])),
        second_feasible=lambda a: feas,
        b_dim=n,
        states=states,
    )


def _parse_signal(doc: dict, states_hint: StateSpace | None, base_dir: Path) -> JointSignalModel:
    if "path" in doc:
        return load_joint_model(base_dir / doc["path"])
    if "kind" in doc:
        kind = doc["kind"]
        states = StateSpace(np.asarray(doc["states"], dtype=float)) if "states" in doc else states_hint
        if states is None:
            raise ConfigError("signal needs explicit states", "/signal/states")
        prior = Dist(np.asarray(doc["prior"], dtype=float))
        if kind == "full_info":
            return full_info(prior, states)
        if kind == "no_info":
            return no_info(full_info(prior, states))
        raise ConfigError(f"unknown signal kind {kind!r}", "/signal/kind")
    return load_joint_model(doc)


def parse_config(doc: dict, base_dir: Path | str = ".") -> ExperimentConfig:
    """Validate a configuration document; errors carry a JSON-pointer path."""
    base_dir = Path(base_dir)
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object", "")
    model_doc = doc.get("model")
    if not isinstance(model_doc, dict):
        raise ConfigError("missing model description", "/model")

    spec = None
    if "family" in model_doc:
        try:
            spec = FamilySpec.from_dict(model_doc)
            model = build_model(spec)
        except (PrecautionError, KeyError, ValueError) as exc:
            raise ConfigError(str(exc), "/model") from exc
    elif "table" in model_doc:
        model = _build_table_model(model_doc["table"])
    else:
        raise ConfigError('model must carry "family" or "table"', "/model")

    if "signal" not in doc:
        raise ConfigError("missing signal description", "/signal")
    try:
        sig_fine = _parse_signal(doc["signal"], model.states, base_dir)
    except (PrecautionError, ValueError, OSError) as exc:
        raise ConfigError(str(exc), "/signal") from exc
    if sig_fine.states != model.states:
        raise ConfigError("signal states differ from model states", "/signal/states")

    if doc.get("garbling") is not None:
        try:
            sig_coarse = garble(sig_fine, Garbling(tuple(doc["garbling"])))
        except (PrecautionError, ValueError) as exc:
            raise ConfigError(str(exc), "/garbling") from exc
    else:
        sig_coarse = no_info(sig_fine)

    solver_doc = doc.get("solver", {})
    try:
        solver = SolverConfig(**solver_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "/solver") from exc

    analyses = doc.get("analyses", [])
    if not isinstance(analyses, list):
        raise ConfigError("analyses must be a list", "/analyses")
    for i, name in enumerate(analyses):
        if name not in ANALYSES:
            raise ConfigError(f"unknown analysis {name!r}", f"/analyses/{i}")
    seed = doc.get("seed")
    if seed is None and any(a in _RANDOMIZED for a in analyses):
        raise ConfigError("a seed is required when a randomized analysis is requested", "/seed")
    if "foc" in analyses and spec is None:
        raise ConfigError("the foc analysis needs a family model", "/analyses")

    options = {
        "probe_trials": int(doc.get("probe_trials", 1000)),
        "certify_samples": int(doc.get("certify_samples", 2000)),
        "blackwell_trials": int(doc.get("blackwell_trials", 200)),
        "blackwell_pieces": int(doc.get("blackwell_pieces", 5)),
        "points": dict(doc.get("points", {})),
    }
    output = Path(doc["output"]) if "output" in doc else None
    return ExperimentConfig(
        doc=doc,
        model_doc=model_doc,
        spec=spec,
        model=model,
        sig_fine=sig_fine,
        sig_coarse=sig_coarse,
        solver=solver,
        analyses=list(analyses),
        seed=seed,
        output=output,
        options=options,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration: {exc}", "") from exc
    return parse_config(doc, base_dir=path.parent)


# ---------------------------------------------------------------------------
# analyses
# ---------------------------------------------------------------------------


def _default_points(cfg: ExperimentConfig) -> tuple[float, float, np.ndarray]:
    pts = cfg.options["points"]
    lo, hi = cfg.model.first_interval
    a0 = float(pts.get("a0", lo))
    a1 = float(pts.get("a1", hi))
    if "b1" in pts:
        b1 = np.atleast_1d(np.asarray(pts["b1"], dtype=float))
    else:
        feas = cfg.model.second_feasible(a1)
        if isinstance(feas, FiniteFeasible):
            b1 = feas.points[len(feas.points) // 2]
        else:
            b1 = (feas.lows + feas.highs) / 2.0
    return a1, a0, b1


def _run_optimize(cfg: ExperimentConfig, seed: int | None) -> dict:
    fine = optimize_first(cfg.model, cfg.sig_fine, cfg.solver)
    coarse = optimize_first(cfg.model, cfg.sig_coarse, cfg.solver)
    return {"fine": fine.as_dict(), "coarse": coarse.as_dict()}


def _run_compare(cfg: ExperimentConfig, seed: int | None) -> tuple[dict, list[list]]:
    report = precautionary_compare(cfg.model, cfg.sig_fine, cfg.sig_coarse, cfg.solver)
    rows: list[list] = [["a", "V_Y", "V_Y2", "delta"]]
    rows.extend([list(r) for r in report.grid_rows()])
    return report.as_dict(), rows


def _run_certify(cfg: ExperimentConfig, seed: int) -> dict:
    a1, a0, _ = _default_points(cfg)
    set1 = payoff_set(cfg.model, a1, cfg.solver)
    set0 = payoff_set(cfg.model, a0, cfg.solver)
    report = decomposition_certificate(set1, set0, cfg.options["certify_samples"], seed)
    return {"a1": a1, "a0": a0, **report.as_dict()}


def _run_probe(cfg: ExperimentConfig, seed: int) -> dict:
    a1, a0, _ = _default_points(cfg)
    model, solver = cfg.model, cfg.solver

    if a1 == a0:
        f = lambda rho: second_stage_value(model, a1, rho, solver)
        target = "value"
    else:
        f = lambda rho: second_stage_value(model, a1, rho, solver) - second_stage_value(model, a0, rho, solver)
        target = "difference"
    verdict = convexity_probe(f, model.states.m, cfg.options["probe_trials"], seed)
    return {"a1": a1, "a0": a0, "target": target, **verdict.as_dict()}


def _run_blackwell(cfg: ExperimentConfig, seed: int) -> dict:
    report = blackwell_sample_test(
        cfg.sig_fine,
        cfg.sig_coarse,
        cfg.options["blackwell_trials"],
        cfg.options["blackwell_pieces"],
        seed,
    )
    return report.as_dict()


def _run_foc(cfg: ExperimentConfig, seed: int | None) -> dict:
    a1, a0, b1 = _default_points(cfg)
    if a1 <= a0:
        raise ConfigError("the foc analysis needs points with a1 > a0", "/points")
    xs = cfg.model.states.values
    x_grid = np.linspace(float(xs[0]), float(xs[-1]), 101)
    try:
        cert = foc_certificate(cfg.spec, a1, a0, b1, x_grid)
    except NoCertificate as exc:
        return {"a1": a1, "a0": a0, "b1": b1.tolist(), "no_certificate": str(exc)}
    return {"a1": a1, "a0": a0, "b1": b1.tolist(), **cert.as_dict()}


_RUNNERS = {
    "optimize": _run_optimize,
    "compare": _run_compare,
    "certify": _run_certify,
    "probe": _run_probe,
    "blackwell": _run_blackwell,
    "foc": _run_foc,
}


def _config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()


def run(cfg: ExperimentConfig) -> ReportBundle:
    """Execute the configured analyses in declared order.

    Per-analysis failures are recorded without aborting the bundle; the
    bundle is marked errored so the CLI can exit nonzero.
    """
    reports: dict = {}
    statuses: dict = {}
    tables: dict = {}
    for name in cfg.analyses:
        seed = _analysis_seed(cfg.seed, name) if cfg.seed is not None else None
        try:
            result = _RUNNERS[name](cfg, seed)
            if name == "compare":
                result, rows = result
                tables["grid"] = rows
            reports[name] = result
            statuses[name] = "ok"
        except PrecautionError as exc:
            statuses[name] = f"error: {exc}"
        except Exception as exc:  # noqa: BLE001 - recorded, not silenced
            statuses[name] = f"error: {type(exc).__name__}: {exc}"
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "config_hash": _config_hash(cfg.doc),
        "analyses": cfg.analyses,
        "statuses": statuses,
    }
    bundle = ReportBundle(reports=reports, statuses=statuses, manifest=manifest, csv_tables=tables)
    if cfg.output is not None:
        bundle.write(cfg.output)
    return bundle


def _resolve_parameter(model_doc: dict, parameter: str) -> tuple[dict, str]:
    """Locate the dict holding ``parameter`` inside a family model document."""
    doc = model_doc
    parts = parameter.split(".")
    if parts[0] in ("params", "functions"):
        for part in parts[:-1]:
            if part not in doc:
                raise ConfigError(f"parameter path {parameter!r} not found", "/model")
            doc = doc[part]
        return doc, parts[-1]
    params = doc.get("params", {})
    if parameter in params:
        return params, parameter
    raise ConfigError(f"parameter {parameter!r} not found in model params", "/model/params")


def sweep(cfg: ExperimentConfig, parameter: str, values: list[float]) -> ReportBundle:
    """One signal comparison per parameter value, aggregated into a table.

    Rows that violate a domain guard are recorded and the remaining values
    still complete.
    """
    if cfg.spec is None:
        raise ConfigError("sweep needs a family model", "/model")
    rows: list[list] = [["value", "a_star_fine_sup", "a_star_coarse_sup", "delta_verdict", "ranking_holds"]]
    results = []
    statuses: dict = {}
    for value in values:
        key = f"{parameter}={value!r}"
        new_doc = json.loads(json.dumps(cfg.doc))
        try:
            holder, leaf = _resolve_parameter(new_doc["model"], parameter)
            holder[leaf] = value
            sub = parse_config(new_doc, base_dir=".")
            report = precautionary_compare(sub.model, sub.sig_fine, sub.sig_coarse, sub.solver)
            doc = report.as_dict()
            results.append({"value": value, "report": doc})
            rows.append(
                [
                    float(value),
                    doc["a_star_fine"]["maximizers"][-1],
                    doc["a_star_coarse"]["maximizers"][-1],
                    doc["delta_scan"]["kind"],
                    doc["ranking_holds"],
                ]
            )
            statuses[key] = "ok"
        except PrecautionError as exc:
            statuses[key] = f"error: {exc}"
            results.append({"value": value, "error": str(exc)})
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "config_hash": _config_hash(cfg.doc),
        "parameter": parameter,
        "values": list(values),
        "statuses": statuses,
    }
    bundle = ReportBundle(
        reports={"sweep": {"parameter": parameter, "results": results}},
        statuses=statuses if statuses else {"sweep": "ok"},
        manifest=manifest,
        csv_tables={"sweep": rows},
    )
    if cfg.output is not None:
        bundle.write(cfg.output)
    return bundle


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def _apply_overrides(cfg_doc: dict, args) -> dict:
    doc = json.loads(json.dumps(cfg_doc))
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["output"] = args.out
    solver = doc.setdefault("solver", {})
    if args.a_grid is not None:
        solver["a_grid"] = args.a_grid
    if args.b_grid is not None:
        solver["b_grid"] = args.b_grid
    return doc


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to a JSON experiment configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory for reports")
    parser.add_argument("--a-grid", type=int, default=None, help="override the first-decision grid size")
    parser.add_argument("--b-grid", type=int, default=None, help="override the second-decision grid size")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="precaution", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("analyze", "certify", "blackwell"):
        p = sub.add_parser(name)
        _add_common(p)
    p_sweep = sub.add_parser("sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", required=True, help="model parameter to sweep")
    p_sweep.add_argument("--values", required=True, help="comma-separated parameter values")
    args = parser.parse_args(argv)

    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        doc = _apply_overrides(raw, args)
        if args.command == "certify":
            doc["analyses"] = ["certify"]
        elif args.command == "blackwell":
            doc["analyses"] = ["blackwell"]
        cfg = parse_config(doc, base_dir=Path(args.config).parent)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            bundle = sweep(cfg, args.param, values)
        else:
            bundle = run(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3

    sys.stdout.write(bundle.summary())
    return 3 if bundle.errored else 0


if __name__ == "__main__":
    raise SystemExit(main())
