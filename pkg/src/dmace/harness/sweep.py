"""Parameter sweeps with resumable, byte-deterministic CSV output.

Each sweep point is keyed by a provenance hash of the scenario, the axis and
the axis value. Finished points are stored under ``points/`` and skipped on
rerun; trained models are cached under ``models/`` and shared across axes.
"""

from __future__ import annotations

import csv
import io
import json
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

from dmace import __version__
from dmace.dma_model import DmaConfig
from dmace.errors import ConfigError
from dmace.harness.config import AXES, ExperimentConfig, stable_hash
from dmace.harness.pipeline import (
    evaluate_fista,
    evaluate_model,
    prepare_point,
    train_model,
    tune_fista,
    zero_nmse,
)
from dmace.metrics import to_db
from dmace.unfolded_nets import converged_at

CSV_COLUMNS = ["axis_value", "algorithm", "nmse", "nmse_db", "runtime_s", "seed", "config_hash", "realization", "error"]
TRAINED = ("lista", "lista_smo", "lista_smo_ssl")


@dataclass
class SweepResult:
    axis: str
    values: list
    rows: list = field(default_factory=list)
    runtimes: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    config_hash: str = ""
    csv_path: Path | None = None
    manifest_path: Path | None = None

    def nmse_db(self, algorithm: str) -> dict:
        """axis value -> NMSE in dB for one algorithm (failed points omitted)."""
        return {r["axis_value"]: r["nmse_db"] for r in self.rows if r["algorithm"] == algorithm and r["error"] == ""}


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _row(value, algo, nmse, seed, chash, realization, runtime=None, error=""):
    return {
        "axis_value": value,
        "algorithm": algo,
        "nmse": nmse,
        "nmse_db": to_db(nmse) if nmse is not None and nmse > 0 else None,
        "runtime_s": runtime,
        "seed": seed,
        "config_hash": chash,
        "realization": realization,
        "error": error,
    }


def axis_points(ec: ExperimentConfig, axis: str) -> list[tuple]:
    """``(axis_value, point settings)`` pairs in sweep order."""
    base = ec.dma_config()
    if axis == "snr":
        return [(float(s), {}) for s in ec.snr_db]
    if axis == "layers":
        return [(int(l), {"layers": int(l)}) for l in ec.layer_values]
    if axis == "dict":
        return [(int(kt * kp), {"k_theta": int(kt), "k_phi": int(kp)}) for kt, kp in ec.dict_values]
    if axis == "compression":
        pts = []
        for p in ec.pilot_values:
            pts.append((base.n_e / (int(p) * base.n_d), {"pilots": int(p), "geometry": [base.n_d, base.n_e]}))
        for n_d, n_e in ec.geometry_overrides:
            pts.append((n_e / n_d, {"pilots": 1, "geometry": [int(n_d), int(n_e)]}))
        return pts
    raise ConfigError(f"unknown axis {axis!r}; choose from {list(AXES)}")


def _realization(axis, value, settings, ec: ExperimentConfig) -> str:
    if axis == "snr":
        return f"snr_db={value:g}"
    if axis == "layers":
        return f"L={value}"
    if axis == "dict":
        return f"K_theta={settings['k_theta']} K_phi={settings['k_phi']} D={value}"
    n_d, n_e = settings["geometry"]
    return f"P={settings['pilots']} N_d={n_d} N_e={n_e} gamma={value:g}"


def _algorithms(ec: ExperimentConfig, axis: str) -> list:
    algos = list(ec.algorithms)
    if axis == "layers":
        algos = [a for a in algos if a in TRAINED]
    if axis == "compression":
        # LISTA-SMO learns one DMA configuration, so it has no multi-pilot form
        algos = [a for a in algos if a in ("fista", "lista")]
    return algos


def run_point(ec: ExperimentConfig, axis: str, value, settings: dict, cache_dir) -> tuple[list, dict]:
    """Rows for one axis value (one per algorithm plus the zero baseline)."""
    chash = ec.config_hash()
    realization = _realization(axis, value, settings, ec)
    cfg = ec.dma_config()
    if "geometry" in settings:
        n_d, n_e = settings["geometry"]
        cfg = DmaConfig.from_dict({**cfg.to_dict(), "n_d": n_d, "n_e": n_e})
    snr = float(value) if axis == "snr" else float(ec.eval_snr_db)
    layers = settings.get("layers", ec.layers)
    data = prepare_point(ec, cfg, settings.get("k_theta"), settings.get("k_phi"), settings.get("pilots"), [snr])
    val = data.val[snr]
    rows = [_row(value, "zero", zero_nmse(val), ec.master_seed, chash, realization)]
    runtimes = {}
    for algo in _algorithms(ec, axis):
        t0 = time.perf_counter()
        try:
            if algo == "fista":
                eta, psi = tune_fista(ec, data)
                nmse = evaluate_fista(ec, data, val, "val", eta, psi)
                seed = ec.sub_seed("dma")
            else:
                model, summary = train_model(ec, algo, data, layers, cache_dir)
                nmse = evaluate_model(ec, model, data, val, "val")
                seed = summary["seed"]
            err = ""
        except Exception as exc:  # recorded per point; the sweep continues
            nmse, seed, err = None, ec.master_seed, f"{type(exc).__name__}: {exc}"
            traceback.print_exc()
        dt = time.perf_counter() - t0
        runtimes[algo] = dt
        rows.append(_row(value, algo, nmse, seed, chash, realization, dt if ec.record_runtime else None, err))
    return rows, runtimes


def _csv_text(rows: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in CSV_COLUMNS})
    return buf.getvalue()


def run_sweep(ec: ExperimentConfig, axis: str, out_dir=None, resume: bool = True) -> SweepResult:
    """Run every point of ``axis``; writes ``sweep_<axis>.csv`` and ``sweep_<axis>.json``."""
    points = axis_points(ec, axis)
    out = Path(out_dir or ec.output_dir)
    (out / "points").mkdir(parents=True, exist_ok=True)
    cache_dir = out / "models"
    chash = ec.config_hash()
    res = SweepResult(axis, [v for v, _ in points], config_hash=chash)
    for value, settings in points:
        key = stable_hash({"config": chash, "axis": axis, "value": value, "settings": settings})
        pfile = out / "points" / f"{axis}-{key}.json"
        if resume and pfile.exists():
            stored = json.loads(pfile.read_text())
            rows, runtimes = stored["rows"], stored["runtimes"]
        else:
            rows, runtimes = run_point(ec, axis, value, settings, cache_dir)
            if not any(r["error"] for r in rows):
                pfile.write_text(json.dumps({"rows": rows, "runtimes": runtimes}, sort_keys=True))
        res.rows.extend(rows)
        res.runtimes[str(value)] = runtimes
        res.errors.extend({"axis_value": value, "algorithm": r["algorithm"], "error": r["error"]} for r in rows if r["error"])
    res.csv_path = out / f"sweep_{axis}.csv"
    res.csv_path.write_text(_csv_text(res.rows))
    manifest = {
        "axis": axis,
        "values": res.values,
        "algorithms": sorted({r["algorithm"] for r in res.rows}),
        "config_hash": chash,
        "master_seed": ec.master_seed,
        "version": __version__,
        "runtime_s": res.runtimes,
        "errors": res.errors,
        "config": ec.to_dict(),
        "csv": res.csv_path.name,
    }
    res.manifest_path = out / f"sweep_{axis}.json"
    res.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return res


def convergence_report(log: list, window: int = 10, path=None) -> dict:
    """Epoch at which the trailing-window test NMSE stops descending, plus the curve as CSV.

    A log that never stops descending reports its last epoch (``converged``
    is then ``False``).
    """
    curve = [r["test_nmse"] for r in log]
    ep = converged_at(curve, window)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_nmse", "test_nmse", "train_nmse_db", "test_nmse_db"])
    for r in log:
        tr = r.get("train_nmse")
        w.writerow(
            [
                r["epoch"],
                _fmt(tr),
                _fmt(r["test_nmse"]),
                _fmt(to_db(tr)) if tr else "",
                _fmt(to_db(r["test_nmse"])) if r["test_nmse"] > 0 else "",
            ]
        )
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return {
        "converged_epoch": ep if ep is not None else (len(curve) if curve else 0),
        "converged": ep is not None,
        "epochs": len(curve),
        "window": window,
        "best_test_nmse_db": to_db(min(curve)) if curve else None,
        "csv": text,
    }


def nmse_table(res: SweepResult) -> dict:
    """algorithm -> list of dB values in axis order (NaN for failed points)."""
    out = {}
    for algo in sorted({r["algorithm"] for r in res.rows}):
        d = res.nmse_db(algo)
        out[algo] = [d.get(v, float("nan")) for v in res.values]
    return out


__all__ = ["CSV_COLUMNS", "SweepResult", "axis_points", "convergence_report", "nmse_table", "run_point", "run_sweep"]
