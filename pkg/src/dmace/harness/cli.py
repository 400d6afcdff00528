"""Command line entry point: ``dmace <subcommand> ...``.

Results go to stdout as JSON. Failures print ``{"error": ..., "type": ...}``
to stderr and exit with status 1 (2 for usage errors, from argparse).
``DMACE_OUTPUT_DIR`` overrides the output directory of the scenario.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from dmace.channel_model import Dataset, generate_dataset
from dmace.dictionary import build_grid_dictionary
from dmace.dma_model import DmaConfig
from dmace.harness.config import ALGORITHMS, AXES, ExperimentConfig
from dmace.harness.pipeline import evaluate_model, prepare_point, stacked_observation, train_model
from dmace.harness.sweep import convergence_report, nmse_table, run_sweep
from dmace.metrics import mean_nmse, to_db
from dmace.theory_checks import theory_report
from dmace.unfolded_nets import ListaModel, estimate_channel, load_checkpoint, save_checkpoint

OUTPUT_ENV = "DMACE_OUTPUT_DIR"


def _config(args) -> ExperimentConfig:
    ec = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    over = {}
    if getattr(args, "seed", None) is not None:
        over["master_seed"] = args.seed
    if os.environ.get(OUTPUT_ENV):
        over["output_dir"] = os.environ[OUTPUT_ENV]
    if getattr(args, "output_dir", None):
        over["output_dir"] = args.output_dir
    return ec.with_overrides(**over) if over else ec


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True, default=float)
    sys.stdout.write("\n")


def cmd_generate_data(args) -> dict:
    ec = _config(args)
    cfg = ec.dma_config()
    grid = build_grid_dictionary(ec.k_phi, ec.k_theta, cfg)
    count = args.count or {"train": ec.n_train, "test": ec.n_test, "val": ec.n_val}[args.split]
    snr = "uniform" if args.snr is None else float(args.snr)
    seed = ec.sub_seed(f"data/{args.split}")
    out = Path(args.out or Path(ec.output_dir) / f"{args.split}.dmad")
    out.parent.mkdir(parents=True, exist_ok=True)
    generate_dataset(count, snr, cfg, seed, grid, path=out, workers=args.workers)
    return {"path": str(out), "count": count, "seed": seed, "snr": snr}


def cmd_train(args) -> dict:
    ec = _config(args)
    layers = args.layers or ec.layers
    data = prepare_point(ec)
    model, summary = train_model(ec, args.algorithm, data, layers)
    out = Path(args.out or Path(ec.output_dir) / f"{args.algorithm}-L{layers}.ckpt")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out, summary["seed"], {"algorithm": args.algorithm, "key": summary["key"]})
    log_path = out.with_suffix(".log.json")
    log_path.write_text(json.dumps(summary["log"], indent=1))
    report = {}
    for snr, ds in data.val.items():
        report[str(snr)] = to_db(evaluate_model(ec, model, data, ds, "val"))
    return {
        "checkpoint": str(out),
        "log": str(log_path),
        "best_epoch": summary["best_epoch"],
        "converged_epoch": summary["converged_epoch"],
        "val_nmse_db": report,
    }


def cmd_evaluate(args) -> dict:
    model, header = load_checkpoint(args.checkpoint)
    ds = Dataset.load(args.data)
    cfg: DmaConfig = model.cfg
    if isinstance(model, ListaModel):
        z = stacked_observation(ds, model.weights_list, cfg, np.random.default_rng(args.noise_seed))
        g_hat = estimate_channel(model, z)
    else:
        from dmace.dma_model import build_h, build_q
        from dmace.unfolded_nets import export_trained_dma

        q = build_q(export_trained_dma(model.params), cfg)
        g_hat = estimate_channel(model, q @ (build_h(cfg) @ ds.y))
    n = mean_nmse(g_hat, ds.g_star)
    return {"arch": header["arch"], "samples": len(ds), "nmse": n, "nmse_db": to_db(n)}


def cmd_sweep(args) -> dict:
    ec = _config(args)
    res = run_sweep(ec, args.axis, resume=not args.no_resume)
    return {
        "axis": res.axis,
        "values": res.values,
        "nmse_db": nmse_table(res),
        "csv": str(res.csv_path),
        "manifest": str(res.manifest_path),
        "errors": res.errors,
    }


def cmd_theory_check(args) -> dict:
    ec = _config(args)
    report = theory_report(ec.dma_config(), args.trials, ec.sub_seed("theory") if args.seed is None else args.seed)
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True))
    return report


def cmd_convergence_report(args) -> dict:
    raw = json.loads(Path(args.log).read_text())
    log = raw["log"] if isinstance(raw, dict) else raw
    out = args.out or str(Path(args.log).with_suffix(".curve.csv"))
    rep = convergence_report(log, args.window, out)
    rep.pop("csv")
    rep["curve_csv"] = out
    return rep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dmace", description="DMA channel estimation experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="scenario JSON file (defaults to the desk scenario)")
        sp.add_argument("--output-dir", help="overrides the scenario output directory")
        if seed:
            sp.add_argument("--seed", type=int, help="overrides the master seed")

    g = sub.add_parser("generate-data", help="write a dataset file")
    common(g)
    g.add_argument("--split", choices=["train", "test", "val"], default="train")
    g.add_argument("--snr", type=float, help="fixed SNR in dB (default: uniform training range)")
    g.add_argument("--count", type=int)
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate_data)

    t = sub.add_parser("train", help="train one model and save its checkpoint")
    common(t)
    t.add_argument("--algorithm", choices=[a for a in ALGORITHMS if a != "fista"], default="lista_smo")
    t.add_argument("--layers", type=int)
    t.add_argument("--out")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="NMSE of a checkpoint on a dataset file")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--noise-seed", type=int, default=0, help="noise for extra pilots of multi-pilot LISTA")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="NMSE sweep along one axis")
    common(s)
    s.add_argument("--axis", choices=AXES, required=True)
    s.add_argument("--no-resume", action="store_true", help="recompute finished points")
    s.set_defaults(func=cmd_sweep)

    th = sub.add_parser("theory-check", help="recovery-bound formulas next to Monte Carlo estimates")
    common(th)
    th.add_argument("--trials", type=int, default=2000)
    th.add_argument("--out")
    th.set_defaults(func=cmd_theory_check)

    c = sub.add_parser("convergence-report", help="convergence epoch and curve CSV from a training log")
    c.add_argument("--log", required=True, help="training log JSON (list of epochs or a summary with 'log')")
    c.add_argument("--window", type=int, default=10)
    c.add_argument("--out")
    c.set_defaults(func=cmd_convergence_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _emit(args.func(args))
    except Exception as exc:
        json.dump({"error": str(exc), "type": type(exc).__name__}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
