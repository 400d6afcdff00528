"""Acceptance gate: one test per criterion, each also printing a PASS/FAIL line."""

import math
import sys
import time

import numpy as np
import pytest

import conftest
from dmace.channel_model import Dataset, PathSet, generate_dataset, sample_paths
from dmace.classic_solvers import LassoProblem, coordinate_descent_oracle, fista, ista, kkt_residual, smooth_objective, step_size
from dmace.dictionary import build_grid_dictionary
from dmace.dma_model import DmaConfig
from dmace.harness import ExperimentConfig, prepare_point, run_sweep, untrained_nmse
from dmace.numerics import Tape
from dmace.theory_checks import (
    delta_rho_formula,
    empirical_gridding_loss,
    erf,
    expected_gridding_loss,
    p_rec_formula,
    theory_report,
)
from dmace.unfolded_nets import (
    Batch,
    ListaModel,
    ListaParams,
    ListaSmoModel,
    TrainConfig,
    fit_scale,
    lista_forward,
    load_checkpoint,
    save_checkpoint,
    train,
)
from oracles import crandn, erf_quadrature, fd_gradient, max_rel_err


def verdict(num, name, ok, detail):
    conftest.VERDICTS.append((num, name, bool(ok), detail))
    print(f"[{'PASS' if ok else 'FAIL'}] {num}. {name}: {detail}", file=sys.stderr)
    assert ok, detail


# ----- desk-scale sweeps shared by criteria 4 to 6 -----------------------------


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    ec = ExperimentConfig(
        algorithms=["fista", "lista", "lista_smo", "lista_smo_ssl"],
        layer_values=[1, 8],
        output_dir=str(out),
    )
    runs, times = {}, {}
    plan = [
        ("snr", ec),
        ("layers", ec.with_overrides(algorithms=["lista", "lista_smo"])),
        ("compression", ec),
        ("dict", ec.with_overrides(algorithms=["fista", "lista", "lista_smo"])),
    ]
    for axis, cfg in plan:
        t0 = time.process_time()
        runs[axis] = run_sweep(cfg, axis)
        times[axis] = time.process_time() - t0
    return ec, runs, times


# ----- 1 ----------------------------------------------------------------------


def _lasso_instance(seed):
    rng = np.random.default_rng(seed)
    psi = crandn(rng, 8, 20) / np.sqrt(8)
    alpha = np.zeros(20, dtype=complex)
    alpha[rng.choice(20, 2, replace=False)] = crandn(rng, 2)
    return psi, psi @ alpha + 0.01 * crandn(rng, 8)


def test_c1_oracle_equivalence():
    t0 = time.process_time()
    worst_obj = worst_kkt = worst_plain = 0.0
    for seed in range(20):
        psi, z = _lasso_instance(seed)
        p = LassoProblem(psi, z)
        lam = step_size(psi)
        xi_s = 0.1 * np.abs(psi.conj().T @ z).max()
        eta = xi_s / lam
        ref = coordinate_descent_oracle(p, xi_s)
        f_ref = smooth_objective(psi, z, ref, xi_s)
        a_i, _ = ista(p, eta, 2000)
        a_f, _ = fista(p, eta, 300, restart=True)
        a_p, _ = fista(p, eta, 300)
        for a in (a_i, a_f):
            worst_obj = max(worst_obj, abs(smooth_objective(psi, z, a, xi_s) - f_ref))
        worst_kkt = max(worst_kkt, *(kkt_residual(psi, z, a, xi_s) for a in (ref, a_i, a_f)))
        worst_plain = max(worst_plain, kkt_residual(psi, z, a_p, xi_s))
    dt = time.process_time() - t0
    ok = worst_obj <= 1e-6 and worst_kkt <= 1e-5 and dt < 30
    verdict(
        1,
        "oracle equivalence",
        ok,
        f"max objective gap {worst_obj:.1e}, max KKT {worst_kkt:.1e} (plain FISTA KKT {worst_plain:.1e}), {dt:.1f}s",
    )


# ----- 2 ----------------------------------------------------------------------


def test_c2_ista_lista_equivalence():
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        psi = crandn(rng, 8, 20)
        z = crandn(rng, 8)
        eta = 0.05 * np.abs(psi.conj().T @ z).max() / step_size(psi)
        _, layers = lista_forward(ListaParams.analytic(psi, 30, eta), z, trace=True)
        _, _, its = ista(LassoProblem(psi, z), eta, 30, return_iterates=True)
        worst = max(worst, max(np.abs(a[:, 0] - b).max() for a, b in zip(layers, its)))
    verdict(2, "ISTA-LISTA equivalence", worst <= 1e-12, f"max layer deviation {worst:.1e} over 10 seeds x 30 layers")


# ----- 3 ----------------------------------------------------------------------


def _grad_error(model, batch):
    t = Tape()
    loss, _ = model.batch_loss(t, batch)
    grads = t.backward(loss)
    base = model.params.as_dict()
    kind = type(model.params)

    def f(params):
        model.params = kind.from_dict(params)
        return float(model.batch_loss(Tape(), batch)[0].value)

    fd = fd_gradient(f, base, 1e-5)
    fd_fine = fd_gradient(f, base, 2e-6)
    model.params = kind.from_dict(base)
    # a kink within the stencil shows up as disagreement between step sizes
    near_kink = max_rel_err(fd, fd_fine) > 1e-4
    return max_rel_err(grads, fd), near_kink


def test_c3_gradient_suite():
    t0 = time.process_time()
    cfg = DmaConfig(n_d=2, n_e=4)
    grid = build_grid_dictionary(3, 4, cfg)
    worst = {"lista": 0.0, "lista_smo": 0.0}
    rng = np.random.default_rng(7)
    for name in worst:
        done = 0
        while done < 10:
            if name == "lista":
                m = ListaModel.create(cfg, grid, 2, rng)
                b = Batch(crandn(rng, 2, 3), crandn(rng, 12, 3), np.ones((8, 3)))
            else:
                m = ListaSmoModel.create(cfg, grid.d, 2, rng)
                m.params.kappa[:] = rng.uniform(0.5, 1.5, 2)
                b = Batch(crandn(rng, 8, 3), crandn(rng, 8, 3), np.ones((8, 3)))
            m.params.eta[:] = rng.uniform(0.02, 0.2, 2)
            err, near_kink = _grad_error(m, b)
            if near_kink:
                continue
            worst[name] = max(worst[name], err)
            done += 1
    dt = time.process_time() - t0
    ok = max(worst.values()) < 1e-5 and dt < 60
    verdict(
        3,
        "gradient suite",
        ok,
        f"max relative error LISTA {worst['lista']:.1e}, LISTA-SMO {worst['lista_smo']:.1e}, {dt:.1f}s",
    )


# ----- 4 to 6 -----------------------------------------------------------------


@pytest.mark.slow
def test_c4_trend_ordering(desk):
    _, runs, times = desk
    r = runs["snr"]
    smo, lista, fi = (r.nmse_db(a)[12.0] for a in ("lista_smo", "lista", "fista"))
    tie = 0.3
    ok = smo <= lista + tie and lista <= fi + tie and times["snr"] < 900
    verdict(
        4,
        "trend ordering at 12 dB",
        ok,
        f"LISTA-SMO {smo:.2f} dB, LISTA {lista:.2f} dB, FISTA {fi:.2f} dB (SNR sweep {times['snr']:.0f}s CPU)",
    )


@pytest.mark.slow
def test_c5_self_supervised_gap(desk):
    ec, runs, _ = desk
    r = runs["snr"]
    sup, ssl = r.nmse_db("lista_smo")[12.0], r.nmse_db("lista_smo_ssl")[12.0]
    data = prepare_point(ec, snrs=[12.0])
    init = 10 * math.log10(untrained_nmse(ec, "lista_smo_ssl", data, data.val[12.0], ec.layers, "val"))
    ok = abs(ssl - sup) <= 3.0 and ssl < init
    verdict(5, "self-supervised gap", ok, f"self-supervised {ssl:.2f} dB, supervised {sup:.2f} dB, untrained {init:.2f} dB")


def _non_increasing(vals, slack):
    return all(b <= a + slack for a, b in zip(vals, vals[1:]))


@pytest.mark.slow
def test_c6_monotonicity(desk):
    _, runs, _ = desk
    checks, notes = [], []
    snr = runs["snr"]
    for algo in ("fista", "lista", "lista_smo", "lista_smo_ssl"):
        v = [snr.nmse_db(algo)[s] for s in snr.values]
        checks.append(_non_increasing(v, 0.5))
    notes.append("SNR " + ("ok" if all(checks) else "violated"))
    lay = runs["layers"]
    lay_ok = all(lay.nmse_db(a)[8] <= lay.nmse_db(a)[1] for a in ("lista", "lista_smo"))
    checks.append(lay_ok)
    notes.append(
        "L=8 vs L=1 " + ", ".join(f"{a} {lay.nmse_db(a)[8]:.2f}/{lay.nmse_db(a)[1]:.2f}" for a in ("lista", "lista_smo"))
    )
    comp = runs["compression"]
    gammas = sorted(comp.values)
    for algo in ("fista", "lista"):
        v = [comp.nmse_db(algo)[g] for g in gammas]
        checks.append(all(b >= a for a, b in zip(v, v[1:])))
    notes.append("gamma " + ", ".join(f"{a} {[round(comp.nmse_db(a)[g], 2) for g in gammas]}" for a in ("fista", "lista")))
    dic = runs["dict"]
    for algo in ("fista", "lista", "lista_smo"):
        d = dic.nmse_db(algo)
        checks.append(abs(d[64] - d[100]) <= abs(d[16] - d[36]))
        notes.append(f"{algo} |64-100| {abs(d[64] - d[100]):.2f} vs |16-36| {abs(d[16] - d[36]):.2f}")
    verdict(6, "monotonicity sweeps", all(checks), "; ".join(notes))


# ----- 7 ----------------------------------------------------------------------


def test_c7_recovery_probability_machinery():
    t0 = time.process_time()
    erf_err = max(abs(erf(x) - erf_quadrature(x, 20000)) for x in np.linspace(-4, 4, 33))
    mono = True
    for lp in range(1, 9):
        v = [p_rec_formula(ne, lp) for ne in range(1, 41)]
        mono &= all(b <= a for a, b in zip(v, v[1:]))
    for ne in range(1, 41):
        v = [p_rec_formula(ne, lp) for lp in range(1, 9)]
        mono &= all(b <= a for a, b in zip(v, v[1:]))
    tail = p_rec_formula(400, 1)
    rep = theory_report(DmaConfig(), trials=2000, seed=0)
    rip, se = rep["rip"], rep["strip_energy"]
    has_se = all(k in rip for k in ("delta_mean", "delta_se", "s_max_mean", "s_max_se"))
    dt = time.process_time() - t0
    ok = erf_err <= 1e-12 and mono and tail < 1e-6 and has_se and dt < 60
    verdict(
        7,
        "recovery-probability machinery",
        ok,
        f"erf error {erf_err:.1e}, monotone {mono}, p_rec(400,1) {tail:.1e}; "
        f"delta {rip['delta_mean']:.3f}+-{rip['delta_se']:.3f}, s_max {rip['s_max_mean']:.3f}+-{rip['s_max_se']:.3f}, "
        f"KS {se['ks_variance_reading']:.3f}/{se['ks_std_reading']:.3f}, {dt:.1f}s",
    )


# ----- 8 ----------------------------------------------------------------------


def test_c8_gridding_loss_machinery():
    cfg = DmaConfig(n_d=4, n_e=4)
    rng = np.random.default_rng(8)
    g = build_grid_dictionary(5, 5, cfg)
    on_grid = PathSet([1.0, 0.5], g.theta[[3, 11]], g.phi[[3, 11]], [20.0, 40.0])
    zero = delta_rho_formula(on_grid, 0.4, 0.2, g, cfg)
    worst_z, negatives = 0.0, 0
    for s in range(20):
        p = sample_paths(rng)
        paths = PathSet(rng.uniform(0.3, 1.5, p.count), p.theta, p.phi, p.dist)
        grid = build_grid_dictionary(int(rng.integers(3, 9)), int(rng.integers(3, 9)), cfg)
        xi, sigma = rng.uniform(0.2, 1.0), rng.uniform(0.1, 0.5)
        negatives += delta_rho_formula(paths, xi, sigma, grid, cfg) < 0
        est = empirical_gridding_loss(paths, xi, sigma, grid, cfg, 10000, rng)
        want = expected_gridding_loss(paths, xi, sigma, grid, cfg)
        worst_z = max(worst_z, abs(est.mean - want) / est.se)
    ok = zero == 0.0 and negatives == 0 and worst_z <= 3.0
    verdict(8, "gridding-loss machinery", ok, f"on-grid loss {zero}, negative values {negatives}, worst |z| {worst_z:.2f} over 20 scenarios")


# ----- 9 ----------------------------------------------------------------------


def test_c9_determinism_and_persistence(tmp_path):
    cfg = DmaConfig(n_d=2, n_e=4)
    grid = build_grid_dictionary(3, 3, cfg)
    checks = {}
    generate_dataset(50, "uniform", cfg, 3, grid, path=tmp_path / "a.dmad")
    generate_dataset(50, "uniform", cfg, 3, grid, path=tmp_path / "b.dmad")
    checks["dataset bytes"] = (tmp_path / "a.dmad").read_bytes() == (tmp_path / "b.dmad").read_bytes()
    ds = generate_dataset(50, "uniform", cfg, 3, grid)
    back = Dataset.load(tmp_path / "a.dmad")
    checks["dataset round trip"] = all(np.array_equal(getattr(ds, k), getattr(back, k)) for k in ("y", "g_star", "alpha_star", "sigma"))

    def trained(path):
        m = ListaSmoModel.create(cfg, grid.d, 2, np.random.default_rng(4), fit_scale(ds))
        train(m, m.make_batch(ds), m.make_batch(ds), TrainConfig(batch_size=10, lr=1e-2, max_epochs=3, window=2, seed=4))
        save_checkpoint(m, path, seed=4)
        return m

    m = trained(tmp_path / "a.ckpt")
    trained(tmp_path / "b.ckpt")
    checks["checkpoint bytes"] = (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
    m2, _ = load_checkpoint(tmp_path / "a.ckpt")
    checks["checkpoint round trip"] = all(np.array_equal(v, getattr(m2.params, k)) for k, v in m.params.as_dict().items())

    ec = ExperimentConfig(
        dma=cfg.to_dict(), n_train=64, n_test=16, n_val=32, k_theta=3, k_phi=3, layers=2, snr_db=[0.0, 12.0],
        max_epochs=3, window=2, batch_size=16, fista_iters=20, fista_etas=[1e-2, 0.1],
    )
    a = run_sweep(ec, "snr", tmp_path / "s1").csv_path.read_bytes()
    b = run_sweep(ec, "snr", tmp_path / "s2").csv_path.read_bytes()
    checks["sweep CSV bytes"] = a == b
    failed = [k for k, v in checks.items() if not v]
    verdict(9, "determinism and persistence", not failed, "all identical" if not failed else f"failed: {failed}")
