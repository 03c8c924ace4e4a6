"""Acceptance gate: one test per criterion, one printed line per criterion.

Monte Carlo sizes follow the stated settings; GDFPCA_ACCEPT_REPS can scale
replicate counts down for smoke runs (the official gate runs unscaled).

Criteria 1 and 3 compare against published benchmark values.  With the
substituted pre-smoother this implementation reconstructs the baseline
panels better than the published table (see the oracle analysis in the
project notes): the case-2 column and the WDFPCA baseline value land inside
their bands, the SFPCA/DFPCA/GDFPCA baseline values come out well below
them.  Those assertions are kept as stated rather than widened.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from gdfpca.cli import bench_replicate, main
from gdfpca.funcdata import FreqGrid, MFTSObservations, TimeGrid, presmooth_panel
from gdfpca.graphical import default_lambda_grid, joint_glasso, partial_spectrum
from gdfpca.scores import ScoreArray
from gdfpca.simulate import (
    SimConfig,
    basis_curve,
    generate,
    lag_weights,
    true_pooled_kernel,
    true_sorted_eigensystem,
)
from gdfpca.spectral import (
    SpectralConfig,
    default_bandwidth,
    dynamic_filter_bank,
    estimate_eigensystem,
    _kernel_stack,
    pooled_autocov,
)

SCALE = float(os.environ.get("GDFPCA_ACCEPT_REPS", "1.0"))


def _reps(n: int) -> int:
    return max(2, int(round(n * SCALE)))


def _report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


def _mc_means(p, J, kappa, case, methods, reps, seed=0):
    """Mean NMSE(4) per method over replicate seed streams."""
    acc = {m: [] for m in methods}
    for rep in range(reps):
        rows = bench_replicate((p, J, kappa, case, tuple(methods), (4,),
                                seed, rep))
        for m, _, v in rows:
            acc[m].append(v)
    return {m: float(np.mean(v)) for m, v in acc.items()}


# ------------------------------------------------------------- criterion 1

@pytest.fixture(scope="module")
def table2_baseline():
    reps = _reps(100)
    return _mc_means(30, 40, 0.0, "baseline",
                     ("GDFPCA", "WDFPCA", "DFPCA", "SFPCA"), reps), reps


@pytest.mark.parametrize("method,target", [
    ("GDFPCA", 9.75), ("WDFPCA", 12.11), ("DFPCA", 26.29), ("SFPCA", 26.06),
])
def test_criterion_1_table2_values(table2_baseline, method, target):
    means, reps = table2_baseline
    value = means[method]
    ok = abs(value - target) <= 3.0
    _report("criterion 1 (Table 2, p=30 J=40 k=0, "
            f"{reps} reps)", ok,
            f"{method} mean NMSE(4) = {value:.2f}, published {target} +- 3.0")
    assert ok, f"{method}: {value:.2f} vs {target} +- 3.0"


# ------------------------------------------------------------- criterion 2

def test_criterion_2_orderings():
    reps = _reps(20)
    methods = ("GDFPCA", "WDFPCA", "SFPCA", "KG_DFPCA")
    all_ok = True
    details = []
    for J in (20, 40):
        for kappa in (0.0, 3.0, 6.0):
            means = _mc_means(30, J, kappa, "baseline", methods, reps)
            order_ok = means["GDFPCA"] < means["WDFPCA"] < means["SFPCA"]
            gap = abs(means["GDFPCA"] - means["KG_DFPCA"])
            gap_ok = gap <= 0.7
            all_ok = all_ok and order_ok and gap_ok
            details.append(
                f"J={J} k={kappa:g}: G={means['GDFPCA']:.2f} "
                f"W={means['WDFPCA']:.2f} S={means['SFPCA']:.2f} "
                f"|G-KG|={gap:.3f} order={'ok' if order_ok else 'BAD'}")
    _report(f"criterion 2 (orderings, {reps} reps/setting)", all_ok,
            "; ".join(details))
    assert all_ok


# ------------------------------------------------------------- criterion 3

def test_criterion_3_table3_case2():
    reps = _reps(50)
    means = _mc_means(30, 40, 0.0, "case2_static", ("GSFPCA", "WSFPCA"), reps)
    in_band = abs(means["GSFPCA"] - 4.68) <= 2.0
    ordered = means["GSFPCA"] <= means["WSFPCA"]
    ok = in_band and ordered
    _report(f"criterion 3 (Table 3 case 2, {reps} reps)", ok,
            f"GSFPCA = {means['GSFPCA']:.2f} (4.68 +- 2.0), "
            f"WSFPCA = {means['WSFPCA']:.2f}")
    assert ok


# ------------------------------------------------------------- criterion 4

def test_criterion_4_partial_spectrum_oracle():
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(3, 9))
        B = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
        eta = B @ B.conj().T / p + 0.5 * np.eye(p)
        phi = np.linalg.inv(eta)
        i1, i2 = map(int, rng.choice(p, size=2, replace=False))
        A = [i1, i2]
        C = [i for i in range(p) if i not in A]
        schur = eta[np.ix_(A, A)] - eta[np.ix_(A, C)] @ np.linalg.solve(
            eta[np.ix_(C, C)], eta[np.ix_(C, A)])
        worst = max(worst, abs(partial_spectrum(phi, i1, i2) - schur[0, 1]))
    ok = worst < 1e-8
    _report("criterion 4 (Theorem-1 Schur oracle, 100 draws)", ok,
            f"max |partial_spectrum - Schur| = {worst:.2e} < 1e-8")
    assert ok


# ------------------------------------------------------------- criterion 5

def test_criterion_5_parseval():
    # the lag spectrum is J-periodic, so the unit-energy identity is taken
    # over one full period inside the |l| <= L_max window (L_max >= J/2)
    worst = 0.0
    for seed in range(10):
        cfg = SimConfig(p=10, J=32, kappa=0.0, L=1, seed=seed + 900)
        truth = generate(cfg)
        sm = presmooth_panel(MFTSObservations(truth.observations, truth.grid))
        es = estimate_eigensystem(
            sm.centered, truth.grid,
            SpectralConfig.for_panel(cfg.J, cfg.Z, n_components=4))
        bank, residue = dynamic_filter_bank(es, cfg.J // 2)
        period = bank[:, bank.shape[1] - cfg.J:, :]
        w = truth.grid.weights
        energies = np.sum(w[None, None, :] * period ** 2, axis=2).sum(axis=1)
        worst = max(worst, float(np.max(np.abs(energies - 1.0))))
        assert residue < 1e-8
    ok = worst < 1e-6
    _report("criterion 5 (Parseval, 10 datasets, k <= 4)", ok,
            f"max |sum_l ||phi_kl||^2 - 1| = {worst:.2e} < 1e-6")
    assert ok


# ------------------------------------------------------------- criterion 6

def test_criterion_6_gradient_check():
    from gdfpca.graphical import PrecisionSet
    from gdfpca.scores import ConditionalScoreModel
    from gdfpca.spectral import FunctionalFilterSet

    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed + 40)
        p, J, K, L, Z = 3, 8, 2, 1, 10
        grid = TimeGrid.regular(Z)
        w = grid.weights
        raw = rng.normal(size=(K * (2 * L + 1), Z))
        basis = []
        for v in raw:
            for b in basis:
                v = v - b * np.sum(w * b * v)
            basis.append(v / np.sqrt(np.sum(w * v * v)))
        basis = np.array(basis).reshape(K, 2 * L + 1, Z)
        fs = FunctionalFilterSet([basis[k] for k in range(K)], [L] * K, grid)
        freqs = FreqGrid(J)
        mats = np.empty((K, J, p, p), dtype=complex)
        half = set(freqs.half_indices().tolist())
        for k in range(K):
            for j in freqs.half_indices():
                B = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
                m = B @ B.conj().T / p + np.eye(p)
                th = freqs.frequencies[j]
                if np.isclose(th, np.pi) or np.isclose(th, 2 * np.pi):
                    m = m.real.astype(complex)
                mats[k, j] = m
            for j in range(J):
                if j not in half:
                    mats[k, j] = np.conj(mats[k, freqs.reflect_index(j)])
        model = ConditionalScoreModel(
            rng.normal(size=(p, J, Z)), rng.uniform(0.5, 1.5, size=p),
            0.1 * rng.normal(size=(p, Z)), fs,
            PrecisionSet(mats, freqs, np.zeros(K)))
        scores = ScoreArray([rng.normal(size=(p, J + 2 * L)) for _ in range(K)],
                            [L] * K, J)
        grads = model.gradient(scores)
        h = 1e-5
        for k in range(K):
            for trial in range(4):
                idx = (int(rng.integers(p)), int(rng.integers(J + 2 * L)))
                plus, minus = scores.copy(), scores.copy()
                plus.values[k][idx] += h
                minus.values[k][idx] -= h
                fd = (model.objective(plus) - model.objective(minus)) / (2 * h)
                worst = max(worst, abs(fd - grads[k][idx]) / max(1.0, abs(fd)))
    ok = worst < 1e-5
    _report("criterion 6 (gradient vs finite differences, 10 instances)", ok,
            f"max relative error = {worst:.2e} < 1e-5")
    assert ok


# ------------------------------------------------------------- criterion 7

def test_criterion_7_glasso_sanity():
    rng = np.random.default_rng(77)
    freqs = FreqGrid(16)
    J = 16
    eta = np.empty((J, 4, 4), dtype=complex)
    half = set(freqs.half_indices().tolist())
    for j in freqs.half_indices():
        B = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        m = B @ B.conj().T / 4 + np.eye(4)
        th = freqs.frequencies[j]
        if np.isclose(th, np.pi) or np.isclose(th, 2 * np.pi):
            m = m.real.astype(complex)
        eta[j] = m
    for j in range(J):
        if j not in half:
            eta[j] = np.conj(eta[freqs.reflect_index(j)])
    phi0, _ = joint_glasso(eta, freqs, 0.0)
    inv_err = max(np.max(np.abs(phi0[j] - np.linalg.inv(eta[j])))
                  for j in range(J))
    grid = default_lambda_grid(eta, freqs)
    counts = []
    for lam in sorted(grid):
        _, info = joint_glasso(eta, freqs, float(lam))
        counts.append(info["n_offdiag_groups"])
    monotone = all(a >= b for a, b in zip(counts, counts[1:]))
    ok = inv_err < 1e-5 and monotone and len(grid) >= 8
    _report("criterion 7 (glasso sanity)", ok,
            f"lam=0 inverse error = {inv_err:.2e} < 1e-5; group counts "
            f"{counts} nonincreasing over {len(grid)}-point grid")
    assert ok


# ------------------------------------------------------------- criterion 8

def _kernel_sup_error(truth, cfg):
    sm_cent = truth.curves - truth.curves.mean(axis=1, keepdims=True)
    r = default_bandwidth(cfg.J)
    autocovs = [pooled_autocov(sm_cent, g) for g in range(r + 1)]
    freqs = FreqGrid(cfg.J)
    half = freqs.half_indices()
    thetas = freqs.frequencies[half]
    w = truth.grid.weights
    sup = 0.0
    for chunk in range(0, half.size, 64):
        ths = thetas[chunk:chunk + 64]
        kernels = _kernel_stack(autocovs, r, ths)
        for t, th in enumerate(ths):
            target = true_pooled_kernel(cfg, truth.precisions, th,
                                        truth.grid.points)
            diff = kernels[t] - target
            sup = max(sup, float(np.sqrt(np.sum(
                np.outer(w, w) * np.abs(diff) ** 2))))
    return sup


def _filter_error(truth, cfg, oracle_bank):
    """Distance to the filters of the sorted-branch population eigensystem.

    The generator's eigenvalue curves cross within (pi/2, pi), so the
    no-relabeling estimator targets the per-frequency sorted branch; its
    filters are the consistent estimand for this trend check.
    """
    cent = truth.curves - truth.curves.mean(axis=1, keepdims=True)
    es = estimate_eigensystem(
        cent, truth.grid,
        SpectralConfig.for_panel(cfg.J, cfg.Z, n_components=4))
    bank, _ = dynamic_filter_bank(es, 3)
    w = truth.grid.weights
    err = 0.0
    for k in range(min(4, bank.shape[0])):
        diffs = [np.sqrt(np.sum(w * (sign * bank[k] - oracle_bank[k]) ** 2))
                 for sign in (1.0, -1.0)]
        err += min(diffs)
    return err


def _oracle_bank(cfg, truth):
    es_true = true_sorted_eigensystem(cfg, truth.precisions, truth.grid)
    bank, _ = dynamic_filter_bank(es_true, 3)
    return bank


def test_criterion_8_consistency_trends():
    n_seeds = _reps(20)
    sup_med, filt_med, filt_p1_med = {}, {}, {}
    for J in (50, 200, 800):
        sups, filts, filts1 = [], [], []
        for seed in range(n_seeds):
            cfg = SimConfig(p=30, J=J, kappa=0.0, L=1, seed=[seed, J])
            truth = generate(cfg)
            oracle = _oracle_bank(cfg, truth)
            sups.append(_kernel_sup_error(truth, cfg))
            filts.append(_filter_error(truth, cfg, oracle))
            cfg1 = SimConfig(p=1, J=J, kappa=0.0, L=1, seed=[seed, J, 1])
            truth1 = generate(cfg1)
            filts1.append(_filter_error(truth1, cfg1, _oracle_bank(cfg1, truth1)))
        sup_med[J] = float(np.median(sups))
        filt_med[J] = float(np.median(filts))
        filt_p1_med[J] = float(np.median(filts1))
    sup_ok = sup_med[50] > sup_med[200] > sup_med[800]
    filt_ok = filt_med[50] > filt_med[200] > filt_med[800]
    pool_ok = all(filt_med[J] < filt_p1_med[J] for J in (50, 200, 800))
    ok = sup_ok and filt_ok and pool_ok
    _report(f"criterion 8 (consistency trends, {n_seeds} seeds)", ok,
            f"kernel sup-error medians {sup_med}; filter error medians "
            f"p=30 {filt_med} vs p=1 {filt_p1_med}")
    assert ok


# ------------------------------------------------------------- criterion 9

def test_criterion_9_bench_determinism(tmp_path):
    args = ("bench", "--p", "4", "--J", "16", "--kappa", "2",
            "--methods", "WDFPCA", "GDFPCA", "--reps", "3", "--seed", "17")
    out1 = tmp_path / "b1.csv"
    out2 = tmp_path / "b2.csv"
    assert main([*args, "--out", str(out1), "--workers", "1"]) == 0
    assert main([*args, "--out", str(out2), "--workers", "3"]) == 0
    ok = out1.read_bytes() == out2.read_bytes()
    _report("criterion 9 (bench determinism across worker counts)", ok,
            "byte-identical CSV for 1 vs 3 workers")
    assert ok
