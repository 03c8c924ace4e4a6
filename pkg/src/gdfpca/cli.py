"""Command-line driver: simulate | fit | bench | pmi.

Progress and warnings go to stderr; data go to files and stdout.  Exit
codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Benchmark replicates use counter-based seed streams, so results are
byte-identical no matter how many workers run them.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, GDFPCAError, NumericalError
from .fpca import (
    METHODS,
    GRAPH_METHODS,
    KNOWN_GRAPH_METHODS,
    FitConfig,
    TruncationConfig,
    fit,
    nmse,
)
from .funcdata import MFTSObservations, TimeGrid, load_csv, save_csv
from .graphical import estimate_graph, partial_mutual_info, threshold_graph
from .serialize import (
    load_graph,
    load_precisions,
    save_dot,
    save_eigenmatrices,
    save_filters,
    save_graph,
    save_pmi_csv,
    save_precisions,
    save_scores,
)
from .simulate import CASES, SimConfig, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def build_parser() -> _Parser:
    parser = _Parser(prog="gdfpca",
                     description="Graph-aware dynamic FPCA for functional panels")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw a synthetic panel")
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--J", type=int, required=True)
    sim.add_argument("--kappa", type=float, default=0.0)
    sim.add_argument("--L", type=int, default=1)
    sim.add_argument("--case", choices=CASES, default="baseline")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)

    fit_p = sub.add_parser("fit", help="fit estimators to a panel CSV")
    fit_p.add_argument("--input", required=True,
                       help="panel CSV or a simulate output directory")
    fit_p.add_argument("--method", nargs="+", default=["GDFPCA"],
                       help=f"any of {', '.join(METHODS)} or 'all'")
    fit_p.add_argument("--out", required=True)
    fit_p.add_argument("--graph", help="known-graph JSON for KG_* methods")
    fit_p.add_argument("--truth", help="latent-curve CSV for NMSE reporting")
    fit_p.add_argument("--r", type=int, help="lag-window bandwidth override")
    fit_p.add_argument("--fve", type=float, default=0.85)
    fit_p.add_argument("--tau-l", type=float, default=0.98)
    fit_p.add_argument("--max-lag", type=int)
    fit_p.add_argument("--save-spectral", action="store_true")

    bench = sub.add_parser("bench", help="Monte Carlo benchmark table")
    bench.add_argument("--config", help="JSON file with the settings grid")
    bench.add_argument("--p", type=int, nargs="+")
    bench.add_argument("--J", type=int, nargs="+")
    bench.add_argument("--kappa", type=float, nargs="+")
    bench.add_argument("--case", choices=CASES)
    bench.add_argument("--methods", nargs="+")
    bench.add_argument("--reps", type=int)
    bench.add_argument("--q", type=int, nargs="+")
    bench.add_argument("--seed", type=int)
    bench.add_argument("--workers", type=int)
    bench.add_argument("--out", required=True)

    pmi = sub.add_parser("pmi", help="partial mutual information and graph")
    pmi.add_argument("--fit-dir", required=True,
                     help="a fit output directory holding precision.json")
    pmi.add_argument("--tau", type=float, default=0.05)
    pmi.add_argument("--out", required=True)
    pmi.add_argument("--truth-graph", help="graph JSON to score edge recovery")
    return parser


# ---------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    if args.kappa < 0:
        raise ConfigError("--kappa must be nonnegative")
    cfg = SimConfig(p=args.p, J=args.J, kappa=args.kappa, L=args.L,
                    seed=args.seed, case=args.case)
    truth = generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(MFTSObservations(truth.observations, truth.grid), out / "obs.csv")
    save_csv(MFTSObservations(truth.curves, truth.grid), out / "truth.csv")
    save_graph(cfg.p, truth.edges, out / "graph.json")
    meta = {
        "p": cfg.p, "J": cfg.J, "Z": cfg.Z, "kappa": cfg.kappa, "L": cfg.L,
        "K": cfg.n_components, "rho": list(cfg.rho), "seed": args.seed,
        "case": cfg.case, "noise_var": truth.noise_var.tolist(),
    }
    (out / "meta.json").write_text(json.dumps(meta))
    print(f"p={cfg.p} J={cfg.J} Z={cfg.Z} edges={len(truth.edges)}")
    return EXIT_OK


# --------------------------------------------------------------------- fit

def _resolve_methods(requested) -> list:
    if len(requested) == 1 and requested[0].lower() == "all":
        return list(METHODS)
    methods = []
    for m in requested:
        name = m.upper()
        if name not in METHODS:
            raise ConfigError(f"unknown method {m!r}; pick from {METHODS} or 'all'")
        methods.append(name)
    return methods


def _load_panel(path_arg):
    path = Path(path_arg)
    if path.is_dir():
        return load_csv(path / "obs.csv"), path
    return load_csv(path), None


def cmd_fit(args) -> int:
    methods = _resolve_methods(args.method)
    obs, sim_dir = _load_panel(args.input)
    known_edges = None
    if args.graph:
        _, known_edges = load_graph(args.graph)
    elif sim_dir is not None and (sim_dir / "graph.json").exists():
        if any(m in KNOWN_GRAPH_METHODS for m in methods):
            _, known_edges = load_graph(sim_dir / "graph.json")
    for m in methods:
        if m in KNOWN_GRAPH_METHODS and known_edges is None:
            raise ConfigError(f"{m} needs --graph graph.json (known edge set)")
    truth_path = args.truth
    if truth_path is None and sim_dir is not None and (sim_dir / "truth.csv").exists():
        truth_path = sim_dir / "truth.csv"
    truth = load_csv(truth_path) if truth_path else None

    cfg = FitConfig(
        truncation=TruncationConfig(fve_threshold=args.fve,
                                    filter_energy_threshold=args.tau_l,
                                    max_lag=args.max_lag),
        bandwidth=args.r,
        known_edges=known_edges,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for m in methods:
        _progress(f"fitting {m} ...")
        result = fit(m, obs, cfg)
        mdir = out / m
        mdir.mkdir(exist_ok=True)
        save_csv(MFTSObservations(result.reconstruction, obs.grid),
                 mdir / "reconstruction.csv")
        if len(result.blocks) == 1:
            block = result.blocks[0]
            save_scores(block.scores, mdir / "scores.csv")
            save_filters(block.filters, mdir / "filters.json")
        if result.precisions is not None:
            save_precisions(result.precisions, mdir / "precision.json")
        if args.save_spectral and result.eigen_matrices is not None:
            save_eigenmatrices(result.eigen_matrices, mdir / "eigenmatrices.json")
        diag = {"method": m, "selected": result.selected,
                "warnings": _warning_payload(result)}
        if "ascent" in result.diagnostics:
            a = result.diagnostics["ascent"]
            diag["ascent"] = {"iterations": a["iterations"],
                              "converged": bool(a["converged"])}
        (mdir / "diagnostics.json").write_text(json.dumps(diag, default=str))
        if truth is not None:
            cent = truth.values - truth.values.mean(axis=1, keepdims=True)
            for q in (1, 2, 3, 4):
                rows.append((m, q, nmse(cent, result.centered_reconstruction(q),
                                        obs.grid)))
    if rows:
        print("method,q,nmse_percent")
        for m, q, v in rows:
            print(f"{m},{q},{v:.4f}")
    return EXIT_OK


def _warning_payload(result):
    out = []
    for block in result.blocks:
        es = block.filters.eigensystem
        if es is not None and es.warnings:
            out.extend([list(map(str, wrow)) for wrow in es.warnings])
    return out


# -------------------------------------------------------------------- bench

BENCH_DEFAULTS = {
    "p": [30], "J": [40], "kappa": [0.0], "case": "baseline",
    "methods": ["SFPCA", "WSFPCA", "DFPCA", "WDFPCA", "GDFPCA"],
    "reps": 20, "q": [1, 2, 3, 4], "seed": 0, "workers": 1,
}


def _bench_settings(args) -> dict:
    cfg = dict(BENCH_DEFAULTS)
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"bad benchmark config: {exc}") from exc
        unknown = set(file_cfg) - set(BENCH_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown benchmark config keys {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in BENCH_DEFAULTS:
        val = getattr(args, key if key != "q" else "q", None)
        if val is not None:
            cfg[key] = val
    cfg["methods"] = _resolve_methods(cfg["methods"])
    env_cap = os.environ.get("GDFPCA_MAX_WORKERS")
    if env_cap:
        cfg["workers"] = max(1, min(int(cfg["workers"]), int(env_cap)))
    return cfg


def bench_replicate(task) -> list:
    """One (setting, replicate) cell; returns rows (method, q, nmse)."""
    p, J, kappa, case, methods, q_list, seed, rep = task
    sim = SimConfig(p=p, J=J, kappa=kappa, case=case,
                    seed=[seed, p, J, int(round(kappa * 1000)),
                          CASES.index(case), rep])
    truth = generate(sim)
    obs = MFTSObservations(truth.observations, truth.grid)
    cent = truth.curves - truth.curves.mean(axis=1, keepdims=True)
    out = []
    for m in methods:
        cfg = FitConfig(known_edges=truth.edges if m in KNOWN_GRAPH_METHODS
                        else None)
        result = fit(m, obs, cfg)
        for q in q_list:
            out.append((m, int(q),
                        nmse(cent, result.centered_reconstruction(int(q)),
                             obs.grid)))
    return out


def cmd_bench(args) -> int:
    cfg = _bench_settings(args)
    settings = [(p, J, kappa) for p in cfg["p"] for J in cfg["J"]
                for kappa in cfg["kappa"]]
    tasks = []
    for (p, J, kappa) in settings:
        for rep in range(cfg["reps"]):
            tasks.append((p, J, kappa, cfg["case"], tuple(cfg["methods"]),
                          tuple(cfg["q"]), cfg["seed"], rep))
    _progress(f"benchmark: {len(settings)} settings x {cfg['reps']} replicates, "
              f"{cfg['workers']} worker(s)")
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            results = list(pool.map(bench_replicate, tasks))
    else:
        results = []
        for i, task in enumerate(tasks):
            results.append(bench_replicate(task))
            _progress(f"  replicate {i + 1}/{len(tasks)} done")
    # aggregate in task order: identical output for any worker count
    table = {}
    for task, rows in zip(tasks, results):
        p, J, kappa = task[0], task[1], task[2]
        for m, q, v in rows:
            table.setdefault((m, p, J, kappa, q), []).append(v)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("method", "p", "J", "kappa", "case", "q",
                         "mean_nmse", "mc_se", "reps"))
        for (m, p, J, kappa, q) in sorted(table,
                                          key=lambda key: (key[1], key[2],
                                                           key[3], key[0],
                                                           key[4])):
            vals = np.asarray(table[(m, p, J, kappa, q)])
            se = vals.std(ddof=1) / np.sqrt(vals.size) if vals.size > 1 else 0.0
            writer.writerow((m, p, J, repr(float(kappa)), cfg["case"], q,
                             repr(float(vals.mean())), repr(float(se)),
                             vals.size))
    _progress(f"wrote {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------- pmi

def cmd_pmi(args) -> int:
    fit_dir = Path(args.fit_dir)
    prec_path = fit_dir / "precision.json"
    if not prec_path.exists():
        raise DataError(
            f"{fit_dir} has no precision.json; run fit with a graph-aware "
            f"method first ({', '.join(GRAPH_METHODS)})")
    if args.tau < 0:
        raise ConfigError("--tau must be nonnegative")
    precisions = load_precisions(prec_path)
    graph = estimate_graph(precisions, tau=args.tau)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_pmi_csv(graph.pmi, out / "pmi.csv")
    save_graph(graph.pmi.shape[0], graph.edges, out / "edges.json")
    save_dot(graph.pmi.shape[0], graph.edges, out / "graph.dot", graph.pmi)
    summary = f"p={graph.pmi.shape[0]} tau={args.tau} edges={len(graph.edges)}"
    if args.truth_graph:
        _, true_edges = load_graph(args.truth_graph)
        est, tru = set(graph.edges), set(true_edges)
        tp = len(est & tru)
        prec_v = tp / len(est) if est else 0.0
        rec_v = tp / len(tru) if tru else 0.0
        f1 = 2 * prec_v * rec_v / (prec_v + rec_v) if prec_v + rec_v else 0.0
        summary += f" F1={f1:.3f} precision={prec_v:.3f} recall={rec_v:.3f}"
    print(summary)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {"simulate": cmd_simulate, "fit": cmd_fit,
                "bench": cmd_bench, "pmi": cmd_pmi}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"gdfpca: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"gdfpca: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"gdfpca: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GDFPCAError as exc:
        print(f"gdfpca: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
