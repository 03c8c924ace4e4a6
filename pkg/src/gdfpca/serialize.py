"""File formats shared by the command-line driver and external tools.

Panels travel as long-format CSV (see funcdata), scores as
``series_id,time_index,component,value`` CSV, and frequency-domain objects
as JSON with explicit real/imaginary parts.  Graphs are JSON edge lists
(1-based in files) plus DOT for visualization.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import CSVParseError, InvalidInputError
from .funcdata import FreqGrid, TimeGrid
from .graphical import PrecisionSet
from .scores import ScoreArray
from .spectral import EigenMatrixSet, FunctionalFilterSet


def _complex_payload(arr: np.ndarray) -> dict:
    arr = np.asarray(arr)
    return {
        "shape": list(arr.shape),
        "re": arr.real.ravel().tolist(),
        "im": arr.imag.ravel().tolist(),
    }


def _complex_restore(payload: dict) -> np.ndarray:
    shape = tuple(payload["shape"])
    re = np.asarray(payload["re"], dtype=float).reshape(shape)
    im = np.asarray(payload["im"], dtype=float).reshape(shape)
    return re + 1j * im


def save_filters(filters: FunctionalFilterSet, path) -> None:
    payload = {
        "grid": filters.grid.points.tolist(),
        "lag_ranges": [int(L) for L in filters.lag_ranges],
        "filters": [f.tolist() for f in filters.filters],
    }
    es = filters.eigensystem
    if es is not None:
        payload["eigenvalues"] = es.eigenvalues.tolist()
        payload["eigenfunctions"] = _complex_payload(es.funcs)
    Path(path).write_text(json.dumps(payload))


def load_filters(path) -> FunctionalFilterSet:
    payload = json.loads(Path(path).read_text())
    grid = TimeGrid(np.asarray(payload["grid"]))
    filters = [np.asarray(f, dtype=float) for f in payload["filters"]]
    fs = FunctionalFilterSet(filters, list(payload["lag_ranges"]), grid)
    if "eigenfunctions" in payload:
        from .spectral import EigenSystem

        funcs = _complex_restore(payload["eigenfunctions"])
        evals = np.asarray(payload["eigenvalues"], dtype=float)
        fs.eigensystem = EigenSystem(evals, funcs, grid,
                                     FreqGrid(evals.shape[1]))
    return fs


def save_eigenmatrices(ems: EigenMatrixSet, path) -> None:
    payload = {
        "n_units": ems.freqs.n_units,
        "matrices": _complex_payload(ems.matrices),
    }
    Path(path).write_text(json.dumps(payload))


def load_eigenmatrices(path) -> EigenMatrixSet:
    payload = json.loads(Path(path).read_text())
    return EigenMatrixSet(_complex_restore(payload["matrices"]),
                          FreqGrid(int(payload["n_units"])))


def save_precisions(prec: PrecisionSet, path) -> None:
    payload = {
        "n_units": prec.freqs.n_units,
        "penalties": prec.penalties.tolist(),
        "matrices": _complex_payload(prec.matrices),
    }
    Path(path).write_text(json.dumps(payload))


def load_precisions(path) -> PrecisionSet:
    payload = json.loads(Path(path).read_text())
    return PrecisionSet(_complex_restore(payload["matrices"]),
                        FreqGrid(int(payload["n_units"])),
                        np.asarray(payload["penalties"], dtype=float))


def save_scores(scores: ScoreArray, path) -> None:
    """Long format: series_id, time_index, component, value (1-based ids).

    time_index runs over the lag-extended axis 1-L_k .. J+L_k.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("series_id", "time_index", "component", "value"))
        for k, block in enumerate(scores.values):
            L = scores.lag_ranges[k]
            for i in range(block.shape[0]):
                for m in range(block.shape[1]):
                    writer.writerow(
                        (i + 1, m - L + 1, k + 1, repr(float(block[i, m]))))


def load_scores(path) -> ScoreArray:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["series_id", "time_index", "component", "value"]:
            raise CSVParseError(f"{path}: unexpected score header")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((int(row[0]), int(row[1]), int(row[2]),
                             float(row[3])))
            except ValueError:
                raise CSVParseError(f"{path}: line {lineno}: bad field") from None
    if not rows:
        raise CSVParseError(f"{path}: no score rows")
    K = max(r[2] for r in rows)
    p = max(r[0] for r in rows)
    values, lag_ranges = [], []
    n_units = None
    for k in range(1, K + 1):
        sub = [r for r in rows if r[2] == k]
        lo = min(r[1] for r in sub)
        hi = max(r[1] for r in sub)
        L = 1 - lo
        J = hi - L
        if n_units is None:
            n_units = J
        elif n_units != J:
            raise CSVParseError(f"{path}: inconsistent time spans across components")
        block = np.zeros((p, hi - lo + 1))
        for i, m, _, v in sub:
            block[i - 1, m - lo] = v
        values.append(block)
        lag_ranges.append(L)
    return ScoreArray(values, lag_ranges, n_units)


def save_graph(p: int, edges, path) -> None:
    payload = {"p": int(p),
               "edges": [[int(i1) + 1, int(i2) + 1] for (i1, i2) in edges]}
    Path(path).write_text(json.dumps(payload))


def load_graph(path):
    payload = json.loads(Path(path).read_text())
    p = int(payload["p"])
    edges = []
    for pair in payload["edges"]:
        i1, i2 = int(pair[0]) - 1, int(pair[1]) - 1
        if not (0 <= i1 < p and 0 <= i2 < p) or i1 == i2:
            raise InvalidInputError(f"{path}: edge {pair} out of range")
        edges.append((min(i1, i2), max(i1, i2)))
    return p, sorted(set(edges))


def save_pmi_csv(pmi: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("series_1", "series_2", "pmi"))
        p = pmi.shape[0]
        for i1 in range(p):
            for i2 in range(i1 + 1, p):
                writer.writerow((i1 + 1, i2 + 1, repr(float(pmi[i1, i2]))))


def save_dot(p: int, edges, path, pmi: np.ndarray = None) -> None:
    lines = ["graph partial_correlation {"]
    for i in range(p):
        lines.append(f"  s{i + 1};")
    for (i1, i2) in edges:
        label = ""
        if pmi is not None:
            label = f' [label="{pmi[i1, i2]:.3f}"]'
        lines.append(f"  s{i1 + 1} -- s{i2 + 1}{label};")
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n")
