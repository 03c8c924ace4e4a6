"""The estimator families: static/dynamic, pooled/per-series, graph-aware.

Eight pipelines share one toolbox.  Per-series methods (SFPCA, DFPCA) run
the pooled machinery on each series alone; pooled methods (W*) share
filters or basis across series; graph methods (G*) add precision-weighted
score extraction, with KG_* variants using a known edge set instead of the
penalized estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidInputError
from .funcdata import (
    FreqGrid,
    MFTSObservations,
    SmoothedMFTS,
    TimeGrid,
    presmooth_panel,
)
from .graphical import (
    ADMMConfig,
    PrecisionSet,
    constrained_precisions,
    estimate_precisions,
)
from .scores import (
    ScoreArray,
    extract_scores,
    integrate_scores,
    reconstruct_centered,
    static_scores,
)
from .spectral import (
    EigenSystem,
    FunctionalFilterSet,
    SpectralConfig,
    compute_filters,
    default_bandwidth,
    eigenmatrices,
    estimate_eigensystem,
    static_eigenbasis,
)

METHODS = (
    "SFPCA", "WSFPCA", "GSFPCA", "KG_SFPCA",
    "DFPCA", "WDFPCA", "GDFPCA", "KG_DFPCA",
)
GRAPH_METHODS = ("GSFPCA", "KG_SFPCA", "GDFPCA", "KG_DFPCA")
KNOWN_GRAPH_METHODS = ("KG_SFPCA", "KG_DFPCA")
PER_SERIES_METHODS = ("SFPCA", "DFPCA")
STATIC_METHODS = ("SFPCA", "WSFPCA", "GSFPCA", "KG_SFPCA")


class MissingGraphError(ConfigError):
    """A known-graph method was requested without an edge set."""


@dataclass
class TruncationConfig:
    """Component and lag truncation rules.

    ``fve_threshold`` is the fraction of variance explained that the kept
    components must reach; ``n_candidates`` caps how many eigenvalues enter
    the total.  ``filter_energy_threshold`` is the cumulative-energy rule
    for the per-component lag range.
    """

    fve_threshold: float = 0.85
    filter_energy_threshold: float = 0.98
    n_candidates: int = None     # default: all computable components
    max_lag: int = None          # default: the lag-window bandwidth

    def __post_init__(self):
        if not 0.0 < self.fve_threshold <= 1.0:
            raise ConfigError("FVE threshold must be in (0, 1]")
        if not 0.0 < self.filter_energy_threshold <= 1.0:
            raise ConfigError("filter energy threshold must be in (0, 1]")


@dataclass
class FitConfig:
    truncation: TruncationConfig = field(default_factory=TruncationConfig)
    bandwidth: int = None        # default: floor(J^0.4)
    lam_grid: np.ndarray = None
    known_edges: list = None
    admm: ADMMConfig = None
    max_ascent_iter: int = 500


@dataclass
class ComponentBlock:
    """Filters and scores covering a subset of the series."""

    series: list
    filters: FunctionalFilterSet
    scores: ScoreArray
    n_components: int


@dataclass
class FitResult:
    method: str
    grid: TimeGrid
    means: np.ndarray
    noise_var: np.ndarray
    blocks: list                     # ComponentBlock, ordered by series
    reconstruction: np.ndarray       # p x J x Z including the mean
    eigen_matrices: object = None    # graph methods only
    precisions: PrecisionSet = None  # graph methods only
    selected: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.reconstruction.shape[0]

    def centered_reconstruction(self, n_components=None) -> np.ndarray:
        """Reconstruction of the centered curves from the first q components."""
        out = np.zeros_like(self.reconstruction)
        for block in self.blocks:
            q = block.n_components if n_components is None else n_components
            rec = reconstruct_centered(block.filters, block.scores, q)
            out[block.series] = rec
        return out


# ----------------------------------------------------------- truncation

def select_K(trace_values: np.ndarray, fve_threshold: float) -> int:
    """Smallest K whose cumulative eigenvalue mass reaches the FVE target.

    ``trace_values`` holds nu_k(theta_j) rows (or a vector of static
    eigenvalues); the total is taken over all rows provided.
    """
    arr = np.asarray(trace_values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]  # static eigenvalues: one value per component
    per_k = arr.sum(axis=1)
    total = per_k.sum()
    if total <= 0:
        return 1
    cum = np.cumsum(per_k) / total
    hits = np.nonzero(cum >= fve_threshold - 1e-12)[0]
    return int(hits[0]) + 1 if hits.size else arr.shape[0]


def nmse(true_centered: np.ndarray, recon_centered: np.ndarray,
         grid: TimeGrid) -> float:
    """Normalized mean squared reconstruction error, in percent."""
    if true_centered.shape != recon_centered.shape:
        raise InvalidInputError("NMSE operands must have matching shapes")
    w = grid.weights
    err = np.sum(w * (true_centered - recon_centered) ** 2)
    denom = np.sum(w * true_centered ** 2)
    if denom <= 0:
        raise InvalidInputError("NMSE denominator is zero")
    return 100.0 * float(err / denom)


def nmse_profile(result: FitResult, true_centered: np.ndarray,
                 q_values=(1, 2, 3, 4)) -> dict:
    """NMSE(q) for each q, reusing the fitted scores of the full fit."""
    return {
        int(q): nmse(true_centered, result.centered_reconstruction(int(q)),
                     result.grid)
        for q in q_values
    }


# ------------------------------------------------------------- pipelines

def _spectral_config(J: int, Z: int, cfg: FitConfig) -> SpectralConfig:
    t = cfg.truncation
    r = cfg.bandwidth or default_bandwidth(J)
    n_cand = Z if t.n_candidates is None else min(t.n_candidates, Z)
    return SpectralConfig(
        bandwidth=r,
        n_components=n_cand,
        max_lag=t.max_lag if t.max_lag is not None else min(r, J // 2),
        filter_energy_threshold=t.filter_energy_threshold,
    )


def _slice_eigensystem(es: EigenSystem, K: int) -> EigenSystem:
    return EigenSystem(es.eigenvalues[:K], es.funcs[:K], es.grid, es.freqs,
                       es.warnings)


def _dynamic_block(centered, grid, spec_cfg, fve) -> tuple:
    es = estimate_eigensystem(centered, grid, spec_cfg)
    K = select_K(es.eigenvalues, fve)
    es_K = _slice_eigensystem(es, K)
    filters = compute_filters(es_K, spec_cfg)
    return es_K, filters


def _static_block(centered, grid, spec_cfg, fve) -> tuple:
    basis = static_eigenbasis(centered, grid, spec_cfg.n_components)
    K = select_K(basis.eigenvalues, fve)
    from .spectral import StaticEigenbasis

    basis_K = StaticEigenbasis(basis.funcs[:K], basis.eigenvalues[:K], grid)
    return basis_K, basis_K.as_filter_set()


def _graph_precisions(method, centered, es_or_basis, spec_cfg, cfg, freqs):
    """Eigen-matrices and precision sets for the graph-aware methods."""
    if isinstance(es_or_basis, EigenSystem):
        es = es_or_basis
    else:
        es = es_or_basis.as_eigensystem(freqs)
    ems = eigenmatrices(centered, es, spec_cfg.bandwidth)
    if method in KNOWN_GRAPH_METHODS:
        if cfg.known_edges is None:
            raise MissingGraphError(
                f"{method} needs a known edge set; provide known_edges")
        prec = constrained_precisions(ems, cfg.known_edges)
    else:
        prec = estimate_precisions(ems, spec_cfg.bandwidth, cfg.lam_grid,
                                   cfg.admm)
    return ems, prec


def fit(method: str, obs: MFTSObservations, cfg: FitConfig = None) -> FitResult:
    """Run one Table-style pipeline end to end on a noisy panel."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; pick one of {METHODS}")
    cfg = cfg or FitConfig()
    sm = presmooth_panel(obs)
    p, J, Z = obs.values.shape
    freqs = FreqGrid(J)
    spec_cfg = _spectral_config(J, Z, cfg)
    fve = cfg.truncation.fve_threshold
    selected = {"bandwidth": spec_cfg.bandwidth}
    diagnostics = {"df_fallback": sm.df_fallback}

    if method in PER_SERIES_METHODS:
        blocks = []
        Ks = []
        for i in range(p):
            sub = sm.centered[i: i + 1]
            if method == "SFPCA":
                _, filt = _static_block(sub, obs.grid, spec_cfg, fve)
                sc = integrate_scores(sub, filt)
            else:
                es_K, filt = _dynamic_block(sub, obs.grid, spec_cfg, fve)
                sc = integrate_scores(sub, filt)
            blocks.append(ComponentBlock([i], filt, sc, filt.n_components))
            Ks.append(filt.n_components)
        selected["K"] = Ks
        ems = prec = None
    else:
        if method in STATIC_METHODS:
            basis, filters = _static_block(sm.centered, obs.grid, spec_cfg, fve)
            source = basis
        else:
            es_K, filters = _dynamic_block(sm.centered, obs.grid, spec_cfg, fve)
            source = es_K
        selected["K"] = filters.n_components
        selected["L"] = list(filters.lag_ranges)
        init = integrate_scores(sm.centered, filters)
        ems = prec = None
        if method in GRAPH_METHODS:
            ems, prec = _graph_precisions(method, sm.centered, source,
                                          spec_cfg, cfg, freqs)
            selected["lambda"] = prec.penalties.tolist()
            sc, info = extract_scores(obs.values, sm.noise_var, sm.means,
                                      filters, prec, init,
                                      max_iter=cfg.max_ascent_iter)
            diagnostics["ascent"] = info
        else:
            sc = init
        blocks = [ComponentBlock(list(range(p)), filters, sc,
                                 filters.n_components)]

    result = FitResult(method, obs.grid, sm.means, sm.noise_var, blocks,
                       np.zeros((p, J, Z)), ems, prec, selected, diagnostics)
    result.reconstruction = sm.means[:, None, :] + result.centered_reconstruction()
    return result


def fit_all(obs: MFTSObservations, cfg: FitConfig = None, methods=METHODS):
    """Fit several methods on the same panel; returns {method: FitResult}."""
    return {m: fit(m, obs, cfg) for m in methods}
