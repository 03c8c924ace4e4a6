"""Sparse inverse eigen-matrices and the partial correlation graph.

The joint graphical Lasso couples the precision matrices across the whole
frequency grid through a group penalty on each off-diagonal entry, so an
edge is absent only when it vanishes at every frequency.  Solved by ADMM
with closed-form primal and proximal steps.  Conjugate symmetry lets every
solver run on frequencies theta <= pi (plus 2*pi) with multiplicity
weights, and the full grid is filled by reflection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegeneratePrecisionError,
    InvalidInputError,
    SolverError,
)
from .funcdata import FreqGrid
from .spectral import EigenMatrixSet

TWO_PI = 2.0 * np.pi


@dataclass
class ADMMConfig:
    rho: float = None         # None: start at the mean diagonal of the input
    max_iter: int = 1000
    tol: float = 1e-5
    balance: float = 5.0      # residual-ratio trigger for rho adaptation
    pd_floor: float = 1e-9


@dataclass
class PrecisionSet:
    """Hermitian PD inverse eigen-matrices per component and frequency."""

    matrices: np.ndarray      # K x J x p x p complex
    freqs: FreqGrid
    penalties: np.ndarray     # lambda_k actually used
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_components(self) -> int:
        return self.matrices.shape[0]

    @property
    def p(self) -> int:
        return self.matrices.shape[2]


@dataclass
class GraphEstimate:
    """Partial mutual information matrix and its thresholded edge set."""

    pmi: np.ndarray           # p x p symmetric, zero diagonal
    edges: list               # (i1, i2) with i1 < i2
    threshold: float
    clamped: bool = False     # a log argument needed clamping


# ------------------------------------------------------------- ADMM pieces

def _ridge_repair(eta, flag_list, label):
    """Lift near-singular input spectra so logdet stays finite."""
    evals = np.linalg.eigvalsh(eta)
    scale = float(np.mean(np.trace(eta, axis1=-2, axis2=-1).real)) / eta.shape[-1]
    if evals.min() < 1e-10 * max(scale, 1e-300):
        flag_list.append(label)
        eta = eta + (1e-8 * scale) * np.eye(eta.shape[-1])
    return eta


def _prox_logdet(target, eta, rho, pd_floor):
    """argmin tr(eta X) - logdet X + (rho/2) ||X - target||_F^2 (Hermitian)."""
    M = rho * target - eta
    M = (M + np.swapaxes(M.conj(), -1, -2)) / 2
    evals, evecs = np.linalg.eigh(M)
    theta = (evals + np.sqrt(evals ** 2 + 4.0 * rho)) / (2.0 * rho)
    theta = np.maximum(theta, pd_floor)
    out = (evecs * theta[..., None, :]) @ np.swapaxes(evecs.conj(), -1, -2)
    return (out + np.swapaxes(out.conj(), -1, -2)) / 2


def _group_soft_threshold(W, mult, cut):
    """Soft-threshold each off-diagonal entry jointly across the theta stack.

    W: (H, p, p) Hermitian stack; the group for pair (i1, i2) is the vector
    of entries over frequencies, weighted by the grid multiplicities.
    Returns the thresholded stack (diagonal untouched) and the boolean
    keep-matrix of surviving groups.
    """
    H, p, _ = W.shape
    iu, ju = np.triu_indices(p, 1)
    groups = W[:, iu, ju]                                    # H x n_pairs
    norms = np.sqrt(np.sum(mult[:, None] * np.abs(groups) ** 2, axis=0))
    factor = np.maximum(0.0, 1.0 - cut / np.maximum(norms, 1e-300))
    Z = W.copy()
    scaled = groups * factor[None, :]
    Z[:, iu, ju] = scaled
    Z[:, ju, iu] = np.conj(scaled)
    keep = factor > 0.0
    return Z, keep


def _weighted_norm(stack, mult):
    return float(np.sqrt(np.sum(mult * np.sum(np.abs(stack) ** 2, axis=(1, 2)))))


def _admm_glasso(eta_half, mult, lam, cfg: ADMMConfig, warm=None):
    """Joint graphical Lasso over the half grid with multiplicity weights.

    Minimizes  sum_h m_h [tr(eta_h Phi_h) - logdet Phi_h]
             + lam * sum_{i1 != i2} sqrt(sum_h m_h |Phi_h[i1,i2]|^2),
    which is the full-grid objective after folding conjugate frequencies.
    Returns (Phi stack, info).
    """
    H, p, _ = eta_half.shape
    mult = np.asarray(mult, dtype=float)
    rho = cfg.rho
    if rho is None:
        rho = max(float(np.mean(np.trace(eta_half, axis1=1, axis2=2).real)) / p,
                  1e-8)
    if warm is None:
        # diagonal inverse: exact at penalties beyond the group maximum
        diag = np.real(np.einsum("hii->hi", eta_half))
        Z = np.zeros_like(eta_half)
        idx = np.arange(p)
        Z[:, idx, idx] = 1.0 / np.maximum(diag, 1e-12)
        U = np.zeros_like(Z)
    else:
        Z, U = warm[0].copy(), warm[1].copy()
    info = {"iterations": 0, "converged": False, "rho": rho}
    n_entries = np.sqrt(mult.sum() * p * p)
    Theta = Z.copy()
    for it in range(cfg.max_iter):
        Theta = _prox_logdet(Z - U, eta_half, rho, cfg.pd_floor)
        Z_old = Z
        Z, keep = _group_soft_threshold(Theta + U, mult, lam / rho)
        U = U + Theta - Z
        r_norm = _weighted_norm(Theta - Z, mult)
        s_norm = rho * _weighted_norm(Z - Z_old, mult)
        eps_pri = cfg.tol * max(_weighted_norm(Theta, mult),
                                _weighted_norm(Z, mult), n_entries)
        eps_dual = cfg.tol * max(rho * _weighted_norm(U, mult), n_entries)
        if r_norm < eps_pri and s_norm < eps_dual:
            info["converged"] = True
            info["iterations"] = it + 1
            break
        if r_norm > cfg.balance * s_norm:
            rho *= 2.0
            U /= 2.0
        elif s_norm > cfg.balance * r_norm:
            rho /= 2.0
            U *= 2.0
    else:
        info["iterations"] = cfg.max_iter
    info["rho"] = rho
    # report the exactly-sparse iterate when it is safely positive definite
    z_min = np.linalg.eigvalsh(Z).min()
    phi = Z if z_min > cfg.pd_floor else Theta
    info["n_offdiag_groups"] = int(keep.sum())
    info["warm"] = (Z, U)
    return phi, info


def glasso_objective(eta_half, mult, lam, phi_half) -> float:
    """Penalized negative log-likelihood evaluated on the half grid."""
    fit = 0.0
    for h in range(eta_half.shape[0]):
        sign, logdet = np.linalg.slogdet(phi_half[h])
        if sign <= 0:
            return np.inf
        fit += mult[h] * (np.trace(eta_half[h] @ phi_half[h]).real - logdet)
    p = eta_half.shape[1]
    iu, ju = np.triu_indices(p, 1)
    norms = np.sqrt(np.sum(mult[:, None] * np.abs(phi_half[:, iu, ju]) ** 2, axis=0))
    return fit + 2.0 * lam * float(norms.sum())


def joint_glasso(eta: np.ndarray, freqs: FreqGrid, lam: float,
                 admm_cfg: ADMMConfig = None, warm=None):
    """Solve the joint graphical Lasso for one component on the full grid.

    ``eta`` holds J Hermitian PSD matrices; the solution satisfies
    Phi(2*pi - theta) = conj(Phi(theta)) by construction.  With lam = 0 the
    estimate is the plain matrix inverse.  Returns (Phi, info).
    """
    if lam < 0:
        raise InvalidInputError("penalty must be nonnegative")
    cfg = admm_cfg or ADMMConfig()
    half = freqs.half_indices()
    mult = freqs.multiplicities().astype(float)
    flags = []
    eta_half = _ridge_repair(eta[half].copy(), flags, "ridge")
    p = eta.shape[1]
    if lam == 0.0 or p == 1:
        phi_half = np.linalg.inv(eta_half)
        phi_half = (phi_half + np.swapaxes(phi_half.conj(), -1, -2)) / 2
        iu, ju = np.triu_indices(p, 1)
        nz = np.sqrt(np.sum(mult[:, None] * np.abs(phi_half[:, iu, ju]) ** 2, axis=0))
        info = {"iterations": 0, "converged": True,
                "n_offdiag_groups": int(np.sum(nz > 0)), "flags": flags}
    else:
        phi_half, info = _admm_glasso(eta_half, mult, lam, cfg, warm=warm)
        info["flags"] = flags
        baseline = np.linalg.inv(
            eta_half + 1e-6 * np.eye(p) * np.mean(np.abs(np.trace(eta_half, axis1=1, axis2=2))) / p
        )
        obj = glasso_objective(eta_half, mult, lam, phi_half)
        ref = glasso_objective(eta_half, mult, lam, baseline)
        if obj > ref + max(1e-6, 1e-8 * abs(ref)) and not info["converged"]:
            raise SolverError("glasso ADMM failed to reach a competitive objective")
    phi = np.empty_like(eta)
    phi[half] = phi_half
    for j in range(freqs.n_units):
        if j not in set(half.tolist()):
            phi[j] = np.conj(phi[freqs.reflect_index(j)])
    return phi, info


def default_lambda_grid(eta: np.ndarray, freqs: FreqGrid, n_points: int = 8):
    """Log-spaced penalties from a 0-adjacent value up to the group-max."""
    half = freqs.half_indices()
    mult = freqs.multiplicities().astype(float)
    p = eta.shape[1]
    if p == 1:
        return np.array([0.0])
    iu, ju = np.triu_indices(p, 1)
    norms = np.sqrt(np.sum(mult[:, None] * np.abs(eta[half][:, iu, ju]) ** 2, axis=0))
    lam_max = float(norms.max())
    if lam_max <= 0:
        return np.array([0.0])
    # lam = 0 (closed-form inverse) anchors the dense end of the path
    return np.concatenate([
        [0.0],
        np.logspace(np.log10(lam_max * 1e-3), np.log10(lam_max), n_points - 1),
    ])


def glasso_df(n_units: int, bandwidth: int, p: int, n_groups: int) -> float:
    """Model complexity: effective frequencies times free parameters.

    J/(2r) approximates the number of independent frequencies under a
    bandwidth-r lag window; each surviving off-diagonal group spends two
    real parameters per frequency, the diagonal one.
    """
    return (n_units / (2.0 * bandwidth)) * (p + 2.0 * n_groups)


def aic_select(eta: np.ndarray, freqs: FreqGrid, bandwidth: int,
               lam_grid=None, admm_cfg: ADMMConfig = None):
    """Penalty selection by the Whittle AIC; returns (lam, Phi, info).

    The likelihood term plugs the eigen-matrix estimate into the Whittle
    quadratic form; the path is solved from the sparsest penalty down with
    warm starts.
    """
    if lam_grid is None:
        lam_grid = default_lambda_grid(eta, freqs)
    lam_grid = np.sort(np.asarray(lam_grid, dtype=float))[::-1]
    half = freqs.half_indices()
    mult = freqs.multiplicities().astype(float)
    eta_half = eta[half]
    p = eta.shape[1]
    best = None
    warm = None
    for lam in lam_grid:
        phi, info = joint_glasso(eta, freqs, float(lam), admm_cfg, warm=warm)
        warm = info.pop("warm", None)
        fit = 0.0
        for h, j in enumerate(half):
            sign, logdet = np.linalg.slogdet(phi[j])
            if sign <= 0:
                raise SolverError("AIC saw a non-PD precision matrix")
            fit += mult[h] * (np.trace(eta_half[h] @ phi[j]).real - logdet)
        df = glasso_df(freqs.n_units, bandwidth, p, info["n_offdiag_groups"])
        aic = fit + 2.0 * df
        if best is None or aic < best[0]:
            best = (aic, float(lam), phi, dict(info, aic=aic, df=df))
    _, lam_star, phi_star, info_star = best
    return lam_star, phi_star, info_star


def estimate_precisions(ems: EigenMatrixSet, bandwidth: int, lam_grid=None,
                        admm_cfg: ADMMConfig = None) -> PrecisionSet:
    """AIC-selected joint graphical Lasso for every component."""
    K = ems.n_components
    phis = np.empty_like(ems.matrices)
    lams = np.empty(K)
    diag = {}
    for k in range(K):
        grid_k = None if lam_grid is None else lam_grid
        lam_k, phi_k, info_k = aic_select(ems.matrices[k], ems.freqs,
                                          bandwidth, grid_k, admm_cfg)
        phis[k] = phi_k
        lams[k] = lam_k
        diag[k] = info_k
    return PrecisionSet(phis, ems.freqs, lams, diag)


# ----------------------------------------------------- known-graph variant

def _constrained_mle_single(S: np.ndarray, neighbors, tol=1e-7, max_sweeps=500):
    """Zero-constrained Gaussian MLE by cyclic regression over present edges.

    The classical modified-regression algorithm for a known undirected
    graph, run on one Hermitian PD matrix.
    """
    p = S.shape[0]
    W = S.copy()
    scale = max(float(np.max(np.abs(S))), 1e-300)
    for _ in range(max_sweeps):
        delta = 0.0
        for c in range(p):
            idx = [i for i in range(p) if i != c]
            nb = [i for i in idx if i in neighbors[c]]
            w_new = np.zeros(p - 1, dtype=complex)
            if nb:
                pos = [idx.index(i) for i in nb]
                W11 = W[np.ix_(idx, idx)]
                beta_nb = np.linalg.solve(W11[np.ix_(pos, pos)], S[nb, c])
                beta = np.zeros(p - 1, dtype=complex)
                beta[pos] = beta_nb
                w_new = W11 @ beta
            delta = max(delta, float(np.max(np.abs(W[idx, c] - w_new))))
            W[idx, c] = w_new
            W[c, idx] = np.conj(w_new)
        if delta < tol * scale:
            break
    phi = np.zeros_like(S)
    for c in range(p):
        idx = [i for i in range(p) if i != c]
        nb = [i for i in idx if i in neighbors[c]]
        beta = np.zeros(p - 1, dtype=complex)
        if nb:
            pos = [idx.index(i) for i in nb]
            W11 = W[np.ix_(idx, idx)]
            beta[pos] = np.linalg.solve(W11[np.ix_(pos, pos)], S[nb, c])
        quad = np.real(np.conj(beta) @ W[idx, c])
        theta_cc = 1.0 / np.real(S[c, c] - quad)
        phi[c, c] = theta_cc
        phi[idx, c] = -beta * theta_cc
        phi[c, idx] = np.conj(phi[idx, c])
    return (phi + phi.conj().T) / 2


def constrained_mle(eta: np.ndarray, freqs: FreqGrid, edges) -> np.ndarray:
    """Known-graph precision estimate per frequency (no penalty).

    ``edges`` holds unordered 0-based pairs; self-pairs are implicit.
    Entries outside the graph are exactly zero; the fitted covariance
    matches ``eta`` on the graph and the diagonal.
    """
    p = eta.shape[1]
    neighbors = {i: set() for i in range(p)}
    for (i1, i2) in edges:
        if i1 == i2:
            continue
        neighbors[i1].add(i2)
        neighbors[i2].add(i1)
    flags = []
    half = freqs.half_indices()
    eta_half = _ridge_repair(eta[half].copy(), flags, "ridge")
    phi = np.empty_like(eta)
    complete = all(len(neighbors[i]) == p - 1 for i in range(p))
    for h, j in enumerate(half):
        if complete:
            out = np.linalg.inv(eta_half[h])
            phi[j] = (out + out.conj().T) / 2
        else:
            phi[j] = _constrained_mle_single(eta_half[h], neighbors)
    half_set = set(half.tolist())
    for j in range(freqs.n_units):
        if j not in half_set:
            phi[j] = np.conj(phi[freqs.reflect_index(j)])
    return phi


def constrained_precisions(ems: EigenMatrixSet, edges) -> PrecisionSet:
    """Known-graph precision sets for every component."""
    K = ems.n_components
    phis = np.empty_like(ems.matrices)
    for k in range(K):
        phis[k] = constrained_mle(ems.matrices[k], ems.freqs, edges)
    return PrecisionSet(phis, ems.freqs, np.zeros(K), {"method": "known-graph"})


# ------------------------------------------------- partial spectra and PMI

def partial_spectrum(phi: np.ndarray, i1: int, i2: int) -> complex:
    """Partial cross-spectrum of a pair given all other series.

    ``-Phi[i1,i2] / (Phi[i1,i1] Phi[i2,i2] - Phi[i1,i2] Phi[i2,i1])`` for
    one precision matrix at one frequency.
    """
    if i1 == i2:
        raise InvalidInputError("partial spectrum needs two distinct series")
    denom = phi[i1, i1] * phi[i2, i2] - phi[i1, i2] * phi[i2, i1]
    if abs(denom) < 1e-300:
        raise DegeneratePrecisionError("degenerate precision submatrix")
    return complex(-phi[i1, i2] / denom)


def partial_mutual_info(precisions: PrecisionSet):
    """Frequency-aggregated partial dependence strength per pair.

    I[i1,i2] = -(1/2pi) sum_k sum_j log(1 - |Phi[i1,i2]|^2 /
    (Phi[i1,i1] Phi[i2,i2])).  Returns (pmi matrix, clamped flag).
    """
    mats = precisions.matrices
    K, J, p, _ = mats.shape
    diag = np.real(np.einsum("kjii->kji", mats))
    ratio = np.abs(mats) ** 2 / (diag[:, :, :, None] * diag[:, :, None, :])
    off = ~np.eye(p, dtype=bool)
    clamped = bool(np.any(ratio[:, :, off] >= 1.0 - 1e-12))
    ratio = np.minimum(ratio, 1.0 - 1e-12)
    pmi = -np.sum(np.log1p(-ratio), axis=(0, 1)) / TWO_PI
    np.fill_diagonal(pmi, 0.0)
    pmi = (pmi + pmi.T) / 2
    return pmi, clamped


def threshold_graph(pmi: np.ndarray, tau: float) -> list:
    """Edges whose partial mutual information exceeds tau."""
    if tau < 0:
        raise InvalidInputError("threshold must be nonnegative")
    p = pmi.shape[0]
    return [(i1, i2) for i1 in range(p) for i2 in range(i1 + 1, p)
            if pmi[i1, i2] > tau]


def estimate_graph(precisions: PrecisionSet, tau: float = 0.05) -> GraphEstimate:
    """Partial mutual information plus thresholded edge set."""
    pmi, clamped = partial_mutual_info(precisions)
    return GraphEstimate(pmi, threshold_graph(pmi, tau), tau, clamped)
