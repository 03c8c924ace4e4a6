"""Score extraction and curve reconstruction.

Three routes produce scores: filtered integration of the pre-smoothed
curves (the frequency-domain baseline, biased near the boundaries because
curves outside the observation window are taken as zero), static
projection onto an eigenbasis, and maximization of the conditional score
density, where the Gaussian data term is combined with a Whittle
pseudo-likelihood prior built from the precision sets.  The objective is
concave quadratic, so gradient ascent with an exact line search converges
without step-size tuning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SolverError
from .funcdata import FreqGrid, TimeGrid
from .graphical import PrecisionSet
from .spectral import FunctionalFilterSet, StaticEigenbasis

TWO_PI = 2.0 * np.pi


@dataclass
class ScoreArray:
    """Scores xi[i, j', k] on the per-component lag-extended time axis.

    Component k spans time units j' = 1-L_k .. J+L_k, stored as a
    (p, J + 2*L_k) array; column L_k + (j-1) holds unit j.
    """

    values: list          # per k: (p, J + 2 L_k) real
    lag_ranges: list      # per k: L_k
    n_units: int

    def __post_init__(self):
        for k, arr in enumerate(self.values):
            if arr.shape[1] != self.n_units + 2 * self.lag_ranges[k]:
                raise InvalidInputError("score array length does not match lags")
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError("scores contain non-finite values")

    @property
    def n_components(self) -> int:
        return len(self.values)

    @property
    def p(self) -> int:
        return self.values[0].shape[0]

    def interior(self, k: int) -> np.ndarray:
        """Columns for units j = 1..J of component k."""
        L = self.lag_ranges[k]
        return self.values[k][:, L: L + self.n_units]

    def copy(self) -> "ScoreArray":
        return ScoreArray([v.copy() for v in self.values],
                          list(self.lag_ranges), self.n_units)


def whittle_dft_vectors(n_units: int, lag_range: int) -> np.ndarray:
    """Columns rho_k(theta_j): entries exp(-i m theta_j)/sqrt(2 pi (J+2L)).

    Shape (J + 2L, J); every column has squared norm 1/(2 pi).
    """
    M = n_units + 2 * lag_range
    thetas = FreqGrid(n_units).frequencies
    return np.exp(-1j * np.outer(np.arange(1, M + 1), thetas)) / np.sqrt(TWO_PI * M)


class WhittleCache:
    """Per-component DFT vectors and transformed scores."""

    def __init__(self, n_units: int, lag_range: int):
        self.rho = whittle_dft_vectors(n_units, lag_range)

    def transform(self, scores_k: np.ndarray) -> np.ndarray:
        """xi_tilde(theta_j) columns for a (p, J+2L) score block."""
        return scores_k @ self.rho


def _logdet_pd(stack: np.ndarray) -> float:
    """Total log-determinant of a Hermitian stack; rejects non-PD matrices."""
    evals = np.linalg.eigvalsh(stack)
    if evals.min() <= 0:
        raise InvalidInputError(
            "Whittle likelihood needs positive definite precisions")
    return float(np.sum(np.log(evals)))


def whittle_loglik(scores_k: np.ndarray, phi_k: np.ndarray,
                   cache: WhittleCache = None) -> float:
    """Log-Whittle likelihood of one component's score block.

    ``-(1/2) sum_j [xi~(theta_j)^* Phi(theta_j) xi~(theta_j)
    - logdet Phi(theta_j)]``; the quadratic form is real by Hermitian
    symmetry and its real part is taken.
    """
    J = phi_k.shape[0]
    p, M = scores_k.shape
    if cache is None:
        cache = WhittleCache(J, (M - J) // 2)
    logdet_total = _logdet_pd(phi_k)
    xt = cache.transform(scores_k)                       # p x J
    quad = np.einsum("aj,jab,bj->", np.conj(xt), phi_k, xt).real
    return -0.5 * (quad - logdet_total)


class ConditionalScoreModel:
    """Gaussian data term plus Whittle score prior, as a function of scores.

    The static variant is the special case of lag range zero with the
    eigenbasis as the filter family.
    """

    def __init__(self, observations: np.ndarray, noise_var: np.ndarray,
                 means: np.ndarray, filters: FunctionalFilterSet,
                 precisions: PrecisionSet):
        p, J, Z = observations.shape
        if np.any(noise_var <= 0):
            raise InvalidInputError("noise variances must be positive")
        if filters.grid.n_points != Z:
            raise InvalidInputError("filters and observations use different grids")
        if precisions.matrices.shape[1] != J:
            raise InvalidInputError("precision sets must cover the Whittle grid")
        if precisions.n_components < filters.n_components:
            raise InvalidInputError("need one precision set per component")
        self.obs = observations
        self.noise_var = noise_var
        self.detrended = observations - means[:, None, :]
        self.filters = filters
        self.phi = precisions.matrices
        self.caches = [WhittleCache(J, L) for L in filters.lag_ranges]
        self.logdets = [_logdet_pd(self.phi[k])
                        for k in range(filters.n_components)]
        self.J = J

    def model_values(self, scores: ScoreArray, n_components=None) -> np.ndarray:
        """sum_k sum_l phi_kl(t_z) xi_{i,(j+l),k} on the observation grid."""
        K = self.filters.n_components if n_components is None else n_components
        p = scores.p
        Z = self.filters.grid.n_points
        out = np.zeros((p, self.J, Z))
        for k in range(K):
            L = self.filters.lag_ranges[k]
            block = scores.values[k]
            for li, lag in enumerate(range(-L, L + 1)):
                out += (block[:, L + lag: L + lag + self.J, None]
                        * self.filters.filters[k][li][None, None, :])
        return out

    def objective(self, scores: ScoreArray) -> float:
        resid = self.detrended - self.model_values(scores)
        data = -0.5 * float(
            np.sum(resid ** 2 / self.noise_var[:, None, None])
        )
        prior = 0.0
        for k in range(self.filters.n_components):
            xt = self.caches[k].transform(scores.values[k])
            quad = np.einsum("aj,jab,bj->", np.conj(xt), self.phi[k], xt).real
            prior += -0.5 * (quad - self.logdets[k])
        return data + prior

    def gradient(self, scores: ScoreArray) -> list:
        resid = (self.detrended - self.model_values(scores))
        resid = resid / self.noise_var[:, None, None]
        grads = []
        for k in range(self.filters.n_components):
            L = self.filters.lag_ranges[k]
            g = np.zeros_like(scores.values[k])
            for li, lag in enumerate(range(-L, L + 1)):
                proj = np.einsum("ijz,z->ij", resid, self.filters.filters[k][li])
                g[:, L + lag: L + lag + self.J] += proj
            cache = self.caches[k]
            xt = cache.transform(scores.values[k])
            v = np.einsum("jab,bj->aj", self.phi[k], xt)
            g -= np.real(v @ np.conj(cache.rho).T)
            grads.append(g)
        return grads

    def extract(self, init: ScoreArray, max_iter: int = 500,
                rel_tol: float = 1e-8):
        """Maximize the conditional density by exact-line-search ascent."""
        scores = init.copy()
        obj = self.objective(scores)
        info = {"iterations": 0, "converged": False, "objective": obj}
        for it in range(max_iter):
            g = self.gradient(scores)
            gg = sum(float(np.sum(gk * gk)) for gk in g)
            if gg < 1e-30:
                info["converged"] = True
                break
            probe = scores.copy()
            for k, gk in enumerate(g):
                probe.values[k] += gk
            g_probe = self.gradient(probe)
            # H g = grad(x + g) - grad(x) exactly, the objective being quadratic
            curv = sum(float(np.sum(gk * (gk - gpk)))
                       for gk, gpk in zip(g, g_probe))
            if curv <= 0:
                raise SolverError("score objective is not concave along gradient")
            step = gg / curv
            for k, gk in enumerate(g):
                scores.values[k] += step * gk
            new_obj = self.objective(scores)
            if new_obj < obj - 1e-10 * max(1.0, abs(obj)):
                raise SolverError("score ascent decreased the objective")
            info["iterations"] = it + 1
            if abs(new_obj - obj) <= rel_tol * max(1.0, abs(obj)):
                obj = new_obj
                info["converged"] = True
                break
            obj = new_obj
        info["objective"] = obj
        return scores, info


# ------------------------------------------------------------- public ops

def integrate_scores(centered: np.ndarray, filters: FunctionalFilterSet) -> ScoreArray:
    """Integration scores xi_{ij'k} = sum_l <eps_{i,(j'-l)}, phi_kl>.

    Curves outside units 1..J enter as zero, reproducing the boundary bias
    of the plain frequency-domain estimator.
    """
    p, J, Z = centered.shape
    if filters.grid.n_points != Z:
        raise InvalidInputError("filters and curves use different grids")
    w = filters.grid.weights
    values = []
    for k in range(filters.n_components):
        L = filters.lag_ranges[k]
        out = np.zeros((p, J + 2 * L))
        for li, lag in enumerate(range(-L, L + 1)):
            proj = np.einsum("ijz,z->ij", centered, w * filters.filters[k][li])
            out[:, L + lag: L + lag + J] += proj
        values.append(out)
    return ScoreArray(values, list(filters.lag_ranges), J)


def static_scores(centered: np.ndarray, basis: StaticEigenbasis) -> ScoreArray:
    """Projection scores onto a static eigenbasis (lag range zero)."""
    return integrate_scores(centered, basis.as_filter_set())


def conditional_objective(scores: ScoreArray, observations: np.ndarray,
                          noise_var: np.ndarray, means: np.ndarray,
                          filters: FunctionalFilterSet,
                          precisions: PrecisionSet) -> float:
    """Log-conditional density of the scores given the observed panel."""
    model = ConditionalScoreModel(observations, noise_var, means, filters,
                                  precisions)
    return model.objective(scores)


def extract_scores(observations: np.ndarray, noise_var: np.ndarray,
                   means: np.ndarray, filters: FunctionalFilterSet,
                   precisions: PrecisionSet, init: ScoreArray,
                   max_iter: int = 500, rel_tol: float = 1e-8):
    """Graph-aware score extraction; returns (scores, info).

    ``info['converged']`` is False when the iteration cap was hit.
    """
    model = ConditionalScoreModel(observations, noise_var, means, filters,
                                  precisions)
    return model.extract(init, max_iter=max_iter, rel_tol=rel_tol)


def reconstruct_centered(filters: FunctionalFilterSet, scores: ScoreArray,
                         n_components=None) -> np.ndarray:
    """Centered reconstruction sum_k sum_l phi_kl(t_z) xi_{i,(j+l),k}."""
    K = filters.n_components if n_components is None else min(
        n_components, filters.n_components)
    p = scores.p
    J = scores.n_units
    Z = filters.grid.n_points
    out = np.zeros((p, J, Z))
    for k in range(K):
        L = filters.lag_ranges[k]
        block = scores.values[k]
        for li, lag in enumerate(range(-L, L + 1)):
            out += (block[:, L + lag: L + lag + J, None]
                    * filters.filters[k][li][None, None, :])
    return out


def reconstruct(means: np.ndarray, filters: FunctionalFilterSet,
                scores: ScoreArray, n_components=None) -> np.ndarray:
    """Reconstructed curves mu_i(t_z) plus the truncated expansion."""
    return means[:, None, :] + reconstruct_centered(filters, scores, n_components)
