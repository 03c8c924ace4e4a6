"""Frequency-domain covariance structure of a centered functional panel.

The pipeline is: pooled lag covariances -> Bartlett lag-window spectral
density kernels on the Whittle frequency grid -> per-frequency eigenpairs
(quadrature metric) -> phase alignment and conjugate reflection ->
functional filters (inverse Fourier coefficients of the eigenfunctions)
and eigen-matrices (per-component cross-spectra of the score projections).

Eigenfunctions are stored so that a kernel discretizes as
``F[z, z'] = sum_k nu_k * conj(psi_k[z]) * psi_k[z']``, matching the
orientation used by the filter transform and the score projections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, PhaseAlignmentError
from .funcdata import FreqGrid, TimeGrid

TWO_PI = 2.0 * np.pi


def default_bandwidth(n_units: int) -> int:
    """Lag-window bandwidth r = floor(J^0.4)."""
    return max(1, int(np.floor(n_units ** 0.4)))


@dataclass
class SpectralConfig:
    """Tuning constants for the spectral stage.

    ``filter_energy_threshold`` is the cumulative-energy fraction used to
    truncate the filter lag range; 0.98 keeps lag 1 alive when the data are
    genuinely dynamic while still collapsing to lag 0 on static data.
    """

    bandwidth: int
    n_components: int = 8
    max_lag: int = 4
    filter_energy_threshold: float = 0.98

    def __post_init__(self):
        if self.bandwidth < 1:
            raise InvalidInputError("bandwidth must be a positive integer")
        if not 0.0 < self.filter_energy_threshold < 1.0 + 1e-12:
            raise InvalidInputError("filter energy threshold must be in (0, 1]")

    @classmethod
    def for_panel(cls, n_units: int, n_points: int, **kwargs) -> "SpectralConfig":
        kwargs.setdefault("bandwidth", default_bandwidth(n_units))
        kwargs.setdefault("max_lag", min(kwargs["bandwidth"], n_units // 2))
        cfg = cls(**kwargs)
        cfg.n_components = min(cfg.n_components, n_points)
        return cfg


@dataclass
class EigenSystem:
    """Aligned per-frequency eigenpairs of the pooled spectral kernel."""

    eigenvalues: np.ndarray      # K x J, nonnegative
    funcs: np.ndarray            # K x J x Z complex eigenfunctions
    grid: TimeGrid
    freqs: FreqGrid
    warnings: list = field(default_factory=list)

    @property
    def n_components(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass
class FunctionalFilterSet:
    """Real filter curves phi_kl on the grid, |l| <= L_k per component."""

    filters: list                # per k: (2*L_k + 1) x Z real array
    lag_ranges: list             # per k: L_k
    grid: TimeGrid
    eigensystem: EigenSystem = None

    @property
    def n_components(self) -> int:
        return len(self.filters)

    def lags(self, k: int) -> np.ndarray:
        L = self.lag_ranges[k]
        return np.arange(-L, L + 1)


@dataclass
class EigenMatrixSet:
    """Hermitian PSD p x p spectral matrices of the component scores."""

    matrices: np.ndarray         # K x J x p x p complex
    freqs: FreqGrid
    trace_gap: float = 0.0       # max |tr eta_k - nu_k| before PSD clamping

    @property
    def n_components(self) -> int:
        return self.matrices.shape[0]

    @property
    def p(self) -> int:
        return self.matrices.shape[2]


@dataclass
class StaticEigenbasis:
    """Orthonormal eigenfunctions of the pooled lag-0 covariance."""

    funcs: np.ndarray            # K x Z real
    eigenvalues: np.ndarray      # K
    grid: TimeGrid

    @property
    def n_components(self) -> int:
        return self.funcs.shape[0]

    def as_eigensystem(self, freqs: FreqGrid) -> EigenSystem:
        """Frequency-flat eigensystem (psi_k constant in theta).

        Lets the eigen-matrix estimator run on static-basis projections.
        """
        J = freqs.n_units
        K = self.n_components
        funcs = np.broadcast_to(
            self.funcs[:, None, :], (K, J, self.funcs.shape[1])
        ).astype(complex)
        evals = np.broadcast_to(self.eigenvalues[:, None] / TWO_PI, (K, J)).copy()
        return EigenSystem(evals, funcs.copy(), self.grid, freqs)

    def as_filter_set(self) -> FunctionalFilterSet:
        """Static basis as a lag-0 filter family."""
        return FunctionalFilterSet(
            [self.funcs[k][None, :].copy() for k in range(self.n_components)],
            [0] * self.n_components,
            self.grid,
        )


# ----------------------------------------------------------------- kernels

def pooled_autocov(centered: np.ndarray, lag: int) -> np.ndarray:
    """Lag-g covariance kernel pooled over series.

    ``sum_i (1/J) sum_{j=1}^{J-g} eps_i(j+g) (x) eps_i(j)`` for g >= 0;
    negative lags return the transpose.
    """
    p, J, Z = centered.shape
    if abs(lag) >= J:
        raise InvalidInputError(f"lag {lag} out of range for J={J}")
    if lag < 0:
        return pooled_autocov(centered, -lag).T
    lead = centered[:, lag:, :].reshape(-1, Z)
    base = centered[:, : J - lag, :].reshape(-1, Z)
    return (lead.T @ base) / J


def lag_window_kernel(autocovs, bandwidth: int, theta: float) -> np.ndarray:
    """Bartlett lag-window spectral density kernel at one frequency.

    ``autocovs[g]`` must hold the pooled lag-g covariance for g = 0..bandwidth.
    The result is Hermitian by construction because C(-g) = C(g)^T.
    """
    r = int(bandwidth)
    if len(autocovs) < r + 1:
        raise InvalidInputError("need pooled autocovariances for g = 0..r")
    kern = np.array(autocovs[0], dtype=complex)
    for g in range(1, r):
        w = 1.0 - g / r
        phase = np.exp(1j * g * theta)
        kern += w * (autocovs[g] * phase + autocovs[g].T * np.conj(phase))
    return kern / TWO_PI


def _kernel_stack(autocovs, bandwidth, thetas):
    """Lag-window kernels for many frequencies at once: (n, Z, Z) complex."""
    r = int(bandwidth)
    Z = autocovs[0].shape[0]
    out = np.empty((len(thetas), Z, Z), dtype=complex)
    base = autocovs[0] / TWO_PI
    out[:] = base
    for g in range(1, r):
        w = (1.0 - g / r) / TWO_PI
        phases = np.exp(1j * g * np.asarray(thetas))
        out += w * (phases[:, None, None] * autocovs[g][None, :, :])
        out += w * (np.conj(phases)[:, None, None] * autocovs[g].T[None, :, :])
    return out


def eigendecompose_kernel(kernel: np.ndarray, grid: TimeGrid, n_components: int):
    """Leading eigenpairs of a Hermitian kernel in the quadrature metric.

    Solves the weighted problem via W^(1/2) F W^(1/2); eigenvalues are
    clamped at zero and sorted descending; eigenfunctions have unit
    quadrature norm and satisfy ``F ~ sum_k nu_k x_k x_k^H``.
    """
    kernel = np.asarray(kernel)
    scale = max(np.max(np.abs(kernel)), 1e-300)
    if np.max(np.abs(kernel - kernel.conj().T)) > 1e-8 * scale:
        raise InvalidInputError("kernel is not Hermitian within tolerance")
    s = np.sqrt(grid.weights)
    A = s[:, None] * kernel * s[None, :]
    A = (A + A.conj().T) / 2
    Z = grid.n_points
    K = min(n_components, Z)
    if K <= Z // 3 and Z >= 60:
        # only the leading pairs are wanted: let LAPACK stop early
        from scipy.linalg import eigh as scipy_eigh

        evals, evecs = scipy_eigh(A, subset_by_index=[Z - K, Z - 1])
    else:
        evals, evecs = np.linalg.eigh(A)
    order = np.argsort(evals)[::-1][:K]
    evals = np.clip(evals[order], 0.0, None)
    funcs = (evecs[:, order] / s[:, None]).T
    norms = np.sqrt(np.sum(grid.weights * np.abs(funcs) ** 2, axis=1))
    funcs = funcs / norms[:, None]
    if not np.iscomplexobj(kernel):
        funcs = funcs.real
    return evals, funcs


# ----------------------------------------------------- alignment machinery

def _quad_inner(f, g, weights):
    return np.sum(weights * np.conj(f) * g)


def _rotate_to_real(vec, weights):
    """Remove the global phase of an (almost-real-up-to-phase) eigenvector."""
    m = np.argmax(np.abs(vec))
    a = vec[m]
    if np.abs(a) > 0:
        vec = vec * (np.conj(a) / np.abs(a))
    residue = float(np.max(np.abs(vec.imag)))
    vec = vec.real.astype(complex)
    nrm = np.sqrt(np.sum(weights * np.abs(vec) ** 2))
    return vec / nrm, residue


def align_phases(eigenvalues_half, funcs_half, grid: TimeGrid, freqs: FreqGrid,
                 overlap_tol: float = 1e-6) -> EigenSystem:
    """Fix the per-frequency phase indeterminacy and reflect to the full grid.

    Within each component the eigenfunction at the first frequency is rotated
    so its overlap with the constant function is real nonnegative (first grid
    coordinate as fallback); successive frequencies are rotated so adjacent
    overlaps have nonnegative real part.  At the self-conjugate frequencies
    (pi for even J, and 2*pi) the eigenfunction is made exactly real, with
    the sign chosen for continuity.  Frequencies above pi are filled by
    conjugate reflection, which makes the filter transform exactly real.
    """
    J = freqs.n_units
    half = freqs.half_indices()
    thetas = freqs.frequencies
    K, n_half, Z = funcs_half.shape
    if n_half != half.size:
        raise InvalidInputError("eigensystem does not cover the half grid")
    w = grid.weights

    funcs = np.zeros((K, J, Z), dtype=complex)
    evals = np.zeros((K, J))
    warnings = []
    self_conj = {j for j in half if np.isclose(thetas[j], np.pi)
                 or np.isclose(thetas[j], TWO_PI)}

    for k in range(K):
        aligned = {}
        prev = None
        for pos, j in enumerate(half):
            vec = funcs_half[k, pos].copy()
            if j == J - 1:
                continue  # the wrap-around point is handled last
            if prev is None:
                o = _quad_inner(vec, np.ones(Z), w)  # rotating by o/|o| makes
                if np.abs(o) < 1e-8:                 # <psi, 1> real nonnegative
                    o = np.conj(vec[0])              # fallback: first coordinate
                if np.abs(o) > 0:
                    vec = vec * (o / np.abs(o))
            else:
                o = _quad_inner(prev, vec, w)
                if np.abs(o) < overlap_tol:
                    warnings.append(
                        (k, float(thetas[j]), float(np.abs(o)),
                         "near-zero adjacent overlap; eigenvalue crossing suspected")
                    )
                else:
                    vec = vec * (np.conj(o) / np.abs(o))
            if j in self_conj:
                vec, residue = _rotate_to_real(vec, w)
                if prev is not None and np.real(_quad_inner(prev, vec, w)) < 0:
                    vec = -vec
                if residue > 1e-6:
                    warnings.append((k, float(thetas[j]), residue,
                                     "self-conjugate eigenfunction not real"))
            aligned[j] = vec
            prev = vec
        # theta = 2*pi reflects theta = 0+, so align it against theta_1
        j_last = J - 1
        pos_last = int(np.where(half == j_last)[0][0])
        vec, residue = _rotate_to_real(funcs_half[k, pos_last].copy(), w)
        if residue > 1e-6:
            warnings.append((k, float(thetas[j_last]), residue,
                             "self-conjugate eigenfunction not real"))
        anchor = aligned.get(0)
        if anchor is not None and np.real(_quad_inner(vec, anchor, w)) < 0:
            vec = -vec
        aligned[j_last] = vec

        for pos, j in enumerate(half):
            funcs[k, j] = aligned[j]
            evals[k, j] = eigenvalues_half[k, pos]
        for j in range(J):
            if j not in aligned:
                src = freqs.reflect_index(j)
                funcs[k, j] = np.conj(funcs[k, src])
                evals[k, j] = evals[k, src]

    return EigenSystem(evals, funcs, grid, freqs, warnings)


def estimate_eigensystem(centered: np.ndarray, grid: TimeGrid,
                         config: SpectralConfig) -> EigenSystem:
    """Pooled-kernel eigensystem of a centered panel, aligned on the full grid."""
    p, J, Z = centered.shape
    freqs = FreqGrid(J)
    r = config.bandwidth
    autocovs = [pooled_autocov(centered, g) for g in range(min(r, J - 1) + 1)]
    half = freqs.half_indices()
    thetas = freqs.frequencies[half]
    K = min(config.n_components, Z)
    evals_half = np.empty((K, half.size))
    funcs_half = np.empty((K, half.size, Z), dtype=complex)
    for chunk in range(0, half.size, 64):
        kernels = _kernel_stack(autocovs, r, thetas[chunk:chunk + 64])
        for t, kern in enumerate(kernels):
            ev, x = eigendecompose_kernel(kern, grid, K)
            evals_half[:, chunk + t] = ev
            # stored orientation: kernel = sum nu conj(psi) psi^T, so psi = conj(x)
            funcs_half[:, chunk + t, :] = np.conj(x)
    return align_phases(evals_half, funcs_half, grid, freqs)


# ------------------------------------------------------------------ filters

def dynamic_filter_bank(es: EigenSystem, max_lag: int):
    """Inverse Fourier coefficients of the eigenfunctions for |l| <= max_lag.

    Returns (filters, residue): a (K, 2*max_lag+1, Z) real array ordered
    l = -max_lag..max_lag, and the largest imaginary residue discarded.
    """
    thetas = es.freqs.frequencies
    lags = np.arange(-max_lag, max_lag + 1)
    phases = np.exp(-1j * np.outer(lags, thetas))  # (2L+1, J)
    raw = np.einsum("lj,kjz->klz", phases, es.funcs) / es.freqs.n_units
    residue = float(np.max(np.abs(raw.imag)))
    return raw.real, residue


def compute_filters(es: EigenSystem, config: SpectralConfig) -> FunctionalFilterSet:
    """Functional filters with per-component lag truncation.

    L_k is the smallest L whose cumulative filter energy reaches the
    configured fraction of the total over |l| <= max_lag.
    """
    L_max = min(config.max_lag, es.freqs.n_units // 2)
    bank, residue = dynamic_filter_bank(es, L_max)
    if residue > 1e-4:
        raise PhaseAlignmentError(
            f"filter imaginary residue {residue:.2e}; phase alignment failed"
        )
    w = es.grid.weights
    energies = np.sum(w[None, None, :] * bank ** 2, axis=2)  # K x (2L+1)
    filters = []
    lag_ranges = []
    for k in range(bank.shape[0]):
        total = energies[k].sum()
        L_k = L_max
        for L in range(0, L_max + 1):
            cum = energies[k, L_max - L: L_max + L + 1].sum()
            if cum >= config.filter_energy_threshold * total:
                L_k = L
                break
        filters.append(bank[k, L_max - L_k: L_max + L_k + 1].copy())
        lag_ranges.append(L_k)
    return FunctionalFilterSet(filters, lag_ranges, es.grid, es)


# ------------------------------------------------------------ eigen-matrices

def score_projections(centered: np.ndarray, es: EigenSystem,
                      half_only: bool = True) -> np.ndarray:
    """Projections a[k, h, i, j] = <psi_k(.|theta_h), eps_ij> (quadrature)."""
    w = es.grid.weights
    funcs = es.funcs
    if half_only:
        funcs = funcs[:, es.freqs.half_indices(), :]
    weighted = np.conj(funcs) * w[None, None, :]
    return np.einsum("khz,ijz->khij", weighted, centered)


def eigenmatrices(centered: np.ndarray, es: EigenSystem,
                  bandwidth: int) -> EigenMatrixSet:
    """Bartlett cross-spectra of the per-frequency score projections.

    Built without materializing p^2 cross-kernels: for each component and
    frequency, the lagged products of the projections are Bartlett-weighted
    into ``eta_k(theta)``, then symmetrized and clamped to PSD.
    """
    p, J, Z = centered.shape
    freqs = es.freqs
    half = freqs.half_indices()
    thetas = freqs.frequencies
    r = min(bandwidth, J - 1)
    A = score_projections(centered, es, half_only=True)  # K x H x p x J
    K = A.shape[0]
    mats = np.zeros((K, J, p, p), dtype=complex)
    trace_gap = 0.0
    for k in range(K):
        for h, j_idx in enumerate(half):
            B = A[k, h]                                   # p x J
            eta = (np.conj(B) @ B.T) / J                  # lag-0 term
            for g in range(1, r):
                wg = 1.0 - g / r
                M = (np.conj(B[:, g:]) @ B[:, : J - g].T) / J
                ph = np.exp(1j * g * thetas[j_idx])
                eta += wg * (ph * M + np.conj(ph) * M.conj().T)
            eta /= TWO_PI
            eta = (eta + eta.conj().T) / 2
            trace_gap = max(trace_gap,
                            abs(float(np.trace(eta).real) - es.eigenvalues[k, j_idx]))
            evals, evecs = np.linalg.eigh(eta)
            if evals[0] < 0:
                eta = (evecs * np.clip(evals, 0.0, None)) @ evecs.conj().T
                eta = (eta + eta.conj().T) / 2
            mats[k, j_idx] = eta
        half_set = set(half.tolist())
        for j in range(J):
            if j not in half_set:
                mats[k, j] = np.conj(mats[k, freqs.reflect_index(j)])
    return EigenMatrixSet(mats, freqs, trace_gap)


def static_eigenbasis(centered: np.ndarray, grid: TimeGrid,
                      n_components: int) -> StaticEigenbasis:
    """Top eigenfunctions of the pooled lag-0 covariance (quadrature metric)."""
    lag0 = pooled_autocov(centered, 0)
    lag0 = (lag0 + lag0.T) / 2
    evals, funcs = eigendecompose_kernel(lag0, grid, n_components)
    funcs = np.real(funcs)
    for k in range(funcs.shape[0]):  # deterministic sign: <phi_k, 1> >= 0
        o = float(np.sum(grid.weights * funcs[k]))
        if abs(o) < 1e-8:
            o = float(funcs[k, 0])
        if o < 0:
            funcs[k] = -funcs[k]
    return StaticEigenbasis(funcs, evals, grid)
