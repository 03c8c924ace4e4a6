"""Lag-window spectral kernels, eigenfunctions, and functional filters.

A single AR(1) score stream rides one fixed curve; the Bartlett lag-window
kernel projected back onto that curve must trace the analytic AR(1)
spectrum 1/(2 pi |1 - rho e^{i theta}|^2).  The second half estimates a
full eigensystem on a multivariate panel and checks the filter facts:
unit total energy (Parseval) and fast decay across lags.

Run:  python demos/02_spectral_estimation.py
"""

import numpy as np

from gdfpca import (
    MFTSObservations,
    SimConfig,
    SpectralConfig,
    TimeGrid,
    generate,
    lag_window_kernel,
    pooled_autocov,
    presmooth_panel,
    estimate_eigensystem,
)
from gdfpca.simulate import ar1_spectrum_factor
from gdfpca.spectral import default_bandwidth, dynamic_filter_bank

# --- scalar AR(1) against the analytic spectrum --------------------------
rho, J, Z = 0.5, 2000, 16
rng = np.random.default_rng(0)
grid = TimeGrid.regular(Z)
phi = np.sin(2 * np.pi * grid.points) + 0.4
phi /= np.sqrt(np.sum(grid.weights * phi ** 2))
xi = np.empty(J)
xi[0] = rng.normal() / np.sqrt(1 - rho ** 2)
for j in range(1, J):
    xi[j] = rho * xi[j - 1] + rng.normal()
panel = (xi[:, None] * phi[None, :])[None, :, :]

r = default_bandwidth(J)
autocovs = [pooled_autocov(panel, g) for g in range(r + 1)]
w = grid.weights
print(f"AR(1) rho={rho}, J={J}, bandwidth r={r}")
print(f"{'theta':>6} {'projected':>10} {'analytic':>10}")
for theta in (0.0, 0.8, 1.6, 2.4, np.pi):
    kern = lag_window_kernel(autocovs, r, theta)
    proj = np.real((w * phi) @ kern @ (w * phi))
    print(f"{theta:6.2f} {proj:10.4f} {ar1_spectrum_factor(rho, theta):10.4f}")

# --- filters of a multivariate dynamic panel ------------------------------
cfg = SimConfig(p=20, J=60, kappa=0.0, L=1, seed=3)
truth = generate(cfg)
sm = presmooth_panel(MFTSObservations(truth.observations, truth.grid))
es = estimate_eigensystem(sm.centered, truth.grid,
                          SpectralConfig.for_panel(cfg.J, cfg.Z,
                                                   n_components=4))
bank, residue = dynamic_filter_bank(es, cfg.J // 2)
wq = truth.grid.weights
energies = np.sum(wq[None, None, :] * bank ** 2, axis=2)
period = energies[:, energies.shape[1] - cfg.J:]
print(f"\nfilter bank: imaginary residue {residue:.1e} (must be ~0)")
print("per-component total filter energy (Parseval, one lag period):",
      np.round(period.sum(axis=1), 8))
mid = energies.shape[1] // 2
print("component-1 lag energies around l=0:",
      np.round(energies[0, mid - 2: mid + 3], 4),
      "  (the generator spends ~96.5% at l=0 and ~1.8% at l=+-1)")
