"""Reconstructing noisy functional panels: graph-aware vs plain scores.

Draws a 30-series panel whose per-unit curves are driven by four vector
AR(1) score processes over a sparse partial-correlation graph, then
reconstructs the latent curves with the plain frequency-domain method
(WDFPCA: integration scores) and the graph-aware one (GDFPCA: scores that
maximize the Whittle-substituted conditional density).

Run:  python demos/01_simulate_and_reconstruct.py
"""

import numpy as np

from gdfpca import FitConfig, MFTSObservations, SimConfig, fit, generate, nmse

cfg = SimConfig(p=30, J=40, kappa=3.0, L=1, seed=1)
truth = generate(cfg)
print(f"panel: p={cfg.p} series, J={cfg.J} units, Z={cfg.Z} grid points, "
      f"{len(truth.edges)} graph edges, SNR 5")

obs = MFTSObservations(truth.observations, truth.grid)
centered_truth = truth.curves - truth.curves.mean(axis=1, keepdims=True)

for method in ("WSFPCA", "WDFPCA", "GDFPCA"):
    result = fit(method, obs, FitConfig())
    errs = {q: nmse(centered_truth, result.centered_reconstruction(q),
                    truth.grid) for q in (1, 2, 3, 4)}
    picked = result.selected.get("L", "-")
    print(f"{method:>7}: K={result.selected['K']} L={picked} | NMSE(q) "
          + "  ".join(f"q={q}: {v:6.2f}%" for q, v in errs.items()))

print("\nGDFPCA shares one filter set across series and lets the graph "
      "shrink the scores;\nits NMSE(4) should be the smallest line above.")
