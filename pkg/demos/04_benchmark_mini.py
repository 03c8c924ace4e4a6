"""A miniature of the reconstruction benchmark table.

Runs a handful of Monte Carlo replicates per setting (the full benchmark
lives behind `gdfpca bench`) and prints mean NMSE(4) with standard errors.
Replicates use counter-based seed streams, so the numbers are independent
of execution order.

Run:  python demos/04_benchmark_mini.py
"""

import numpy as np

from gdfpca.cli import bench_replicate

REPS = 5
METHODS = ("SFPCA", "WSFPCA", "WDFPCA", "GDFPCA")

print(f"{REPS} replicates per setting; mean NMSE(4) % (se)")
header = f"{'setting':>18}" + "".join(f"{m:>16}" for m in METHODS)
print(header)
for (p, J, kappa) in ((10, 20, 0.0), (10, 20, 3.0), (10, 40, 3.0)):
    acc = {m: [] for m in METHODS}
    for rep in range(REPS):
        rows = bench_replicate((p, J, kappa, "baseline", METHODS, (4,),
                                2024, rep))
        for m, _, v in rows:
            acc[m].append(v)
    cells = []
    for m in METHODS:
        vals = np.asarray(acc[m])
        cells.append(f"{vals.mean():7.2f} ({vals.std(ddof=1)/np.sqrt(REPS):4.2f})")
    print(f"  p={p} J={J} k={kappa:<3g}" + "".join(f"{c:>16}" for c in cells))
print("\nordering to look for: GDFPCA < WDFPCA and WSFPCA < SFPCA")
