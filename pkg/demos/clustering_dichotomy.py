"""Extremal index at three kinds of target point.

A typical point gives isolated exceedances (EI near 1), a repelling periodic
point gives geometric clusters with EI = 1 - 1/|Df^p|, and the neutral fixed
point at 0 gives clusters whose mean size keeps growing with n.

    python demos/clustering_dichotomy.py
"""

import numpy as np

from mpevt import measure, process, stats
from mpevt.mpmap import MapParams, periodic_point

ALPHA = 0.5
REPLICAS = range(400)
N = 20000

p = MapParams(ALPHA)
mu = measure.stationary_density(measure.build_ulam(p, 4096, 1.02))

targets = [("typical", 2**-0.5, 1.0, 0)]
for word in ("R", "RL"):
    rec = periodic_point(p, word)
    targets.append((word, rec.zeta, rec.theta, rec.period))

print(f"{'target':>8} {'zeta':>10} {'theta':>7} {'obrien':>7} {'runs':>7}")
for label, zeta, theta, period in targets:
    e = measure.classical_thresholds(mu, zeta, 1.0, [N]).entries[0]
    idx, _ = process.ball_ensemble(p, zeta, e.eps, N, 1, REPLICAS)
    q = max(period, 1)
    est = stats.ei_estimate([process.decluster_indices(i, q, N) for i in idx])
    print(f"{label:>8} {zeta:10.6f} {theta:7.4f} {est.obrien:7.4f} {est.runs:7.4f}")

# neutral fixed point: the cluster intensity drifts down with n
print("\nzeta = 0, alpha = 0.2")
p2 = MapParams(0.2)
mu2 = measure.stationary_density(measure.build_ulam(p2, 4096, 1.02))
ns = [1000, 10000]
sched = measure.classical_thresholds(mu2, 0.0, 1.0, ns)
for e in sched.entries:
    idx, _ = process.ball_ensemble(p2, 0.0, e.eps, e.n, 2, REPLICAS)
    est = stats.ei_estimate([process.decluster_indices(i, 1, e.n) for i in idx])
    below = np.mean(process.maxima_below(idx, e.n))
    print(f"  n={e.n:>6}  P(M_n <= u_n)={below:.3f}  obrien={est.obrien:.4f}")
