"""Ground-truth divergences between Gaussians and how the variational bounds sit below them.

Run with ``python3 demos/oracle_and_bounds.py``.
"""

import numpy as np

from divgauge import GaussianSpec, exact_optimizer, hellinger, kl, log_density_ratio, oracle_divergence
from divgauge.analysis import quadrature_batch
from divgauge.objectives import alpha_scale_objective, dv_objective, grid_sup_improved_dv, lt_objective

Q, P = GaussianSpec(0.0, 0.5), GaussianSpec(0.0, 1.0)

print("oracles for Q = N(0, 1/2), P = N(0, 1)")
for fam in (kl(), hellinger()):
    closed = oracle_divergence(fam, Q, P, method="closed")
    quad = oracle_divergence(fam, Q, P, method="quadrature")
    print(f"  {fam.name:>10}: closed form {closed:.12f}  quadrature {quad:.12f}")

# At the exact optimizer f'(dQ/dP) the LT objective equals the divergence.
lr = log_density_ratio(Q, P)
phi_star = exact_optimizer(kl(), lambda x: np.exp(lr(x)))
print("LT objective at the optimizer:", lt_objective(kl(), quadrature_batch(phi_star, Q, P)).value)

# A deliberately wrong test function: twice the optimizer.
batch = quadrature_batch(lambda x: 2.0 * phi_star(x), Q, P)
sup, eta = grid_sup_improved_dv(batch)
print("for phi = 2 phi*:")
print(f"  LT {lt_objective(kl(), batch).value:.6f} <= DV {dv_objective(batch).value:.6f} "
      f"<= improved DV {sup:.6f} (eta = {eta:.4f})")

# The scale-optimized Hellinger objective does not care about positive rescaling.
pos = exact_optimizer(hellinger(), lambda x: np.exp(lr(x)), "alpha_scale")
for c in (1.0, 0.1, 25.0):
    b = quadrature_batch(lambda x: c * pos(x), Q, P)
    print(f"  Hellinger scale objective with phi scaled by {c:>5}: {alpha_scale_objective(hellinger(), b).value:.10f}")
