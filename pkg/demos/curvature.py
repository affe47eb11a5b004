"""Curvature of the transformed objectives at the optimizer, closed form vs finite differences.

Run with ``python3 demos/curvature.py``.
"""

from divgauge import GaussianSpec, hellinger, kl
from divgauge.analysis import TRANSFORMS, fdiv_hessian_closed_forms, numeric_curvatures, polynomial_direction

Q, P = GaussianSpec(0.0, 0.5), GaussianSpec(0.0, 1.0)
directions = [polynomial_direction(c, n) for c, n in (([0, 1], "x"), ([0, 0, 1], "x^2"), ([1, 1], "1+x"))]

for fam in (kl(), hellinger()):
    print(fam.name)
    print(f"  {'psi':>5} " + " ".join(f"{t:>20}" for t in TRANSFORMS))
    for psi in directions:
        cf = fdiv_hessian_closed_forms(fam, Q, P, psi).closed_form
        num = numeric_curvatures(fam, Q, P, psi)
        cells = [f"{cf[t]:+.6f} ({num[t]:+.6f})" for t in TRANSFORMS]
        print(f"  {psi.__name__:>5} " + " ".join(f"{c:>20}" for c in cells))
print("closed form (finite-difference value); flatter directions under shift, scale and affine transforms")
