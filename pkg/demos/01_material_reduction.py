"""Material model walkthrough: from the 2D forms to the ribbon constants.

The 2D elastic/viscous responses are SPD quadratic forms on symmetric
2x2 strains.  Minimizing out the transverse strain entries (two Schur
complements) yields the ribbon's bending/twisting form Q1 and the
stretching modulus C0.  The hypothesis tag decides whether the
evolutionary dimension reduction applies.
"""

import numpy as np

from vkribbon import MaterialPair, dQ1, make_isotropic, reduce_to_0, reduce_to_1

print("=== isotropic material, mu = 1, lambda = 1 ===")
q2 = make_isotropic(1.0, 1.0)
print("Q2(1,0,0) =", q2(1, 0, 0), "  Q2(0,1,0) =", q2(0, 1, 0), "  Q2(1,0,1) =", q2(1, 0, 1))

q1 = reduce_to_1(q2)
print("\nreduced form Q1 (coefficients):\n", q1.C)
print("argmin alpha*(1, 0) =", q1.argmin_alpha(1.0, 0.0), " (closed form: -lambda/(2mu+lambda) = -1/3)")

q0 = reduce_to_0(q1)
print("\nstretching modulus C0 =", q0.C0, " (closed form 4 mu (mu+lambda)/(2 mu+lambda) = 8/3)")
print("gradient of Q1 at (1, 2):", dQ1(q1, 1.0, 2.0))

print("\n=== hypothesis classification ===")
for label, pair in [
    ("zero Poisson ratio (lambda = 0)      ", MaterialPair.isotropic(1, 0, 1, 0)),
    ("vanishing transverse dissipation     ", MaterialPair.isotropic(1, 1, 1, 1, h2_family=True)),
    ("general pair, eps-independent viscous", MaterialPair.isotropic(1, 1, 1, 1)),
]:
    print(f"  {label} -> {pair.hypothesis}")

pair = MaterialPair.isotropic(1, 1, 1, 1)
print("\nextended form Qbar_W = diag(C0) + Q1/12:\n", pair.Wbar.M)
print("sqrt * invsqrt - identity, max -->", np.abs(pair.Wbar.sqrt @ pair.Wbar.invsqrt - np.eye(3)).max())
