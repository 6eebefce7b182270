"""An attracting fixed point on the real axis for p = 4, lambda = 1/4.

With a small lambda the real graph of f crosses the diagonal twice: once
inside [0, pi/2] and once beyond it.  The left crossing attracts and the
right one repels.  Real seeds to the left of the repelling point settle onto
the attracting one, while seeds to its right run off to infinity.
"""
import math

from esdl import FamilyParams, OrbitClass, classify_orbit, real_fixed_points
from esdl.orbits import default_ladder

P = FamilyParams(4, 0.25)

print("Real fixed points of f on [0, 3]:")
for fp in real_fixed_points(P, 0.0, 3.0):
    print(f"  x* = {fp.x_star:.12f}   f'(x*) = {fp.multiplier:+.6f}   {fp.kind.value}")

# Orbits starting on either side of the repelling point behave very differently.
R, ladder = default_ladder(P)
print(f"\nEscape radius R = {R}")
for seed in (0.0, 0.5, math.pi / 2, 2.3, 2.5, 3.0):
    rec = classify_orbit(P, complex(seed), 24, R, ladder)
    last = rec.points[-1]
    where = f"ends near {last.to_complex().real:.9f}" if rec.verdict is OrbitClass.ATTRACTED_REAL else f"log|z_n| reaches {last.log_abs:.3g}"
    print(f"  seed {seed:6.3f}: {rec.verdict.name:16s} {where}")
