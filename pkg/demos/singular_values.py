"""Zeros, critical points and postsingular orbits along the ray arg z = pi/p.

On this ray f is real, so its zeros and critical points can be found by
one-dimensional root finding.  The critical values are real and alternate in
sign, and their orbits stay on the real axis.
"""
import math

from esdl import FamilyParams, postsingular_orbit, singular_data
from esdl.singular import interlacing_holds

P = FamilyParams(4, 1.0)
data = singular_data(P, t_max=20.0)

print("First zeros (distance t along the ray):")
for t in data.zeros_t[:5]:
    print(f"  t = {t:.12f}")
print("First critical points and their values:")
for t, v in zip(data.crit_t[:5], data.crit_values[:5]):
    print(f"  t = {t:.12f}   f = {v:+.6e}")
print("zeros and critical points interlace:", interlacing_holds(data))

# The first zero sits at (pi/2)(1 + i) for p = 4.
z0 = data.ray_point(data.zeros_t[0], P.p)
print(f"first zero {z0:.12f}  vs  (pi/2)(1+i) = {complex(math.pi / 2, math.pi / 2):.12f}")

orbit = postsingular_orbit(P, budget=24, t_max=20.0, n_seeds=6)
print("\nPostsingular orbits (log|z_n| after each step):")
for seed, traj, verdict in zip(orbit.seeds, orbit.trajectories, orbit.verdicts):
    logs = ", ".join(f"{pt.log_abs:.3g}" for pt in traj[:6])
    print(f"  seed {seed:+.3e}: {verdict.value:22s} {logs} ...")
print(f"largest imaginary residual: {orbit.max_imag_residual:.2e}")
