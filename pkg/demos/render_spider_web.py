"""Render the fast-escaping set and count the rings around the origin.

Each pixel centre is iterated for a fixed budget.  Pixels that pass the
maximum-modulus test are shaded by how quickly they escape.  The holes of the
fast-escaping set are then filled to grow loops around the origin, and the
nested loops are counted.  Output goes to ./spider_web/.
"""
from pathlib import Path

from esdl import FamilyParams, GridSpec, encode_image, render_classification, spider_rings
from esdl.orbits import OrbitClass, default_ladder

P = FamilyParams(4, 1.0)
grid = GridSpec.from_box(-20, 20, -20, 20, 512, 512)
R, ladder = default_ladder(P)

codes, image = render_classification(P, grid, budget=24, R=R, ladder=ladder, threads=4)
out = Path("spider_web")
out.mkdir(exist_ok=True)
(out / "render.pgm").write_bytes(encode_image(image))

fast = (codes == OrbitClass.FAST_ESCAPING).mean()
print(f"escape radius {R}, fast-escaping fraction {fast:.3f}")

report = spider_rings(codes, grid.nearest_pixel(0j))
print(f"nested rings around the origin: {report.nested_count}")
# each ring closes once the growing region reaches this many pixels from the origin
for r in report.radii:
    print(f"  ring closed at growth radius {r:.1f} px")
print("wrote", out / "render.pgm")
