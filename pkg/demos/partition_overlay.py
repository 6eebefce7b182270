"""The polygon, strips and rays that organise the plane, drawn over a render.

The polygon P(nu) is centred at the origin, the half-strips run outward
through the middle of each edge, and the rays arg z = (2k+1) pi / p carry the
zeros of f.  Points are classified by which of these pieces they fall in.
Output goes to ./partition/.
"""
from pathlib import Path

from esdl import (
    FamilyParams,
    GridSpec,
    PartitionConfig,
    classify_point,
    encode_image,
    overlay_partition,
    polygon_vertices,
    render_classification,
)

P = FamilyParams(4, 1.0)
part = PartitionConfig(p=4, nu=1.0)
print(f"strip half-width q = {part.q:.6f}")
for v in polygon_vertices(part):
    print(f"  vertex {v:.6f}")

for z in (0.2j, 5 + 0.1j, 5 + 5j, -7 - 0.5j, 3 + 3.5j):
    print(f"  {z!s:>10}: {classify_point(part, z)}")

grid = GridSpec.from_box(-10, 10, -10, 10, 400, 400)
_, image = render_classification(P, grid, budget=24)
out = Path("partition")
out.mkdir(exist_ok=True)
(out / "overlay.ppm").write_bytes(encode_image(overlay_partition(image, grid, part)))
print("wrote", out / "overlay.ppm")
