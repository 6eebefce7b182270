"""Numerics for the family f(z) = lam * sum_{k<p} exp(w^k z), w = exp(2 pi i / p)."""
from .evalcore import (
    FamilyParams,
    MaxModLadder,
    ScaledComplex,
    derivative,
    evaluate,
    evaluate_series,
    find_escape_radius,
    max_modulus,
    maxmod_ladder,
)
from .geometry import PartitionConfig, Region, RegionTag, classify_point, estimate_constants, polygon_vertices
from .orbits import OrbitClass, classify_orbit, g_min, growth_check, real_fixed_points, spider_rings, strip_hair_presence
from .raster import GridSpec, RasterImage, encode_image, overlay_partition, render_classification
from .singular import critical_points_on_ray, critical_values, postsingular_orbit, singular_data, zeros_on_ray
from .verify import RunConfig, parse_config, run_all, run_check

__all__ = [
    "FamilyParams",
    "MaxModLadder",
    "ScaledComplex",
    "derivative",
    "evaluate",
    "evaluate_series",
    "find_escape_radius",
    "max_modulus",
    "maxmod_ladder",
    "PartitionConfig",
    "Region",
    "RegionTag",
    "classify_point",
    "estimate_constants",
    "polygon_vertices",
    "OrbitClass",
    "classify_orbit",
    "g_min",
    "growth_check",
    "real_fixed_points",
    "spider_rings",
    "strip_hair_presence",
    "GridSpec",
    "RasterImage",
    "encode_image",
    "overlay_partition",
    "render_classification",
    "critical_points_on_ray",
    "critical_values",
    "postsingular_orbit",
    "singular_data",
    "zeros_on_ray",
    "RunConfig",
    "parse_config",
    "run_all",
    "run_check",
]
