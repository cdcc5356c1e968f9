from .domain import (
    AffineFunction,
    AprioriData,
    Curve,
    DomainSpec,
    Inclusion,
    curve_from_spec,
    disk,
    ellipse,
    polygon,
    rectangle,
)
from .measures import (
    FatnessResult,
    erode_region,
    fatness_check,
    hausdorff,
    region_area,
    region_diameter,
    region_perimeter,
    shell_region,
    sifc_check,
)
from .mesh import GAMMA, OUTER, Mesh, parse_mesh, read_mesh, refine_uniform, write_mesh
from .mesher import build_mesh

__all__ = [
    "AffineFunction", "AprioriData", "Curve", "DomainSpec", "Inclusion", "curve_from_spec",
    "disk", "ellipse", "polygon", "rectangle", "FatnessResult", "erode_region", "fatness_check",
    "hausdorff", "region_area", "region_diameter", "region_perimeter", "shell_region",
    "sifc_check", "GAMMA", "OUTER", "Mesh", "parse_mesh", "read_mesh", "refine_uniform",
    "write_mesh", "build_mesh",
]
