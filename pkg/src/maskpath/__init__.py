"""Vector-path segmentation toolkit.

Path grammar, box-anchored rasterization, region bin codecs, mask metrics and
losses, the piecewise group reward, the iterative refinement loop and the
RefCOCO / LVIS evaluation protocols.
"""

from maskpath.errors import MaskpathError
from maskpath.masks import (
    boundary_band,
    decode_rle,
    distance_from_outside,
    encode_rle,
    resize_mask,
    signed_distance_normalized,
    threshold,
)
from maskpath.path import VectorPath, parse, parse_text, path_len, serialize_d, tokenize
from maskpath.raster import NormalizedBox, coarse_mask, mask_to_box, rasterize

__version__ = "0.1.0"

__all__ = [
    "MaskpathError",
    "NormalizedBox",
    "VectorPath",
    "boundary_band",
    "coarse_mask",
    "decode_rle",
    "distance_from_outside",
    "encode_rle",
    "mask_to_box",
    "parse",
    "parse_text",
    "path_len",
    "rasterize",
    "resize_mask",
    "serialize_d",
    "signed_distance_normalized",
    "threshold",
    "tokenize",
]
