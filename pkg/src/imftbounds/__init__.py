"""Certified neighborhoods for the implicit and inverse function theorems."""

from .bounds import (BoundCertificate, FixXMaxY, FixYMaxX, ImftConstants, MaxX, Method, SubspaceSpec,
                     baseline_amr, directional_certify, ift_c1_certify, ift_c2_certify, ift_c2_constants,
                     imft_c1_certify, imft_c2_certify, imft_c2_feasible)
from .errors import ImftError, NoFeasibleRegion
from .linalg import NormSpec
from .oracle import BallPair, MapOracle

__all__ = [
    "BallPair", "BoundCertificate", "FixXMaxY", "FixYMaxX", "ImftConstants", "ImftError", "MapOracle", "MaxX",
    "Method", "NoFeasibleRegion", "NormSpec", "SubspaceSpec", "baseline_amr", "directional_certify",
    "ift_c1_certify", "ift_c2_certify", "ift_c2_constants", "imft_c1_certify", "imft_c2_certify",
    "imft_c2_feasible",
]
