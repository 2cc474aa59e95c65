"""Theta sums on the Siegel upper half space: reduction, automorphic
evaluation, dyadic bounds and seeded experiments."""

from .errors import GuardViolation, NumericalError, ThetaSumError
from .jacobi import GammaTildeElem, HeisenbergElem, JacobiElem
from .reduction import in_domain, siegel_reduce
from .symplectic import IwasawaCoords, assemble, iwasawa
from .theta import (BoxSpec, ThetaQuery, dyadic_height_bound, jacobi_point, theta_auto, theta_direct_box,
                    theta_direct_schwartz, theta_fast, theta_fast_modulus)
from .weil import GaussianPacket, weil_apply

__version__ = "0.1.0"

__all__ = [
    "BoxSpec", "GammaTildeElem", "GaussianPacket", "GuardViolation", "HeisenbergElem", "IwasawaCoords",
    "JacobiElem", "NumericalError", "ThetaQuery", "ThetaSumError", "assemble", "dyadic_height_bound",
    "in_domain", "iwasawa", "jacobi_point", "siegel_reduce", "theta_auto", "theta_direct_box",
    "theta_direct_schwartz", "theta_fast", "theta_fast_modulus", "weil_apply",
]
