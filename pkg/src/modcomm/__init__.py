"""Modular commutator J(A,B,C) = i Tr(rho [K_AB, K_BC]) and the chiral central
charge estimate c- = 3J/pi, with dense and free-fermion backends."""

from .dense import (DensityOp, PureState, SiteLayout, cmi, modular_commutator,
                    region_entropy, tee_kitaev_preskill)
from .gaussian import MajoranaCovariance, QuadraticHam, gaussian_modular_commutator
from .models import ModelSpec, build, chern_number

__version__ = "0.1.0"

__all__ = ["DensityOp", "PureState", "SiteLayout", "cmi", "modular_commutator",
           "region_entropy", "tee_kitaev_preskill", "MajoranaCovariance", "QuadraticHam",
           "gaussian_modular_commutator", "ModelSpec", "build", "chern_number"]
