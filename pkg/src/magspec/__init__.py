"""Magnetic Laplacian spectra, frustration and Cheeger constants on small models."""

from .analysis import refinement_study, verify_heat_lemma, verify_integrated_bochner
from .bounds import (BoundReport, check_buser1, check_buser_k, check_cheeger_inequality, check_higher_buser,
                     check_lichnerowicz, check_quadratic_inequality, check_shigekawa)
from .cheeger import CheegerReport, estimate_h1, estimate_hk, frustration_index
from .eigensolve import Spectrum, degenerate_groups, smallest_k
from .geometry import DiscretizedManifold, circle_grid, icosphere, torus_grid
from .magnetic import (GaugeFunction, MagneticPotential, circle_constant, d_alpha_sup_norm,
                       gauge_transform, is_gauge_trivial, sphere_axial, torus_constant,
                       torus_uniform_flux, zero_potential)
from .operator import MagneticOperator, assemble

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "CheegerReport", "check_buser1", "check_buser_k", "check_cheeger_inequality",
    "check_higher_buser", "check_lichnerowicz", "check_quadratic_inequality", "check_shigekawa",
    "estimate_h1", "estimate_hk", "frustration_index", "refinement_study", "verify_heat_lemma",
    "verify_integrated_bochner",
    "DiscretizedManifold", "GaugeFunction", "MagneticOperator", "MagneticPotential", "Spectrum",
    "assemble", "circle_constant", "circle_grid", "d_alpha_sup_norm", "degenerate_groups",
    "gauge_transform", "icosphere", "is_gauge_trivial", "smallest_k", "sphere_axial",
    "torus_constant", "torus_grid", "torus_uniform_flux", "zero_potential",
]
