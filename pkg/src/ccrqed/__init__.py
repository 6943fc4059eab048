"""Excited-state probabilities of a two-level atom in a cavity under irreducible
and reducible (N-oscillator) field quantizations, with dissipative and
timing-uncertainty decoherence."""

from .analysis import (
    DataSet,
    FitResult,
    ModelConfig,
    RevivalReport,
    compare_kappa_hypotheses,
    detect_revival,
    fit_delta_t,
    fit_delta_t_windowed,
    scan_nz_lower_bound,
)
from .curves import Curve, TimeGrid, evaluate_curve, sup_distance
from .decoherence import (
    apply_decoherence,
    apply_decoherence_grid,
    average_term_closed,
    average_term_quadrature,
    deformed_exp,
    gamma_pdf,
)
from .model import (
    DecoherenceConfig,
    FieldState,
    PhysicalParams,
    RepresentationConfig,
    binomial_weight,
    gaussian_weight,
    gph_from_khz_over_pi,
    poisson_pmf,
    rabi_freq,
    thermal_pmf,
)
from .terms import OscillationTerm, TermList, build_terms

__version__ = "0.1.0"
