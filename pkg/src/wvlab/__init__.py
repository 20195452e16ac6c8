"""Numerical growth theory of entire functions of several complex variables.

Truncated multivariate power series with extended-range coefficients,
growth functionals (maximum term, central index, maximum modulus,
proximity and valence), and executable checks of comparison inequalities,
logarithmic-derivative estimates, the Wiman-Valiron asymptotic and the
hyper-order of solutions of ``d^I f - e^P f = Q``.
"""

from .growth import (Estimate, GrowthProfile, RadiusGrid, characteristic, counting_from_valence,
                     growth_profile, hyper_order_estimate, order_estimate, proximity, valence_jensen)
from .reports import InequalityRecord, InequalityReport
from .sampling import max_modulus_sphere, max_modulus_torus, sample_sigma
from .series import (PowerSeries, Quotient, UntrustedRadiusError, evaluate, exp_series, is_trusted,
                     make_exp_of_linear, make_polynomial, partial_derivative)
from .seriesio import read_series, write_series

__version__ = "0.1.0"

__all__ = [
    "Estimate", "GrowthProfile", "InequalityRecord", "InequalityReport", "PowerSeries", "Quotient",
    "RadiusGrid", "UntrustedRadiusError", "characteristic", "counting_from_valence", "evaluate",
    "exp_series", "growth_profile", "hyper_order_estimate", "is_trusted", "make_exp_of_linear",
    "make_polynomial", "max_modulus_sphere", "max_modulus_torus", "order_estimate", "partial_derivative",
    "proximity", "read_series", "sample_sigma", "valence_jensen", "write_series",
]
