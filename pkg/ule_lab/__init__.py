"""
ULE Laboratory Package

Limit-periodic potentials on odometer hulls, distal sequences, finite
Schrödinger windows, the dressed potential and localization reports.
"""

from .hull import FrequencyChain, GroupElement, condition_A, hulls_isomorphic, maximalize, odometer_add
from .sampling import DistalGenerator, distal_value, poeschel_series, tail_bound, verify_distality
from .approx import ConstantQ, PowerLawQ, TabulatedQ, h_upper, q_of
from .diagalg import DiagMatrix, diag_product, norm_s
from .specops import OperatorForm, build_window, construct_dressed_potential, eigensystem, match_eigenvalues
from .locreport import dynloc_report, fit_decay, ule_report
from .run_config import RunConfig, resolve_config
from .lab_service import LabService

__all__ = [
    'FrequencyChain',
    'GroupElement',
    'condition_A',
    'hulls_isomorphic',
    'maximalize',
    'odometer_add',
    'DistalGenerator',
    'distal_value',
    'poeschel_series',
    'tail_bound',
    'verify_distality',
    'ConstantQ',
    'PowerLawQ',
    'TabulatedQ',
    'h_upper',
    'q_of',
    'DiagMatrix',
    'diag_product',
    'norm_s',
    'OperatorForm',
    'build_window',
    'construct_dressed_potential',
    'eigensystem',
    'match_eigenvalues',
    'dynloc_report',
    'fit_decay',
    'ule_report',
    'RunConfig',
    'resolve_config',
    'LabService',
]
