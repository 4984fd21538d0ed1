"""wavedecay: characteristic evolution and decay diagnostics for wave modes.

A numpy/scipy laboratory for the energy decay of spherical-harmonic modes of
the wave equation on flat and Schwarzschild backgrounds: double-null
evolution of the reduced field, energy and weighted null-flux diagnostics
through a hybrid spacelike/null foliation, discrete verification of the
weighted energy identities, and dyadic/fit machinery that turns measured
spacetime integrals into decay exponents.
"""

from .background import (
    Background,
    FoliationLeaf,
    leaf,
    potential,
    r_of_rstar,
    rstar_of_r,
)
from .decay import DecayReport, dyadic_extract, fit_decay, verify_chain
from .diagnostics import (
    FluxRecord,
    FluxSeries,
    SeriesBundle,
    bulk_integral,
    collect_series,
    energy_flux_N,
    energy_flux_T,
    hardy_decomposition,
    iled_integral,
    local_energy_density,
    pointwise_sups,
    series_from_csv,
    series_to_csv,
    series_to_json,
    weighted_flux,
)
from .errors import (
    CoverageError,
    DomainError,
    NumericalError,
    ValidationError,
    WavedecayError,
)
from .grid import NullGrid, junction_aligned_grid, make_grid
from .identities import IdentityLedger, pwe_ledger, residual_order
from .solver import (
    InitialData,
    ModeField,
    bessel_data,
    callable_data,
    dump_field,
    evolve,
    evolve_commuted,
    gaussian_data,
    table_data,
)

__version__ = "0.1.0"

__all__ = [
    "Background",
    "FoliationLeaf",
    "leaf",
    "potential",
    "rstar_of_r",
    "r_of_rstar",
    "NullGrid",
    "make_grid",
    "junction_aligned_grid",
    "InitialData",
    "ModeField",
    "evolve",
    "evolve_commuted",
    "gaussian_data",
    "bessel_data",
    "callable_data",
    "table_data",
    "dump_field",
    "energy_flux_T",
    "energy_flux_N",
    "weighted_flux",
    "bulk_integral",
    "iled_integral",
    "local_energy_density",
    "hardy_decomposition",
    "pointwise_sups",
    "collect_series",
    "FluxRecord",
    "FluxSeries",
    "SeriesBundle",
    "series_to_csv",
    "series_to_json",
    "series_from_csv",
    "IdentityLedger",
    "pwe_ledger",
    "residual_order",
    "dyadic_extract",
    "verify_chain",
    "fit_decay",
    "DecayReport",
    "WavedecayError",
    "ValidationError",
    "DomainError",
    "CoverageError",
    "NumericalError",
    "__version__",
]
