"""Python access to the molwg core: layered-dipole emission, ridge waveguide
modes, coupling factors, photon statistics and efficiency budgets."""

from ._core import (
    CommandError,
    ConfigError,
    ConvergenceError,
    DomainError,
    FitError,
    StructuralError,
    Quantity,
    __version__,
    budget,
    cli,
    coupling,
    modes,
    photostats,
    stratified,
)

__all__ = [
    "CommandError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "FitError",
    "StructuralError",
    "Quantity",
    "__version__",
    "budget",
    "cli",
    "coupling",
    "modes",
    "photostats",
    "stratified",
]
