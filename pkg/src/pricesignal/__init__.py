"""Price signalling by two firms of privately known quality facing consumers who search at a cost."""

from .consumer import BeliefSystem, FirmStrategy, Offer, StageOne, StageTwo, StructuralError
from .demand import DemandModel, DemandReport, deviation_demand
from .equilibrium import (
    EquilibriumCertificate,
    Profile,
    SearchOptions,
    find_equilibria,
    guessed_equilibrium,
    intuitive_criterion,
    verify_pbe,
)
from .market import MarketParams, ParameterError, QualityMap, ValuationDistribution, c1, validate

__version__ = "0.1.0"
