"""macroreal: a numerical laboratory for macrorealism tests.

Builds sequential-measurement scenarios on finite-dimensional systems,
evaluates no-signaling-in-time and Leggett-Garg style conditions, and
measures invasiveness of coarse-grained instruments through Bhattacharyya
overlaps of outcome distributions.
"""

from macroreal.hilbert import (
    DensityState,
    StateVector,
    coherent_state,
    default_fock_dim,
    quadrature_operators,
    unitary_from_hamiltonian,
)
from macroreal.instruments import KrausFamily
from macroreal.scenario import ProbabilityTable, Scenario, Slot, joint_distribution
from macroreal.overlap import OutcomeDistribution, bhattacharyya

__version__ = "0.1.0"

__all__ = [
    "DensityState",
    "StateVector",
    "coherent_state",
    "default_fock_dim",
    "quadrature_operators",
    "unitary_from_hamiltonian",
    "KrausFamily",
    "ProbabilityTable",
    "Scenario",
    "Slot",
    "joint_distribution",
    "OutcomeDistribution",
    "bhattacharyya",
    "__version__",
]
