"""Phase-space quantum mechanics on a grid.

States live as Wigner functions, observables as Weyl symbols, dynamics as
the Moyal-bracket flow, and a coarse graining of phase space supplies the
quasiprojectors driving stochastic region transitions. A dense
Hilbert-space layer cross-checks every phase-space computation.
"""

__version__ = "0.1.0"

from .classical import (ClassicalObservable, SymplecticForm, evolve_region_classically,
                        hamilton_flow, poisson_bracket, symplectic_product)
from .dynamics import Hamiltonian, HamiltonianTerm, evolve_lvn
from .grid import ContainmentError, GridMismatchError, PhaseGrid, PhasePoint
from .moyal import moyal_bracket, moyal_product, moyal_product_truncated
from .oracle import (DensityOperator, OperatorMatrix, VonNeumannCoupling,
                     WaveFunction, measurement_premeasurement, operator_sqrt,
                     povm_apply, schrodinger_propagate, tensor_state)
from .regions import (Partition, Region, build_partition, classicality_projectors,
                      interior_region, is_quasirestricted, quasiprojector_defect,
                      quasiprojector_operator, quasiprojector_symbol)
from .transitions import (ProjectionSchedule, RegionDecomposition, TrajectoryEngine,
                          TrajectoryRecord, apply_quasiprojection,
                          decompose_over_regions, run_ensemble, run_trajectory,
                          sample_transition, transition_probabilities,
                          zeno_experiment)
from .weyl import WeylSymbol, mean_value, overlap, weyl_operator_from_symbol, \
    weyl_symbol_from_operator
from .wigner import (WignerState, coherent_state, coherent_wigner,
                     density_from_wigner, marginals, wavefunction_from_wigner,
                     wigner_from_density, wigner_from_wavefunction)

__all__ = [name for name in dir() if not name.startswith("_")]
