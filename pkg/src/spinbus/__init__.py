"""Two probe qubits coupled through an antiferromagnetic Heisenberg spin ladder."""
__version__ = "0.1.0"

from .model import Connection, CouplingGraph, LadderSpec, attach_qubits, build_ladder, predicted_ground_spin
from .basis import SectorBasis, enumerate_sector, sector_of_total_sz
from .hamiltonian import HamiltonianOperator, expectation_sdots, expectation_szsz, total_spin_squared
from .eigensolve import dense_spectrum, ground_multiplet, lanczos_lowest, lowest
from .effective import (
    build_effective_hamiltonian,
    jeff_gap_splitting,
    jeff_resolvent,
    jeff_sum_over_states,
)
from .observables import bell_weights_formula, bell_weights_projector, fidelity_report, reduce_to_qubits
from .dynamics import characteristic_time, effective_transfer, evolve, transfer_experiment
