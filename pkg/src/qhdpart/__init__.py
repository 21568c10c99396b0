"""Modularity partitioning via QUBO and simulated Quantum Hamiltonian Descent."""

from .generators import disjoint_cliques, erdos_renyi, planted_partition, ring_of_cliques
from .graph import (Graph, ModularityMatrixView, Partition, load_edge_list, modularity,
                    modularity_gain)
from .multilevel import (CoarseningLevel, MatchWeightParams, PipelineConfig, coarsen,
                         match_weight, partition_graph, project, refine)
from .oracles import (AnnealParams, SolveResult, brute_force_modularity, brute_force_qubo,
                      simulated_annealing_qubo)
from .qhd import (QhdSchedule, SolverParams, WaveState, evolve_exact, evolve_meanfield,
                  sample_and_round, solve_qubo)
from .qubo import (PenaltyWeights, QuboProblem, build_qubo, decode_assignment, energy, idx,
                   partition_energy)
from .runner import RunSettings, run_method

__version__ = "0.1.0"
