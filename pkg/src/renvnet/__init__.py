"""Randomized rerouting of Markov routing chains and Jackson networks in a random environment."""
from .capacity import (ControlPair, ModifiedNetwork, NodePartition, StationaryFamily, derive_controls,
                       effective_arrival_rate, modified_generator, modified_network, partition_nodes,
                       stationary_family)
from .chain import (ClassDecomposition, check_irreducible, check_reversible, generator_stationary,
                    guarded_ratio, invariant_residual, stationary_distribution, validate_stochastic)
from .environment import (CoupledNetwork, EnvironmentSpec, coupled_generator, coupled_product_pmf,
                          per_status_controls, reduced_generator, solve_theta, verify_coupled_balance)
from .errors import *  # noqa: F401,F403
from .jackson import (GeneratorView, NetworkSpec, ProductFormDistribution, ServiceRateFunction,
                      jackson_generator, node_normalizer, product_form, product_form_pmf, solve_traffic,
                      verify_global_balance)
from .randomization import (ModifiedChain, PeskunVerdict, modified_stationary, modify, peskun_compare,
                            reflect_modify, skip_absorbing_oracle, skip_modify, skip_oracle)
from .simulate import (OccupationMeasure, RegenerativeEstimate, Trajectory, empirical_compare,
                       occupation_measure, regenerative_estimate, simulate_augmented_chain, simulate_ctmc)

__version__ = "0.1.0"
