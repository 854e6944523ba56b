"""Dithered one-bit compressed sensing with offset-free ReLU generative priors."""
from .errors import ConfigurationError, DomainError, NumericalFailure, OracleScaleError
from .generator import (ActiveBranch, ReluNetwork, active_branch, branch_apply, encode_group_sparse,
                        forward, group_sparse_network, new_random_gaussian)
from .regions import brute_force_region_count, count_pieces_bound
from .sensing import (MeasurementSet, expected_sign, measure, quantize, sample_sensing,
                      sign_difference_fraction)
from .erm import (RecoveryResult, SolverOptions, directional_derivative, finite_diff_gradient, loss,
                  recover, signal_loss, subgradient, surrogate_loss)
from .landscape import (LandscapeReport, WdcReport, classify, estimate_wdc, g_angle, h_vector,
                        landscape_grid, m_matrix, q_matrix, radii, rho_check_sequence, rho_n,
                        wdc_deviation)
from .experiments import ExperimentConfig, derive_seed

__version__ = "0.1.0"
