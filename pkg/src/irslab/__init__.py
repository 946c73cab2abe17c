"""Binary intelligent-reflecting-surface toolkit.

Simulates a two-state IRS with circuit-level reflection and mutual
coupling over wideband OFDM channels, estimates the channel from
Hadamard pilot books (full and dimension-reduced least squares), and
configures the surface with a sign-projected power method.
"""

from .channel import (ChannelRealization, PathComponent, PathGenParams,
                      ScenarioConfig, ScenarioError, build_cascaded_matrix,
                      build_direct_channel, desk_scenario, generate_scenario,
                      ofdm_response, paper_scenario, sinc_taps, sum_rate)
from .circuit import (ON_SIGN, CircuitParams, CouplingKernel, coupling_kernel,
                      effective_capacitances, impedance, reflection_coefficient,
                      reflection_sweep, reflection_vector)
from .configurator import (ConfigurationResult, QuadraticForm, all_off_benchmark,
                           best_pilot_benchmark, binary_power_method,
                           build_quadratic_form, evaluate_configuration,
                           multi_start_power_method, states_from_c)
from .estimation import (EstimateFull, EstimateReduced, RankDeficientError,
                         StructureReport, absorbed_truth, discover_structure,
                         estimate_noise_psd, ls_full, ls_reduced)
from .geometry import (ArrayGeometry, array_response, azimuth_response,
                       column_index_map, directivity, element_position)
from .pilots import (PilotBook, PilotObservations, build_pilot_book, custom_book,
                     hadamard, simulate_reception)

__version__ = "0.1.0"
