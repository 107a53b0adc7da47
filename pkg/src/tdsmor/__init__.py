"""Model order reduction of discrete time-delay systems with non-zero
initial history: Walsh-expansion projection and Laguerre-based balanced
truncation, plus the benchmark generators and a command-line front end."""

__version__ = "0.1.0"

from .errors import (ArgumentError, CapacityError, DomainError, FileFormatError,
                     NumericalError, TdsMorError)
from .walsh import WalshBasis, build_basis, walsh_project, walsh_reconstruct
from .laguerre import LaguerreBasis, laguerre_eval, laguerre_vector, build_shift_matrix
from .system import (DelaySystem, InitialData, InputSignal, ReducedSystem, Trajectory,
                     error_metrics, fundamental_matrix, lift_to_linear, parse_input,
                     simulate, simulate_lifted, spectral_radius)
from .walsh_mor import (reduce_lifted_walsh, reduce_walsh, solve_walsh_coefficients,
                        verify_coefficient_matching)
from .bt import (LaguerreFundamental, LowRankGramians, SubsystemSet, decompose,
                 gramian_oracle, laguerre_coefficients, lowrank_factors, reduce_combbt,
                 reduce_dominant, reduce_grambt)
from .benchmarks import (BenchmarkSpec, gen_convdiff, gen_platoon, gen_random_stable,
                         gen_rod)
from .io import load, save
