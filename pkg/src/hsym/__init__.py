"""Sabra shell-model turbulence: simulation and scale-quotient analysis.

The package simulates the forced viscous Sabra model, rebases trajectories
into per-scale normalized frames (where intermittent statistics become
self-similar), and extracts anomalous structure-function exponents both by
direct log-log fits and as dominant eigenvalues of a multiplier transfer
operator.
"""

from .backend import BACKEND
from .config import RunConfig, canonical_text, load_config, parse_config
from .errors import (BlowUpError, ConfigError, ConvergenceError, FormatError,
                     HsymError, WindowError)
from .integrate import (Trajectory, load_trajectory, resolve_clock, run,
                        save_trajectory, step)
from .model import (ModelConfig, ShellState, desk_preset, energy, full_rhs,
                    ideal_rhs, nonlinear_term, paper_preset, space_scale,
                    time_scale, wavenumber)
from .perron import (ConditionalDensity, MultiplierSamples, SigmaGrid,
                     TransferMatrix, build_transfer, closed_form_rp,
                     collect_multipliers, estimate_density,
                     exponent_from_eigenvalue, pf_exponents, power_iterate)
from .quotient import (RescaledFrame, amplitude, amplitude_at_scale,
                       extend_dummy, multiplier_sigma, normalized_rhs,
                       project, rescaled_frame)
from .stats import (SFTable, WeightedHistogram, collapse_distance,
                    fit_exponents, normalized_structure_function, pdf,
                    sf_table, structure_function, weighted_average)

__version__ = "0.1.0"
