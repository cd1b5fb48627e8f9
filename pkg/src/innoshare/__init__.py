"""Protection of distributed consensus optimization against eavesdroppers.

A simulation and analytics toolkit for innovation-sharing communication:
graph/weight construction, DCO/DICO optimizers with gradient tracking, a
probabilistic eavesdropper simulator, closed-form protection formulas and
their Monte Carlo validation, plus an experiment harness.
"""

from .adversary import (AdversaryConfig, AdversaryRun, sample_run,
                        tail_weight_moments, terminal_error)
from .consensus import (AlgorithmConfig, DivergenceError, Trajectory,
                        convergence_time, extra_tracker, run_dco, run_dico,
                        subgradient_tracker, trajectory_to_csv)
from .graphs import (DirectedGraph, WeightMatrix,
                     generate_random_strongly_connected, is_strongly_connected,
                     metropolis_weights)
from .objectives import (ObjectiveSpec, all_gradients, global_gradient,
                         global_minimizer, global_value, load_objective,
                         local_gradient, local_value, quadratic_objective,
                         save_objective, synth_logistic)
from .protection import (EmpiricalMoments, MomentSeries, ProtectionConstants,
                         ProtectionReport, entropy_floor, exact_protection,
                         moment_series, monte_carlo_error_mean,
                         monte_carlo_protection, network_protection,
                         protection_b0, protection_b1, protection_lower_bound,
                         protection_report, simulate_moments)
from .streams import bernoulli_stream

__version__ = "0.1.0"
