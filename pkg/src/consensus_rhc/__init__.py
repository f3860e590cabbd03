"""Inverse-optimal consensus protocols with receding-horizon constraint handling.

Design optimal consensus gains for discrete-time linear multi-agent systems
(semistable and unstable subsystem dynamics), wrap them in a constrained
receding-horizon controller with an invariant terminal level set, and
simulate the closed loop.
"""
from . import errors, graphs, linalg, qcqp
from .config import ScenarioConfig, load_config, parse_config
from .design import (DesignParams, ProtocolDesign, SubsystemModel,
                     check_semi_observable, compute_delta_c, design_semistable,
                     design_unstable, fit_series_weight, make_subsystem,
                     solve_modified_are, solve_semistable_lyapunov,
                     verify_global_are)
from .graphs import (GraphModel, LaplacianSpectrum, analyze_spectrum,
                     build_graph, check_wl_symmetrizable, coupling_bounds)
from .rhc import (AgentPlan, RhcController, TerminalSet,
                  check_terminal_invariance, compute_beta, decompose_cost,
                  make_controller, step_centralized, step_distributed)
from .sim import (LinearProtocol, SimConfig, SimResult, consensus_verdict,
                  lyapunov_certificate, run, summarize)
from .verify import design_document, load_design_document, verify_design

__version__ = "0.1.0"
