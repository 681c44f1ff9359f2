"""BCS critical temperature, Ginzburg-Landau coefficients and the
field-induced shift D_c on discrete-torus Bogoliubov-de Gennes models."""

__version__ = "0.1.0"

from .backend import active_backend
from .errors import (AssemblyError, BcsglError, ConfigError,
                     DegenerateGroundState, DomainError,
                     NoCriticalTemperature, OptimizationError,
                     ResolutionError, SolverError, StaleCacheError)
from .grids import PositionGrid, TorusGrid
from .model import (ExternalFields, InteractionPotential, ModelConfig,
                    ValidationReport, config_from_dict, field_samples,
                    load_config, validate)
from .specfun import (EvalPolicy, eval_f, eval_g0, eval_g1, eval_g1_over_z,
                      eval_g2, eval_KT)
from .ti_bcs import (PairingData, SpectralSolution, compute_pairing,
                     default_position_grid, find_Tc, lowest_eigenvalue,
                     ti_free_energy, ti_trial_scan)
from .gl import (GLCoefficients, GLField, GLSpectralResult,
                 MomentumQuadrature, assemble_gl_operator,
                 compute_Dc, compute_gl_coefficients, eval_gl_functional,
                 minimize_gl_full, minimize_gl_ray,
                 predict_critical_temperature)
from .bdg_lattice import (BdGState, FreeEnergyBreakdown, LatticeOperator,
                          alpha_delta_deviation, assemble_h, assemble_HDelta,
                          assemble_KTAW, bcs_free_energy, default_torus_grid,
                          gap_operator, gibbs_state, h1_norm,
                          key_identity_residual, klein_gap,
                          make_symmetrized_pair, relative_entropy, tr0,
                          trace_norms, trace_per_volume,
                          trial_state_tc_witness)
from .report import ReportRecord, canonical_json, config_digest
