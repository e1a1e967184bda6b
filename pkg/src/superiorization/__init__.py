"""Superiorization of feasibility-seeking algorithms with derivative-free perturbations."""
from .art import ArtConfig, ArtOperator, art_sweep, project_row, proximity
from .engine import (AuditError, AuditReport, FeasibilityProblem, NonascentOracle, OracleContractError,
                     Perturbation, RunTrace, Schedule, ZeroOracle, audit_perturbations, epsilon_output, eta,
                     superiorize)
from .estimator import SuperiorizedART
from .image import (ImageGrid, as_image, dx, dy, export_image, read_pgm, total_variation,
                    window_to_display, write_pgm)
from .perturbations import (ComponentWiseTV, NegativeGradientTV, NgConfig, clamp, cw_direction, cw_oracle,
                            ng_oracle, tv_gradient)
from .tomography import (FanBeamGeometry, Sinogram, SystemMatrix, add_noise, build_system_matrix,
                         forward_project, load_system, save_system, shepp_logan, trace_ray)

__version__ = "0.1.0"
