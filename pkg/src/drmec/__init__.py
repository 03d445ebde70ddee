"""Power-minimal access and offloading for two-layer UAV edge computing
under moment-based uncertainty in the transceiver gain."""

from drmec.cvar import (
    MomentMatrix,
    QuadraticLoss,
    WcCvarCertificate,
    assemble_moment_matrix,
    build_loss_lower,
    build_loss_upper,
    certificate_residuals,
    cvar_oracle_discrete,
    min_feasible_power,
    worst_case_cvar,
)
from drmec.errors import CapacityError, DomainError, DrmecError, InfeasibleError, NumericError, ShapeError
from drmec.model import LowerUavParams, PowerAllocation, PowerBreakdown, ScenarioConfig, UpperUavParams, total_power
from drmec.optimizer import Solution, access_subproblem, alternate, exhaustive_oracle, power_subproblem
from drmec.scenario import load_scenario
from drmec.sweep import SweepSpec, run_sweep
from drmec.validate import ErrorDistribution, SatisfactionReport, empirical_satisfaction

__version__ = "0.1.0"
