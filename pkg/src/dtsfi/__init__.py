"""Delayed two-information SFI models: simulation, fitting, indices and sensitivity."""

from .errors import (
    CoarseStepWarning,
    DomainError,
    InsufficientDataError,
    IntegrationError,
    OutOfRangeError,
    ValidationError,
)
from .estimation import FitResult, FitSpec, fit
from .indices import IndexReport, extract_indices, r0_lti, r0_sti
from .integrator import IntegrationConfig, Trajectory, integrate, integrate_oracle
from .io import ForwardingDataset, load_fixture, published_params, reference_fits
from .models import (
    LtiPhase2State,
    Model,
    Phase1Params,
    Phase1State,
    Phase2Params,
    StiPhase2State,
    handoff_lti,
    handoff_sti,
)
from .scenarios import DelayScan, Phase, classify_phase, delay_scan
from .sensitivity import PrccTable, SamplingPlan, SensitivityScenario, lhs_sample, prcc, run_sensitivity

__version__ = "0.1.0"
