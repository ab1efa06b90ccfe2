"""Clone-censor-weight estimation and cohort simulation for treatment-initiation windows."""

__version__ = "0.1.0"

from .ccw import (
    CloneRecord,
    CloneSet,
    WeightScheme,
    brute_force_risk,
    ccw_risk,
    clone_and_censor,
    estimate_weights,
    weighted_risk,
)
from .cohort import (
    DEFAULT_TREATMENT,
    Cohort,
    Intervention,
    PersonPath,
    RiskEstimate,
    TreatmentModel,
    closed_form_risk,
    mc_risk,
    simulate_intervention,
    simulate_natural,
)
from .errors import (
    CCWError,
    CohortFormatError,
    ConfigurationError,
    DegenerateStratumError,
    EstimationError,
    PositivityError,
)
from .scenarios import CATALOG, ExposureState, ScenarioSpec, get_scenario, hazard
