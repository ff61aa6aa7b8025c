"""Exact transport, disintegration and foliation-energy analysis in the plane."""

__version__ = "0.1.0"

from .disintegration import (
    Disintegration,
    bin_labels,
    disintegrate,
    pushforward,
    verify_reconstruction,
)
from .elliptic import (
    EllipseFoliation,
    QuadratureFailure,
    arc_length,
    arc_profile,
    build_scenario,
    closed_form_energy,
    closed_form_w1,
    conditional_density,
    energy_curve,
    perimeter,
    radial_coordinate,
    sample_fiber,
    table_rows,
)
from .energy import (
    DegenerateFibersError,
    EnergyReport,
    IsolatedLabelError,
    LabelDerivative,
    VERDICT_FOLIATION,
    VERDICT_INCONCLUSIVE,
    VERDICT_NOT_FOLIATION,
    default_eps_schedule,
    derivative_at,
    energy,
    fiber_distance,
    isometry_gap,
    lipschitz_check,
    metric_foliation_check,
)
from .measures import (
    DiscreteMeasure,
    FiberedScenario,
    Point2,
    box_region,
    dirac,
    euclidean_distance,
    normalize,
    read_measure_csv,
    read_scenario,
    restrict,
)
from .transport import (
    SolverFailure,
    TransportPlan,
    brute_force_wasserstein,
    plan_cost,
    wasserstein,
)

__all__ = [
    "__version__",
    "Point2",
    "DiscreteMeasure",
    "FiberedScenario",
    "euclidean_distance",
    "dirac",
    "normalize",
    "restrict",
    "box_region",
    "read_measure_csv",
    "read_scenario",
    "TransportPlan",
    "SolverFailure",
    "wasserstein",
    "brute_force_wasserstein",
    "plan_cost",
    "Disintegration",
    "disintegrate",
    "pushforward",
    "verify_reconstruction",
    "bin_labels",
    "EnergyReport",
    "LabelDerivative",
    "DegenerateFibersError",
    "IsolatedLabelError",
    "VERDICT_FOLIATION",
    "VERDICT_NOT_FOLIATION",
    "VERDICT_INCONCLUSIVE",
    "fiber_distance",
    "metric_foliation_check",
    "lipschitz_check",
    "derivative_at",
    "energy",
    "isometry_gap",
    "default_eps_schedule",
    "EllipseFoliation",
    "QuadratureFailure",
    "arc_length",
    "perimeter",
    "radial_coordinate",
    "conditional_density",
    "closed_form_w1",
    "closed_form_energy",
    "sample_fiber",
    "build_scenario",
    "arc_profile",
    "energy_curve",
    "table_rows",
]
