"""Deterministic grid realisation of heat/OU smoothing and level-set geometry."""

from .checks import (
    CheckResult,
    Fixture,
    LevelSetCertificate,
    VerificationReport,
    coarea_check,
    dashed_matched_fixture,
    default_fixtures,
    level_grid,
    smoothness_check,
    threshold_search,
    verify_fixture,
)
from .fields import (
    GridField,
    ResolutionError,
    apply_heat,
    apply_ou_1d,
    discrete_ns,
    gradient_magnitude,
    model_for,
    ou_gauss_hermite,
    rasterize,
    required_resolution,
    smooth,
    smoothed_indicator,
)
from .level_sets import (
    perimeter_1d,
    perimeter_2d,
    perimeter_curve,
    superlevel_set,
    symmetric_difference_measure,
)
