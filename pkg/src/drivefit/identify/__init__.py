"""Parameter identification by trajectory matching."""
from .fit import (  # noqa: F401
    FitConfig,
    FitResult,
    PhasePortraitMetrics,
    cma_es_fit,
    delta_phase_metrics,
    evaluate_population,
    loss,
)
from .params import ParamVector  # noqa: F401
