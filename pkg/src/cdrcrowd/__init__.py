"""Event attendance estimation from anonymized cellular network records."""

from .domain import (
    Cell,
    CdrRecord,
    EventSpec,
    GeoPoint,
    STRUCTURED,
    UNSTRUCTURED,
    ValidationError,
)
from .geo import EventArea, distance, is_relevant, relevant_cells
from .store import (
    CdrStore,
    IngestError,
    LoadReport,
    build_store,
    ingest_cdrs,
    read_cells,
    read_events,
    write_cdrs,
    write_cells,
    write_events,
)
from .mobility import (
    avg_inter_cdr_time,
    inter_cdr_times,
    quartile_summary,
    radius_of_gyration,
)
from .radius import (
    NoEventSignal,
    RadiusProfile,
    SweepConfig,
    best_radius_multi,
    best_radius_single,
    z_scores_by_radius,
)
from .attendance import (
    PresenceAssessment,
    RawAttendance,
    estimate_raw_attendance,
    naive_count,
    presence_probability,
)
from .regression import (
    DegenerateDesign,
    ErrorReport,
    FitLine,
    InsufficientTraining,
    TrainingPair,
    error_metrics,
    fit_ols,
    fit_range,
    leave_one_out_eval,
    predict_piecewise,
    predict_range,
)
from .simulator import (
    CityConfig,
    PlantedEvent,
    SyntheticCity,
    UsageModel,
    add_activity_cluster,
    generate_city,
    plant_event,
)
from .pipeline import PipelineConfig, PipelineResult, StageError, run_pipeline
from .scenarios import build_scenario, write_scenario

__version__ = "0.1.0"

__all__ = [
    "Cell",
    "CdrRecord",
    "CdrStore",
    "CityConfig",
    "DegenerateDesign",
    "ErrorReport",
    "EventArea",
    "EventSpec",
    "FitLine",
    "GeoPoint",
    "IngestError",
    "InsufficientTraining",
    "LoadReport",
    "NoEventSignal",
    "PipelineConfig",
    "PipelineResult",
    "PlantedEvent",
    "PresenceAssessment",
    "RadiusProfile",
    "RawAttendance",
    "STRUCTURED",
    "StageError",
    "SweepConfig",
    "SyntheticCity",
    "TrainingPair",
    "UNSTRUCTURED",
    "UsageModel",
    "ValidationError",
    "add_activity_cluster",
    "avg_inter_cdr_time",
    "best_radius_multi",
    "best_radius_single",
    "build_scenario",
    "build_store",
    "distance",
    "error_metrics",
    "estimate_raw_attendance",
    "fit_ols",
    "fit_range",
    "generate_city",
    "ingest_cdrs",
    "inter_cdr_times",
    "is_relevant",
    "leave_one_out_eval",
    "naive_count",
    "plant_event",
    "predict_piecewise",
    "predict_range",
    "presence_probability",
    "quartile_summary",
    "radius_of_gyration",
    "read_cells",
    "read_events",
    "relevant_cells",
    "run_pipeline",
    "write_cdrs",
    "write_cells",
    "write_events",
    "write_scenario",
    "z_scores_by_radius",
]
