"""Editorial-queue batch-service simulator and waiting-time analysis.

A discrete-event model of manuscripts queueing for periodic Editorial
Board meetings, plus tooling to ingest real submission records, build
normalized waiting-time histograms, and fit log-normal and cutoff
power-law curves to them.
"""

__version__ = "0.1.0"

from .fitting import (
    ComparisonReport,
    FitResult,
    LogNormalParams,
    ModelKind,
    PowerLawCutoffParams,
    compare,
    eval_lognormal,
    eval_powerlaw_cutoff,
    fit,
    goodness,
    initial_guess,
)
from .ingest import (
    ExclusionReason,
    IngestReport,
    SubmissionRecord,
    compute_waiting_time,
    ingest_csv,
    parse_records,
    validate,
)
from .simulation import (
    Manuscript,
    Regime,
    RejectionPolicy,
    SelectionPolicy,
    SimulationConfig,
    SimulationTrace,
    admit_arrival,
    classify_regime,
    generate_arrivals,
    make_rng,
    simulate,
    step_meeting,
    traffic_intensity,
)
from .stats import (
    Histogram,
    SampleSource,
    WaitingTimeSample,
    histogram,
    summary,
    waiting_times,
)

__all__ = [
    "__version__",
    # simulation
    "SimulationConfig",
    "SimulationTrace",
    "Manuscript",
    "SelectionPolicy",
    "RejectionPolicy",
    "Regime",
    "simulate",
    "generate_arrivals",
    "admit_arrival",
    "step_meeting",
    "traffic_intensity",
    "classify_regime",
    "make_rng",
    # stats
    "WaitingTimeSample",
    "SampleSource",
    "Histogram",
    "waiting_times",
    "histogram",
    "summary",
    # fitting
    "ModelKind",
    "LogNormalParams",
    "PowerLawCutoffParams",
    "FitResult",
    "ComparisonReport",
    "eval_lognormal",
    "eval_powerlaw_cutoff",
    "initial_guess",
    "fit",
    "goodness",
    "compare",
    # ingest
    "SubmissionRecord",
    "IngestReport",
    "ExclusionReason",
    "parse_records",
    "compute_waiting_time",
    "validate",
    "ingest_csv",
]
