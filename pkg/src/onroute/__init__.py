"""Online routing under a release radius: simulation, baselines, measurement."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .errors import (
    CapExceeded,
    EmptyBall,
    EmptyReport,
    LocalityViolation,
    MetricViolation,
    MissingPosition,
    NontermGuard,
    OnrouteError,
    ParseError,
    PolicyStalled,
    SchemaViolation,
    SequentialityViolation,
)
from .metric import (
    EdgePos,
    GeneralSpace,
    LineSpace,
    euclidean_space,
    space_from_json,
    validate_metric,
)
from .model import (
    AdaptiveOracle,
    FixedOracle,
    Instance,
    Request,
    RequestOracle,
    SequentialOracle,
    StreamSetup,
    check_sequential,
    check_spatial_locality,
    instance_from_json,
    load_instance,
    load_stream,
    save_instance,
    setup_from_instance,
)
from .offline import (
    Schedule,
    Step,
    evaluate_schedule,
    opt_exact,
    opt_ktour_minmax,
    opt_lower_bound,
)
from .adversary import sweep_family
from .harness import (
    Bound,
    RunResult,
    emit_plotdata,
    run_experiment,
    run_one,
    summarize,
    theoretical_bound,
    write_csv,
)
from .policies import POLICIES, Policy, make_policy
from .simulate import Trace, audit, load_trace, run, trace_from_jsonl
from .tours import pair_tour, pair_tour_exact, tsp_tour, tsp_tour_exact

__version__ = "0.1.0"

__all__ = [
    "AdaptiveOracle", "Bound", "CapExceeded", "EdgePos", "EmptyBall",
    "EmptyReport", "FixedOracle", "GeneralSpace", "Instance",
    "KERNEL_BACKEND", "LineSpace", "LocalityViolation", "MetricViolation",
    "MissingPosition", "NontermGuard", "OnrouteError", "POLICIES",
    "ParseError", "Policy", "PolicyStalled", "Request", "RequestOracle",
    "RunResult", "Schedule", "SchemaViolation", "SequentialOracle",
    "SequentialityViolation", "Step", "StreamSetup", "Trace", "audit",
    "check_sequential", "check_spatial_locality", "emit_plotdata",
    "euclidean_space", "evaluate_schedule", "instance_from_json",
    "load_instance", "load_stream", "load_trace", "make_policy", "opt_exact",
    "opt_ktour_minmax", "opt_lower_bound", "pair_tour", "pair_tour_exact",
    "run", "run_experiment", "run_one", "save_instance",
    "setup_from_instance", "space_from_json", "summarize", "sweep_family",
    "theoretical_bound", "trace_from_jsonl", "tsp_tour", "tsp_tour_exact",
    "validate_metric", "write_csv",
]
