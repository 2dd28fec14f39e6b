"""Visibility-safe visual servoing under bounded camera-calibration error.

The package closes a pose-based servo loop around a fiducial marker while a
control barrier filter keeps every marker corner inside the camera's field of
view - including when the hand-eye calibration is wrong by a bounded amount,
and while a human operator injects twists through shared control.
"""

from .barriers import (
    BarrierState,
    ConstraintRow,
    MarkerObservation,
    barrier_values,
    stack_rows,
    visibility_constraint_rows,
    z_constraint_row,
)
from .camera import CameraModel, Intrinsics, camera_model, nominal_corners, unit_camera
from .hil import HilParams, beta, blend
from .qp import QpSolution, solve_filtered, solve_min_norm, solve_robust
from .robust import (
    ErrorBounds,
    RobustCamera,
    ThetaBounds,
    VerificationReport,
    fov_containment_check,
    robust_camera,
    robust_z_offset,
    shrink_corners,
    verify_theta_bounds,
)
from .se3 import RigidTransform, rotation_from_vector, rotation_to_vector, skew, twist_exponential
from .servo import (
    FeatureError,
    feature_error,
    interaction_matrix,
    saturate_twist,
    servo_twist,
)
from .sim import (
    ConfigError,
    Controller,
    ScenarioConfig,
    ScenarioResult,
    TraceRecord,
    WorldState,
    adversarial_scenario,
    default_scenario,
    load_scenario,
    observe,
    observe_estimated,
    randomized_scenario,
    run_scenario,
    save_scenario,
    step,
    write_trace_csv,
    write_trace_jsonl,
)
from .teleop import TeleopSession, create_app

__version__ = "0.1.0"

__all__ = [
    "BarrierState",
    "CameraModel",
    "ConfigError",
    "ConstraintRow",
    "Controller",
    "ErrorBounds",
    "FeatureError",
    "HilParams",
    "Intrinsics",
    "MarkerObservation",
    "QpSolution",
    "RigidTransform",
    "RobustCamera",
    "ScenarioConfig",
    "ScenarioResult",
    "TeleopSession",
    "ThetaBounds",
    "TraceRecord",
    "VerificationReport",
    "WorldState",
    "adversarial_scenario",
    "barrier_values",
    "beta",
    "blend",
    "camera_model",
    "create_app",
    "default_scenario",
    "feature_error",
    "fov_containment_check",
    "interaction_matrix",
    "load_scenario",
    "nominal_corners",
    "observe",
    "observe_estimated",
    "randomized_scenario",
    "robust_camera",
    "robust_z_offset",
    "rotation_from_vector",
    "rotation_to_vector",
    "run_scenario",
    "saturate_twist",
    "save_scenario",
    "servo_twist",
    "shrink_corners",
    "skew",
    "solve_filtered",
    "solve_min_norm",
    "solve_robust",
    "stack_rows",
    "step",
    "twist_exponential",
    "unit_camera",
    "verify_theta_bounds",
    "visibility_constraint_rows",
    "write_trace_csv",
    "write_trace_jsonl",
    "z_constraint_row",
]
