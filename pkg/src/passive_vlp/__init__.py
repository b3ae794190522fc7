"""Passive multi-camera positioning of LED point targets."""
from .camera import (
    Camera,
    CameraPose,
    Intrinsics,
    Ray,
    backproject_direction,
    camera_to_world,
    is_visible,
    look_at_pose,
    observation_ray,
    project,
    world_to_camera,
)
from .errors import (
    BehindCamera,
    DegenerateGeometry,
    DegenerateLookAt,
    InsufficientRays,
    PositioningError,
    SamplingExhausted,
    TargetFailures,
)
from .refinement import (
    RefinementResult,
    SolverConfig,
    Termination,
    localize,
    refine_lm,
    reprojection_residual,
    residual_jacobian,
)
from .scene import ObservationSet, Room, Scene
from .simulation import (
    MonteCarloConfig,
    NoiseModel,
    RunMetrics,
    SweepParameter,
    SweepSpec,
    build_table1_scene,
    build_table4_scene,
    compute_metrics,
    run_monte_carlo,
    run_sweep,
    sample_targets,
    synthesize_observations,
)
from .triangulation import (
    LinearEstimate,
    RayProjector,
    localize_linear,
    point_ray_distance,
    ray_projector,
    triangulate_lls,
)
