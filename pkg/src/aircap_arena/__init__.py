"""aircap_arena: a desk-scale multi-MAV aerial motion-capture arena.

Kinematic MAV agents with pitched-down pinhole cameras track a procedurally
animated 14-joint walking subject; decentralized velocity/yaw-rate policies
are trained with from-scratch PPO against MoCap-accuracy rewards computed
from synthetic pose-estimator proxies, and evaluated with CPE/MPE/visibility
statistics on a fixed published test trajectory.
"""

from .actor import JOINT_NAMES, NUM_JOINTS, ActorParams, PersonState, SkeletonTemplate
from .config import ArenaConfig, EvalConfig, TrainConfig, default_config, load_config
from .envs import TrackingEnv
from .errors import (CheckpointMismatch, ConfigError, DegenerateGeometry,
                     LengthMismatch, NonFiniteLoss, OutOfBoundsAction,
                     ShapeMismatch, VariantMismatch)
from .geometry import (BoundingBox, CameraModel, CameraPose, JointDetections,
                       PixelDetection, project, project_skeleton, rotation_yaw,
                       triangulate_point, triangulate_skeleton, world_to_camera)
from .perception import (MonocularPoseEstimate, NoiseConfig, NoisyDetections,
                         Observation, ObsVariant, build_observation, detect_joints,
                         monocular_pose_proxy, multiview_pose_estimate)
from .rewards import (RewardBreakdown, RewardConfig, RewardInputs, compose, r_center,
                      r_col, r_concol, r_mhmr, r_spin, r_triag, r_workspace, r_wspin,
                      v_pot)
from .variants import VARIANT_SPECS, VariantSpec, get_variant
from .world import (Action, MavState, StepEvents, WaypointCommand, WorldConfig,
                    WorldState, Workspace, action_to_waypoint, reset_episode,
                    step_env, track_waypoint)

__version__ = "0.1.0"
