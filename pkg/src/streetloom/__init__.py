"""Geo-registered street panorama tooling: spatial indexing, cross-time
pair mining, panorama projection, retrieval planning, autoregressive
generation sessions, and evaluation metrics."""

from .errors import StreetloomError
from .geodesy import (GeodeticCoord, SE3Pose, ecef_to_geodetic,
                      geodetic_to_ecef, pose_distance, to_relative_poses)
from .pano_index import (CorridorHit, IngestReport, PanoRecord, PanoramaStore,
                         SpatialIndex, TrajectorySegment)
from .pair_mining import MinedPair, PairMiningParams, align_window, mine_pairs
from .planner import (PlannerParams, RetrievalPlan, UserPath, chunk_plan,
                      plan_condition_path, validate_plan)
from .projection import (AugmentationParams, DropoutPolicy,
                         build_training_example, compute_latent_shape,
                         crop_perspective, sample_condition_length,
                         sample_dropout_flags, sample_yaw_schedule)
from .session import (BACKENDS, ConditionPackage, EchoBackend,
                      GeneratorBackend, PoseStampBackend, SessionEngine,
                      SessionState, export_session, loop_closure_error)
from .metrics import (MetricReport, fid_from_features, masked_video_metrics,
                      psnr, ssim, video_metrics)

__version__ = "0.1.0"

__all__ = [
    "StreetloomError",
    "GeodeticCoord", "SE3Pose", "ecef_to_geodetic", "geodetic_to_ecef",
    "pose_distance", "to_relative_poses",
    "CorridorHit", "IngestReport", "PanoRecord", "PanoramaStore",
    "SpatialIndex", "TrajectorySegment",
    "MinedPair", "PairMiningParams", "align_window", "mine_pairs",
    "PlannerParams", "RetrievalPlan", "UserPath", "chunk_plan",
    "plan_condition_path", "validate_plan",
    "AugmentationParams", "DropoutPolicy", "build_training_example",
    "compute_latent_shape", "crop_perspective", "sample_condition_length",
    "sample_dropout_flags", "sample_yaw_schedule",
    "BACKENDS", "ConditionPackage", "EchoBackend", "GeneratorBackend",
    "PoseStampBackend", "SessionEngine", "SessionState", "export_session",
    "loop_closure_error",
    "MetricReport", "fid_from_features", "masked_video_metrics", "psnr",
    "ssim", "video_metrics",
    "__version__",
]
