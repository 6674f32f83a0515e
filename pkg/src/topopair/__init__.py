"""Topometric ground-truth tooling for indoor visual place recognition.

Converts pairs of SLAM keyframe trajectories recorded along the same
indoor route into matched image-frame pairs with interpolated topometric
ground-truth locations, and evaluates retrieval against that ground truth
with recall@N.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateGeometryError,
    GenerationError,
    NotFoundError,
    ParseError,
    StateError,
    TopopairError,
    ValidationError,
    VersionConflictError,
)
from .trajectory import (
    Keyframe,
    SceneManifest,
    Trajectory,
    TrajectoryFormat,
    VisitEntry,
    load_scene_manifest,
    parse_trajectory,
    polyline_length,
    save_scene_manifest,
    serialize_trajectory,
)
from .turning import (
    TurningPoint,
    TurningPointOrigin,
    TurningPointSet,
    detect_turning_points,
    rdp_simplify,
    turn_angle,
)
from .matching import (
    AlignmentTransform,
    Correction,
    MatchStatus,
    TransformModel,
    TurningPointMatch,
    align_trajectory,
    apply_correction,
    fit_transform,
    fit_transform_from_matches,
    propose_matches,
)
from .groundtruth import (
    FramePair,
    SegmentPair,
    SplineCurve,
    fit_bspline,
    frame_count,
    generate_frame_pairs,
    interpolate_even,
    read_frame_pairs_csv,
    sample_frame_timestamps,
    split_segments,
    write_frame_pairs_csv,
)
from .evaluation import (
    EvaluationReport,
    ImageRole,
    LocalizedImage,
    RetrievalResult,
    evaluate_scenes,
    nearest_neighbor_retrieve,
    recall_at_n,
    weighted_average,
)
from .synthetic import (
    SpeedProfile,
    SyntheticRoute,
    SyntheticTraversal,
    TrueMatching,
    generate_route,
    traverse,
    true_matching,
)
from .config import PipelineConfig, load_config
