"""Video saliency detection on spatiotemporal supervoxel graphs."""

__version__ = "0.1.0"

from .config import PipelineConfig, build_config, read_config_file
from .errors import ConfigError, DataError, StageError
from .evaluation import RocCurve, SequenceReport, evaluate_sequence, nss, roc_auc
from .features import (
    FeatureTensor,
    UnitFeatureTable,
    lab_feature_tensor,
    pool_unit_features,
    read_feature_tensor,
    write_feature_tensor,
)
from .fusion import (
    FusionConfig,
    SaliencyMap,
    fuse_maps,
    read_map,
    render_map,
    render_overlays,
    threshold_region,
    write_map,
)
from .graph import KernelParams, SaliencyGraph, build_affinity, compute_adjacency, rbf_affinity
from .propagation import (
    PropagationConfig,
    SaliencyScores,
    SeedVector,
    compute_seed,
    normalize_scores,
    solve_closed_form,
    verify_stationarity,
)
from .segmentation import (
    LabelVolume,
    SupervoxelHierarchy,
    VoxelGraph,
    build_hierarchy,
    build_voxel_graph,
    fh_segment,
    load_labels,
    save_labels,
    select_layer,
)
from .volume import (
    GroundTruthMasks,
    VideoVolume,
    load_frame_sequence,
    load_ground_truth,
    rgb_to_lab,
)

__all__ = [name for name in dir() if not name.startswith("_")]
