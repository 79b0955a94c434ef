"""voxfuse: multimodal voxel fusion, open-vocabulary search, object inventory."""

__version__ = "0.1.0"

from .actions import apply_merge, apply_remember, apply_rename
from .diff import DiffReport, diff_inventories, diff_versions
from .errors import BudgetError, FormatError, StoreError, VoxfuseError
from .frames import CoarseFeatureMap, Frame, build_coarse_map, sample_coarse
from .fusion import integrate_frame, view_tsdf
from .insitu import (
    InSituModel,
    ObjectGraph,
    TrainConfig,
    TrainReport,
    classify_segment,
    fit_inventory,
    forward,
    grad,
    init_insitu_model,
    knn_edges,
    sample_null_graph,
    sample_object_graph,
    train,
)
from .meshing import Mesh, export_mesh, extract_mesh, import_mesh, resample_vertex_features
from .pipeline import FuseResult, fuse_frames, resegment
from .query import (
    HashEmbedder,
    LookupEmbedder,
    NegativeSet,
    QueryEmbedding,
    build_negative_set,
    embed_query,
    normalize_heat,
    rank_segments,
    score_vertices,
)
from .segmentation import (
    Inventory,
    LabelVolume,
    ObjectSegment,
    build_inventory,
    flood_fill,
    label_voxels,
    load_inventory,
    save_inventory,
)
from .store import SceneStore, SceneVersion
from .volume import GridConfig, IntegrationStats, MultiVolume, new_volume
