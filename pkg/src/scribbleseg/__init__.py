"""Sparse scribble annotations to dense segmentation training targets.

Seeded random-walker propagation turns a handful of scribbled pixels per
annotated slice into dense per-slice label maps; binary closing of the bone
mask removes local label noise; Dice reports and fold aggregation evaluate
the result. A synthetic screw-in-bone phantom generator provides ground
truth for end-to-end verification.
"""

from .metrics import DiceReport, FoldAggregate, aggregate_folds, dice_mask, dice_report
from .morphology import StructuringElement, close_bone_label, close_mask, dilate, erode
from .phantom import PhantomSpec, generate_phantom, generate_scribbles
from .pipeline import (
    PipelineConfig,
    run_cv_summary,
    run_evaluation,
    run_target_generation,
)
from .volumes import (
    BACKGROUND,
    BONE,
    CORRODED_SCREW,
    SCREW,
    UNLABELED,
    GrayVolume,
    LabelVolume,
    ScribbleSet,
    VolumeMeta,
    export_slice_image,
    extract_slice,
    load_gray_volume,
    load_label_volume,
    load_scribbles,
    load_volume,
    mask_labels_to_planes,
    normalize_intensities,
    save_scribbles,
    save_volume,
)
from .walker import (
    ProbabilityMap,
    RandomWalkerConfig,
    SolverConvergenceError,
    assemble_laplacian,
    edge_weights,
    propagate_annotated_slices,
    propagate_slice,
    slice_potentials,
    solve_dirichlet,
)

__version__ = "0.1.0"
