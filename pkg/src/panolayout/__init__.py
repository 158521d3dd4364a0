"""Room-layout estimation from single equirectangular panoramas.

The pipeline detects great-circle line segments on the sphere, estimates a
Manhattan vanishing basis, intersects structural lines into corner candidates,
assembles closed rectilinear layout hypotheses, and ranks them by per-pixel
agreement with a reference orientation map. Neural edge/normal maps are plain
file inputs; a synthetic-scene generator provides ground truth for testing.
"""

from .geometry import (
    ViewSpec,
    golden_spiral_directions,
    pixel_to_ray,
    project_to_view,
    ray_to_pixel,
    rotate_panorama,
    stitch_avg_normals,
    stitch_max,
    view_rotation,
)
from .lines import (
    EstimationError,
    GreatCircleSegment,
    ThresholdConfig,
    VanishingBasis,
    classify_lines,
    cluster_edge_groups,
    detect_edges,
    estimate_vanishing_basis,
    fit_great_circle,
)
from .filtering import (
    filter_structural_lines,
    label_normals,
    score_line,
    threshold_probability,
)
from .corners import (
    CornerCandidate,
    classify_corner,
    extract_corner_candidates,
    intersect_lines,
)
from .hypotheses import (
    GenerationError,
    HypothesisConfig,
    LayoutModel,
    build_layout,
    estimate_floor_height,
    generate_hypotheses,
    sample_corner_group,
    validate_layout,
)
from .evaluation import (
    LABEL_NONE,
    LABEL_X,
    LABEL_Y,
    LABEL_Z,
    eop,
    eop_xy_invariant,
    render_labels,
    select_best,
)
from .synthetic import (
    Scene,
    SceneSpec,
    generate_scene,
    random_scene_spec,
    synth_edge_map,
    synth_normal_map,
)
from .pipeline import (
    BenchReport,
    PipelineConfig,
    StageError,
    bench,
    config_for_scene,
    run_pipeline,
    write_scene_dir,
)

__version__ = "0.1.0"
