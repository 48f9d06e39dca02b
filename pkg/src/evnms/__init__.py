"""Asynchronous corner detection and non-maximum suppression for
event-camera streams."""

__version__ = "0.1.0"

from .anms import (
    AnmsConfig,
    AnmsFilter,
    DecayedWindow,
    PipelineResult,
    compute_tau,
    decay_coefficient,
    decayed_window,
    process_corner_event,
    run_pipeline,
)
from .detectors import (
    ArcFastDetector,
    CircleTemplate,
    DetectionResult,
    EvFastDetector,
    EvHarrisConfig,
    EvHarrisDetector,
    SegmentationResult,
    arc_fast_detect,
    ev_fast_detect,
    ev_harris_detect,
    fast_corner_score,
    make_detector,
    segment_circle,
)
from .events import (
    Event,
    Polarity,
    SurfaceState,
    load_events,
    read_events,
    update_sae,
    write_events,
)
from .ground_truth import (
    EventLabel,
    Track,
    TrajectorySet,
    label_event,
    label_events,
    load_tracks,
    save_tracks,
    score_ground_truth,
    trajectory_position,
)
from .metrics import (
    BenchResult,
    MetricsReport,
    bench,
    confusion,
    reduction_rate,
    weighted_overall,
)
from .synth import SceneSpec, ShapeSpec, generate, scene_from_file
