"""fusetrack: multi-rate detector fusion tracking.

A slow full-frame detector anchors the track on a subsample of frames,
a correlation filter fills every frame in between, and a fast detector
over a crop around the target cross-checks the filter. The package also
ships a synthetic scenario simulator, an evaluation harness, and a CLI
(``fusetrack simulate|track|evaluate|label|bench``).
"""

from .detectors import (
    Detection,
    DetectorSpec,
    DetectorTransportError,
    ScriptedDetector,
    SubprocessDetector,
    TcpDetector,
    best_detection,
    build_detector,
    parse_detector_spec,
)
from .evaluate import EvalReport, evaluate, read_report, write_report
from .frames import Frame, FrameDir, read_ppm, write_ppm
from .fusion import (
    ACQUIRING,
    LOST,
    PIPELINED,
    SYNCHRONOUS,
    TRACKING,
    FusionConfig,
    Pipeline,
    TrackOutput,
    TrackState,
    outputs_to_predictions,
    read_track_outputs,
    write_track_outputs,
)
from .geometry import BBox, intersect, iou
from .kcf import KcfModel, KcfParams, kcf_init, kcf_locate, kcf_reinit, kcf_update
from .metrics import (
    DEFAULT_THRESHOLDS,
    FormatError,
    GroundTruthTrack,
    GtEntry,
    OpeCurve,
    PredictedTrack,
    auc,
    average_overlap,
    ope_curve,
    per_frame_overlaps,
    read_ground_truth,
    read_predictions,
    success_rate,
    write_ground_truth,
    write_predictions,
)
from .simulate import (
    Event,
    GeneratedBundle,
    NoiseModel,
    Scenario,
    TrajectorySpec,
    generate,
    ground_truth,
    render_frame,
    scenario_from_dict,
    scenario_from_file,
)

__version__ = "0.1.0"
