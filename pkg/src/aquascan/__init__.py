"""Water detection in video from invariant spatio-temporal descriptors."""

from .descriptors import (
    extract_signal,
    fuse_early,
    fuse_late,
    lbp_histogram,
    lbp_value,
    min_shift_distance_oracle,
    temporal_descriptor,
)
from .forest import Dataset, ForestConfig, ForestModel, load_model, predict_proba, predict_proba_batch, sample_training_set, save_model, train
from .metrics import classify_by_selection, detection_fit, frame_fit, per_class_report
from .mrf import LabelVolume, ProbabilityVolume, energy, labels_to_masks, regularize
from .pipeline import PipelineConfig, detect, preprocess_video, run_experiment, train_pipeline
from .residual import KdeConfig, ModeFrame, residual_video, scott_bandwidth, temporal_mode_direct, temporal_mode_kde
from .synth import SynthConfig, generate_dataset, generate_nonwater, generate_water
from .video_io import (
    FrameSequence,
    MaskSequence,
    downsample_quarter,
    load_frame_sequence,
    load_mask_sequence,
    read_pnm,
    save_frame_sequence,
    save_mask_sequence,
    write_pgm,
)

__version__ = "0.1.0"
