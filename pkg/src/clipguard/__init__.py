"""Video classification and child-safety moderation with divided space-time attention."""

__version__ = "0.1.0"

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import PipelineConfig
from .dataset import ClipRecord, Label, Manifest, compute_stats, load_manifest, stratified_split
from .frame_store import FrameVolume, from_image_sequence, read_fvt, synth_clip, write_fvt
from .metrics import accuracy, confusion, precision_recall_f1, report
from .model import ModelConfig, backward, forward, init_params, predict_proba
from .moderation import ModerationVerdict, moderate
from .preprocess import AugmentConfig, NormalizationParams, build_pipeline
from .rng import RngStream
from .sampling import SamplingConfig, activity_score, adaptive_frame_count, uniform_indices
from .train import TrainConfig, fit, lr_at_step, select_best
