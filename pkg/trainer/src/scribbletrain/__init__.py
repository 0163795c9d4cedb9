"""Multi-slice 2.5D U-Net training on scribble-derived segmentation targets."""

from .augment import AffineRanges, apply_affine_pair, sample_affine_matrix
from .data import SamplePool, extract_training_crop
from .losses import masked_weighted_cross_entropy
from .network import NetworkSpec, build_network
from .train import TrainSpec, predict_annotated_planes, train_fold

__version__ = "0.1.0"
