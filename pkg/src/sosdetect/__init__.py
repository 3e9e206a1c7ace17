# sosdetect/__init__.py
# !/usr/bin/env python3

__version__ = "0.1.0"

from ._exceptions import SosDetectError
from .config import RunConfig, load_run_config
from .detect.detector import DetectConfig, detect_image, detect_image_candidates
from .evaluation.metrics import EvalConfig, curve, precision_recall
from .net.checkpoint import load_checkpoint, save_checkpoint
from .net.model import DetectorModel, ModelConfig, init_weights
from .raster.image import Image
from .raster.ppm import read_ppm, write_ppm
from .train.loop import TrainConfig, train_loop
