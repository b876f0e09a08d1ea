"""Trains a byte-level seq2seq model on request/response hex corpora and
serves it over a line-oriented TCP protocol."""

from .errors import BadCorpus, CorpusTooLong, ModelBackendError
from .service import InferenceServer, Responder, serve_inference
from .training import TrainConfig, TrainResult, finetune, load_checkpoint

__all__ = [
    "BadCorpus", "CorpusTooLong", "ModelBackendError",
    "InferenceServer", "Responder", "serve_inference",
    "TrainConfig", "TrainResult", "finetune", "load_checkpoint",
]
__version__ = "0.1.0"
