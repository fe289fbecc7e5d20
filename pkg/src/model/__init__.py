"""
Classifier family: frozen backbone, injectable adapters and a trainable head.
"""
from .config import ARCHITECTURES, ModelConfig
from .network import forward, predict
from .state import ModelState, attach_adapters, init_backbone, to_full_finetune
from .training import LOSSES, TrainResult, compute_loss, gradient_norm_sq, local_train
