"""
Low-rank adapter lifecycle and placement.
"""
from .adapter import FrozenBase, LoraAdapter, apply_reswu, effective_weight, init_adapter
from .placement import (ATTENTION_MATRICES, FFN_MATRICES, PlacementSpec, TrainableCount,
                        count_trainable, matrix_name)
