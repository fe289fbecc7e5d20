"""
Server-side aggregation of client updates.
"""
from .models import AggregationResult, ClientUpdate
from .strategies import (
    AGGREGATION_STRATEGIES,
    aggregate,
    aggregate_factors,
    aggregate_head,
    average_dense,
    dense_aggregate_oracle,
    fedavg_weights,
    residual_weight,
    residual_weight_pairwise,
)
