"""
Class-incremental tasks and non-IID client partitioning.
"""
from .schemes import SCHEMES, PartitionPlan, build_plan, dirichlet_partition, quantity_partition
from .stats import PartitionStats, partition_stats
from .tasks import TaskSequence, split_tasks, train_val_split
