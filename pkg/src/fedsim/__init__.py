"""
Federated continual fine-tuning simulator: configuration, state and orchestration.
"""
from .config import (
    EVAL_HEADS,
    STRATEGIES,
    ExperimentConfig,
    apply_overrides,
    dump_config,
    expand_sweep,
    load_config,
    parse_config,
    save_config,
    with_values,
)
from .runner import (
    ExperimentResult,
    SeedContext,
    ablation_suite,
    client_pool,
    load_dataset,
    prepare_seed,
    run_experiment,
    run_round,
    run_seed,
    run_task,
)
from .state import ClientState, ServerState, init_server
from .trace import TRACE_COLUMNS, RoundTrace, TaskRecord, write_partition_csvs, write_trace_csv
