"""Keyed random streams for the fedtalora project.

Every random draw in the simulator comes from a generator produced here, so
results depend only on the seed and the stream key, never on execution
order or on how many workers run clients in parallel.
"""
import numpy as np

# Stream identifiers; the integers are part of the reproducibility contract.
BACKBONE = 1
HEAD = 2
ADAPTER = 3
TASK_ORDER = 4
TRAIN_VAL_SPLIT = 5
PARTITION = 6
DATASET = 7
LOCAL_TRAIN = 8
VERIFY = 9


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Create an independent generator for `seed` and a key path.

    Args:
        seed: The experiment seed.
        *keys: Non-negative integers identifying the stream, e.g.
            `(LOCAL_TRAIN, task, round, client)`.

    Returns:
        A PCG64-backed generator.
    """
    entropy = [int(seed), *(int(k) for k in keys)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def client_stream(seed: int, task: int, round_index: int, client: int) -> np.random.Generator:
    """Stream for one client's local training in one round."""
    return stream(seed, LOCAL_TRAIN, task, round_index, client)
