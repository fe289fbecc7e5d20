"""Small experiment configs shared by the simulator tests."""
from src.fedsim import parse_config, with_values


def tiny_config(**values):
    """A two-task, three-client transformer run that finishes in seconds.

    Keyword arguments are dotted keys with `__` in place of the dots.
    """
    config = parse_config({
        "dataset": {"num_classes": 4, "input_dim": 4, "train_per_class": 12, "test_per_class": 4,
                    "separation": 4.0, "noise": 0.5, "val_fraction": 0.25},
        "tasks": {"num_tasks": 2},
        "clients": {"num_clients": 3, "scheme": "dirichlet", "beta": 1e6},
        "train": {"rounds": 2, "local_epochs": 1, "batch_size": 8, "lr_lora": 0.01, "lr_head": 0.1},
        "model": {"arch": "transformer", "depth": 1, "dim": 4, "ffn_dim": 6, "num_tokens": 2},
        "lora": {"rank": 2, "init_std": 0.1, "blocks": "all"},
        "seeds": [3],
    })
    return with_values(config, {k.replace("__", "."): v for k, v in values.items()}).validate()
