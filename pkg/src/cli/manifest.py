"""Run manifests and the per-directory run lock.

A run directory is self-describing: `manifest.json` records the version,
the command line, the seeds and the full config, and after the run the
SHA-256 of every file written next to it. `config.yaml` holds the same
config as a loadable experiment file.
"""
import hashlib
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, List, Sequence, Union

from ..config import VERSION
from ..fedsim import ExperimentConfig, parse_config
from ..fedsim.config import config_to_dict
from ..utils.error_utils import RunLockError

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
CONFIG_FILE = "config.yaml"
LOCK_FILE = ".fedtalora.lock"


@dataclass
class RunManifest:
    """Description of one run directory.

    Attributes:
        version: Package version that produced the run.
        created: UTC timestamp (ISO 8601) of the run start.
        command: Command line that started the run.
        seeds: Experiment seeds.
        output_dir: Directory the run writes into.
        config: Full experiment config as a plain mapping.
        files: SHA-256 per output file, filled in after the run.
    """
    version: str
    created: str
    command: List[str]
    seeds: List[int]
    output_dir: str
    config: Dict[str, Any]
    files: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def create(cls, config: ExperimentConfig, output_dir: Union[str, Path],
               command: Sequence[str]) -> "RunManifest":
        return cls(
            version=VERSION,
            created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            command=list(command),
            seeds=list(config.seeds),
            output_dir=str(output_dir),
            config=config_to_dict(config),
        )

    def experiment_config(self) -> ExperimentConfig:
        """The recorded config, rebuilt."""
        return parse_config(self.config)

    def write(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
            f.write("\n")


def load_manifest(path: Union[str, Path]) -> RunManifest:
    with open(path, "r", encoding="utf-8") as f:
        return RunManifest(**json.load(f))


def file_inventory(output_dir: Union[str, Path]) -> Dict[str, str]:
    """SHA-256 of every output file in `output_dir`, excluding the manifest and the lock."""
    output_dir = Path(output_dir)
    inventory = {}
    for path in sorted(output_dir.iterdir()):
        if not path.is_file() or path.name in (MANIFEST_FILE, LOCK_FILE):
            continue
        inventory[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return inventory


@contextmanager
def run_lock(output_dir: Union[str, Path]) -> Iterator[Path]:
    """Hold the lock file of `output_dir` for the duration of a run.

    Args:
        output_dir: Run directory; created if missing.

    Yields:
        The output directory as a Path.

    Raises:
        RunLockError: If another process holds the directory.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    lock = output_dir / LOCK_FILE
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RunLockError(f"{output_dir} is locked by another run (remove {lock.name} if stale)")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield output_dir
    finally:
        lock.unlink(missing_ok=True)
