"""
Command-line sub-commands, run manifests and the identity suite.
"""
from .commands import ABLATION_COLUMNS, ablation_rows, build_parser, main, write_ablation_csv
from .manifest import RunManifest, file_inventory, load_manifest, run_lock
from .verify import IdentityCheck, faulty_residual, run_identity_suite
