"""Command-line entry point for the fedtalora simulator.

Usage:
    python app.py run configs/desk.yaml
    python app.py verify
    python app.py partition-preview configs/desk.yaml
    python app.py ablate configs/desk.yaml --variants reswu naive head_only
"""
import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
