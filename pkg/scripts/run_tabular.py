"""Perturbation study on the surrogate CSV (generated first if absent)."""

import sys
from pathlib import Path

from fairshift.cli import main

if __name__ == "__main__":
    if not Path("configs/data/surrogate.csv").exists():
        import make_surrogate
        make_surrogate.main([])
    sys.exit(main(["tabular", "--config", "configs/tabular_surrogate.yaml", *sys.argv[1:]]))
