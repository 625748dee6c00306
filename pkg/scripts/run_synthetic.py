"""Synthetic SCM study at high and low shift; thin wrapper over the CLI."""

import sys

from fairshift.cli import main

if __name__ == "__main__":
    for name in ("synth_high_gamma", "synth_low_gamma"):
        code = main(["synth", "--config", f"configs/{name}.yaml", *sys.argv[1:]])
        if code:
            sys.exit(code)
