"""Write an SCM-generated surrogate CSV plus schema sidecar for tabular mode.

    python scripts/make_surrogate.py --out configs/data --gamma 10 --n 2000
"""

import argparse
from pathlib import Path

from fairshift.data import dump_schema, write_csv
from fairshift.experiment import surrogate_dataset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="configs/data")
    ap.add_argument("--gamma", type=float, default=10.0)
    ap.add_argument("--n", type=int, default=2000, help="rows per domain")
    ap.add_argument("--seed", type=int, default=0, help="master seed")
    ap.add_argument("--replicate", type=int, default=0)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = surrogate_dataset(args.seed, args.replicate, args.gamma, args.n)
    write_csv(ds, out / "surrogate.csv")
    dump_schema(ds.schema, out / "surrogate.schema.yaml")
    print(f"wrote {ds.n} rows to {out / 'surrogate.csv'}")


if __name__ == "__main__":
    main()
