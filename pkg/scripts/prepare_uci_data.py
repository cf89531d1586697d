"""Build data/*.csv for the optdigits, pendigits and landsat experiments.

The UCI files are not reachable from every machine, but the ``keel-ds``
wheel on PyPI ships the KEEL copies of all three.  KEEL concatenates the
original UCI training and test files in order, so the first rows are the
UCI training partition (3823 / 7494 / 4435 rows) and the rest the test
partition.

Usage::

    python scripts/prepare_uci_data.py [--wheel path/to/keel_ds-0.2.5-py3-none-any.whl]

Without ``--wheel`` the wheel is fetched with ``pip download --no-deps``
(the package itself is never installed; it pins an old numpy).
"""
import argparse
import csv
import glob
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

KEEL_VERSION = "0.2.5"

# name in data/ -> (KEEL file stem, rows in the UCI training file)
DATASETS = {
    "optdigits": ("optdigits", 3823),
    "pendigits": ("penbased", 7494),
    "landsat": ("satimage", 4435),
}


def fetch_wheel(dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
         f"keel-ds=={KEEL_VERSION}", "-d", dest],
        check=True,
    )
    return glob.glob(str(Path(dest) / "keel_ds-*.whl"))[0]


def parse_keel(text):
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([v.strip() for v in line.split(",")])
    return rows


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--wheel", help="local keel-ds wheel; downloaded if omitted")
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data"))
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or fetch_wheel(tmp)
        zf = zipfile.ZipFile(wheel)
        for name, (stem, n_train) in DATASETS.items():
            raw = zf.read(f"keel_ds/data/balanced/raw/{stem}.dat").decode()
            rows = parse_keel(raw)
            write_csv(out / f"{name}_train.csv", rows[:n_train])
            write_csv(out / f"{name}_test.csv", rows[n_train:])
            print(f"{name}: {n_train} train / {len(rows) - n_train} test, "
                  f"{len(rows[0]) - 1} features")


if __name__ == "__main__":
    main()
