#!/usr/bin/env python3
"""Fetch the Santa Fe laser series into data/santafe.txt (one integer per line).

The series ships inside the reservoirpy wheel, so this downloads the wheel
with pip and pulls the array out of it. Needs numpy.
"""

import argparse
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

import numpy as np

MEMBER = "reservoirpy/datasets/santafe_laser.npy"


def main():
    root = pathlib.Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--output", type=pathlib.Path, default=root / "data" / "santafe.txt")
    ap.add_argument("--version", default="0.4.2", help="reservoirpy release to download")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
             "-d", tmp, f"reservoirpy=={args.version}"],
            check=True,
        )
        wheel = next(pathlib.Path(tmp).glob("reservoirpy-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            series = np.load(io.BytesIO(z.read(MEMBER))).ravel()

    values = np.rint(series).astype(np.int64)
    if not np.allclose(values, series):
        sys.exit("series is not integer valued; refusing to round")
    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text("".join(f"{v}\n" for v in values))
    print(f"wrote {len(values)} values to {args.output}")


if __name__ == "__main__":
    main()
