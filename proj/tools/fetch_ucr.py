#!/usr/bin/env python3
"""Rebuild data/ucr/ from UCR archive copies bundled inside pip wheels.

GunPoint and ItalyPowerDemand come from the aeon wheel (.ts files), Trace from
the tslearn wheel (Trace.npz). Output is the UCR 2018 layout: one record per
line, tab separated, class label first.

    python3 tools/fetch_ucr.py [--out data/ucr]
"""

import argparse
import glob
import io
import os
import subprocess
import sys
import tempfile
import zipfile


def download(package, dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", package, "--no-deps", "-q", "-d", dest],
        check=True,
    )
    wheels = glob.glob(os.path.join(dest, "*.whl"))
    if not wheels:
        raise SystemExit(f"no wheel downloaded for {package}")
    return zipfile.ZipFile(wheels[0])


def ts_to_records(text):
    for line in text.splitlines():
        line = line.strip()
        if not line or line[0] in "#@":
            continue
        values, label = line.rsplit(":", 1)
        yield [label] + values.split(",")


def write_records(path, records):
    with open(path, "w") as f:
        for r in records:
            f.write("\t".join(r) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "ucr"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        aeon = download("aeon", os.path.join(tmp, "aeon"))
        for name in ("GunPoint", "ItalyPowerDemand"):
            for split in ("TRAIN", "TEST"):
                text = aeon.read(f"aeon/datasets/data/{name}/{name}_{split}.ts").decode()
                write_records(os.path.join(args.out, f"{name}_{split}.tsv"), ts_to_records(text))

        import numpy as np

        tslearn = download("tslearn", os.path.join(tmp, "tslearn"))
        npz = np.load(io.BytesIO(tslearn.read("tslearn/.cached_datasets/Trace.npz")))
        for split, x, y in (("TRAIN", npz["X_train"], npz["y_train"]),
                            ("TEST", npz["X_test"], npz["y_test"])):
            records = ([str(int(label))] + [repr(float(v)) for v in row]
                       for row, label in zip(x[:, :, 0], y))
            write_records(os.path.join(args.out, f"Trace_{split}.tsv"), records)

    print(f"wrote UCR files to {os.path.abspath(args.out)}")


if __name__ == "__main__":
    main()
