#!/usr/bin/env python3
"""Write a small MNIST subset in IDX format.

The subset is the 5,000-image MNIST sample bundled with the mlxtend wheel
(500 images per class). Per class, the first TRAIN_PER_CLASS rows in file
order become the train files; the rest become the t10k files.

    python3 scripts/fetch_mnist_subset.py OUT_DIR [--wheel PATH]

Without --wheel the wheel is fetched with `pip download`.
"""

import argparse
import gzip
import struct
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
TRAIN_PER_CLASS = 100


def fetch_wheel(dest: Path) -> Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", str(dest), "mlxtend==0.24.0"],
        check=True,
    )
    return next(dest.glob("mlxtend-*.whl"))


def read_rows(wheel: Path):
    text = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER)).decode()
    for line in text.splitlines():
        values = [int(v) for v in line.split(",")]
        yield values[:784], values[784]


def write_idx(path: Path, images, labels) -> None:
    with open(path.with_name(path.name.replace("LABEL", "images-idx3-ubyte")), "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with open(path.with_name(path.name.replace("LABEL", "labels-idx1-ubyte")), "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--wheel", type=Path)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or fetch_wheel(Path(tmp))
        seen = [0] * 10
        train, test = ([], []), ([], [])
        for pixels, label in read_rows(wheel):
            target = train if seen[label] < TRAIN_PER_CLASS else test
            seen[label] += 1
            target[0].append(pixels)
            target[1].append(label)
    write_idx(args.out_dir / "train-LABEL", *train)
    write_idx(args.out_dir / "t10k-LABEL", *test)
    print(f"train {len(train[1])}, t10k {len(test[1])} -> {args.out_dir}")


if __name__ == "__main__":
    main()
