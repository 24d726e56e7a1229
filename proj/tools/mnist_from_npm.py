"""Convert the digits shipped with the npm `mnist` package into IDX files.

Usage: python3 tools/mnist_from_npm.py <package-dir> <out-dir>

<package-dir>/src/digits/<d>.json holds {"data": [...]} with 784 floats in [0, 1]
per image. Pixels are re-quantized with round(v * 255) and the images are
shuffled with a fixed seed so the files are not sorted by digit.
"""

import json
import random
import struct
import sys
from pathlib import Path


def main() -> None:
    package, out = Path(sys.argv[1]), Path(sys.argv[2])
    images, labels = [], []
    for digit in range(10):
        data = json.loads((package / "src" / "digits" / f"{digit}.json").read_text())["data"]
        for i in range(len(data) // 784):
            pixels = data[i * 784 : (i + 1) * 784]
            images.append(bytes(min(255, max(0, round(v * 255))) for v in pixels))
            labels.append(digit)
    order = list(range(len(images)))
    random.Random(0).shuffle(order)

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(order), 28, 28))
        for i in order:
            f.write(images[i])
    with open(out / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(order)))
        f.write(bytes(labels[i] for i in order))


if __name__ == "__main__":
    main()
