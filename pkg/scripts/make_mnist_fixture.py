"""Write the 5,000-image MNIST subset bundled with mlxtend as IDX files.

    python scripts/make_mnist_fixture.py tests/data

The subset holds 500 images per digit drawn from the official MNIST
training set. Output is gzip-compressed with a zero mtime, so reruns
produce identical bytes.
"""

import sys
from pathlib import Path

import numpy as np
from mlxtend.data import mnist_data

from corrtensor.data_io import write_idx_images, write_idx_labels


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x, y = mnist_data()
    images = x.reshape(-1, 28, 28) / 255.0
    write_idx_images(out / "mnist5k-images-idx3-ubyte.gz", images)
    write_idx_labels(out / "mnist5k-labels-idx1-ubyte.gz", y.astype(np.int64))
    print(f"wrote {images.shape[0]} images to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
