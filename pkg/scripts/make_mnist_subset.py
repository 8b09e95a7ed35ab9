"""Write a 5,000-image MNIST subset as IDX files.

The images come from the ``mnist_5k.csv.gz`` sample bundled with the
``mlxtend`` wheel (500 images per digit from the MNIST training set). They are
shuffled with a fixed seed and split into 4,000 training and 1,000 test images:

    python scripts/make_mnist_subset.py data/mnist

If ``mlxtend`` is not importable the wheel is fetched with ``pip download``.
"""

import gzip
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

import numpy as np

from s5lab.train.data import write_idx_images, write_idx_labels

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_csv_bytes():
    try:
        import mlxtend

        return (Path(mlxtend.__file__).parent / "data" / "data" / "mnist_5k.csv.gz").read_bytes()
    except ImportError:
        pass
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "mlxtend", "--no-deps", "-q", "-d", tmp],
                       check=True)
        wheel = next(Path(tmp).glob("mlxtend-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            return zf.read(MEMBER)


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = np.loadtxt(io.BytesIO(gzip.decompress(read_csv_bytes())), delimiter=",", dtype=np.int64)
    pixels, labels = table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)
    order = np.random.default_rng(0).permutation(len(labels))
    pixels, labels = pixels[order].reshape(-1, 28, 28), labels[order]
    for name, sl in (("train", slice(0, 4000)), ("t10k", slice(4000, 5000))):
        write_idx_images(out / f"{name}-images-idx3-ubyte", pixels[sl])
        write_idx_labels(out / f"{name}-labels-idx1-ubyte", labels[sl])
        for suffix in ("images-idx3-ubyte", "labels-idx1-ubyte"):
            raw = out / f"{name}-{suffix}"
            (out / f"{name}-{suffix}.gz").write_bytes(gzip.compress(raw.read_bytes(), mtime=0))
            raw.unlink()
    print(f"wrote {out}/{{train,t10k}}-{{images-idx3,labels-idx1}}-ubyte.gz")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/mnist")
