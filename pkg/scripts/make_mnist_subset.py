"""Build the bundled MNIST subset as gzipped IDX files.

The source is the ``mnist`` npm package (v1.1.0), which ships 10,000 MNIST
digits as JSON arrays of intensities scaled to [0, 1]. The digits are
shuffled with a fixed seed and split into a training part and a test part::

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python scripts/make_mnist_subset.py package/src/digits data/mnist
"""
import argparse
import json
from pathlib import Path

import numpy as np

from memstdp.mnist import write_idx


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("digits_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--n-test", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20180501)
    args = ap.parse_args()

    images, labels = [], []
    for digit in range(10):
        data = np.asarray(json.loads((args.digits_dir / f"{digit}.json").read_text())["data"])
        block = np.rint(data.reshape(-1, 28, 28) * 255.0).clip(0, 255).astype(np.uint8)
        images.append(block)
        labels.append(np.full(len(block), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)

    order = np.random.default_rng(args.seed).permutation(len(labels))
    images, labels = images[order], labels[order]
    n_train = len(labels) - args.n_test

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_idx(args.out_dir / "train-images-idx3-ubyte.gz", images[:n_train])
    write_idx(args.out_dir / "train-labels-idx1-ubyte.gz", labels[:n_train])
    write_idx(args.out_dir / "t10k-images-idx3-ubyte.gz", images[n_train:])
    write_idx(args.out_dir / "t10k-labels-idx1-ubyte.gz", labels[n_train:])
    print(f"wrote {n_train} training and {args.n_test} test digits to {args.out_dir}")


if __name__ == "__main__":
    main()
