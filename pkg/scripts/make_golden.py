"""Regenerate the committed GKT1 golden files under tests/golden/.

Each tensor is filled from the SplitMix64 normal stream seeded by its index,
so the expected contents can be rebuilt anywhere without numpy's RNG.
Run from the repository root:  python scripts/make_golden.py
"""
import hashlib
import json
from pathlib import Path

import numpy as np

from graphkv.io import tensor_bytes
from graphkv.synthetic import SplitMix64

SHAPES = [
    (0, 0), (1, 1), (7, 3), (3, 7), (1, 16), (16, 1), (2, 2), (5, 5),
    (4, 64), (10, 8), (0, 5), (5, 0), (1, 0), (12,), (2, 3, 4),
    (32, 32), (9, 2), (3, 3), (100, 4), (6, 11),
]
OUT = Path(__file__).resolve().parent.parent / "tests" / "golden"


def golden_tensor(index: int) -> np.ndarray:
    shape = SHAPES[index]
    count = int(np.prod(shape))
    data = SplitMix64(1000 + index).normal(count).astype(np.float32).reshape(shape)
    if index == 2:
        data[0, 0] = -0.0
    return data


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    index = {}
    for i in range(len(SHAPES)):
        blob = tensor_bytes(golden_tensor(i))
        name = f"t{i:02d}.gkt"
        (OUT / name).write_bytes(blob)
        index[name] = {"shape": list(SHAPES[i]), "sha256": hashlib.sha256(blob).hexdigest()}
    (OUT / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(index)} golden tensors to {OUT}")


if __name__ == "__main__":
    main()
