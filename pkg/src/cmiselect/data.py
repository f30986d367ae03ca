"""Dataset container and CSV serialization.

A dataset is m variable-width feature blocks plus a target column.
CSV columns are named x<i>_<j> (block i, coordinate j) plus y; extra
scalar columns (e.g. the latent radius of the 2D bullseye) are carried
through by name. Floats are written with repr so round-trips are exact.
"""

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dataset:
    blocks: list
    y: np.ndarray
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.blocks = [np.asarray(b, dtype=np.float64) for b in self.blocks]
        self.blocks = [b.reshape(-1, 1) if b.ndim == 1 else b for b in self.blocks]
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        n = self.y.shape[0]
        for i, b in enumerate(self.blocks):
            if b.shape[0] != n:
                raise ValueError(f"block {i} has {b.shape[0]} rows, expected {n}")

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def m(self):
        return len(self.blocks)

    @property
    def feature_dims(self):
        return [b.shape[1] for b in self.blocks]

    def to_csv(self, path):
        header = []
        for i, b in enumerate(self.blocks):
            header.extend(f"x{i}_{j}" for j in range(b.shape[1]))
        header.append("y")
        header.extend(self.extras.keys())
        extra_cols = [np.asarray(v, dtype=np.float64).reshape(-1)
                      for v in self.extras.values()]
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            for row_idx in range(self.n):
                row = []
                for b in self.blocks:
                    row.extend(repr(float(v)) for v in b[row_idx])
                row.append(repr(float(self.y[row_idx])))
                row.extend(repr(float(c[row_idx])) for c in extra_cols)
                w.writerow(row)

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as f:
            reader = csv.reader(f)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty CSV") from None
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise ValueError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric value") from None
        if not rows:
            raise ValueError(f"{path}: no data rows")
        table = np.array(rows, dtype=np.float64)
        col = {name: table[:, idx] for idx, name in enumerate(header)}
        if "y" not in col:
            raise ValueError(f"{path}: missing 'y' column")
        block_cols = {}
        extras = {}
        for name in header:
            if name == "y":
                continue
            if name.startswith("x") and "_" in name:
                try:
                    i, j = (int(p) for p in name[1:].split("_", 1))
                except ValueError:
                    extras[name] = col[name]
                    continue
                block_cols.setdefault(i, {})[j] = col[name]
            else:
                extras[name] = col[name]
        blocks = []
        for i in sorted(block_cols):
            coords = block_cols[i]
            blocks.append(np.column_stack([coords[j] for j in sorted(coords)]))
        return cls(blocks=blocks, y=col["y"], extras=extras)
