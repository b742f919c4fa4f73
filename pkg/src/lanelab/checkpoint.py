"""Text checkpoints for named float64 arrays.

Format: a header line `arrays <count>`, one `<name> <ndim> <dim...>` line
per array, then each array's values as whitespace-separated decimal rows
(one row per matrix row). Values are written with repr, so a load/save
round trip is bit-exact.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np


def save_arrays(path: str | Path, named: dict[str, np.ndarray]) -> None:
    path = Path(path)
    names = list(named)
    lines = [f"arrays {len(names)}"]
    for name in names:
        a = np.asarray(named[name], dtype=float)
        if a.ndim not in (1, 2):
            raise ValueError(f"{name}: only 1-D and 2-D arrays are supported")
        lines.append(f"{name} {a.ndim} " + " ".join(str(d) for d in a.shape))
    for name in names:
        a = np.atleast_2d(np.asarray(named[name], dtype=float))
        for row in a:
            lines.append(" ".join(repr(float(x)) for x in row))
    path.write_text("\n".join(lines) + "\n")


def load_arrays(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("arrays "):
        raise ValueError(f"{path}: not an array checkpoint")
    count = int(lines[0].split()[1])
    header = []
    for i in range(1, count + 1):
        parts = lines[i].split()
        name, ndim = parts[0], int(parts[1])
        shape = tuple(int(d) for d in parts[2:2 + ndim])
        header.append((name, ndim, shape))
    out: dict[str, np.ndarray] = {}
    cursor = count + 1
    for name, ndim, shape in header:
        rows = shape[0] if ndim == 2 else 1
        block = [[float(tok) for tok in lines[cursor + r].split()] for r in range(rows)]
        cursor += rows
        a = np.array(block, dtype=float)
        out[name] = a.reshape(shape)
    return out


def digest_arrays(named: dict[str, np.ndarray]) -> str:
    """Stable content hash over names, shapes and raw bytes."""
    h = hashlib.sha256()
    for name in sorted(named):
        a = np.ascontiguousarray(named[name], dtype=float)
        h.update(name.encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()
