"""Field files: a JSON header plus a sidecar binary of little-endian float64.

The header records the grid descriptor and, per array, its name, shape and
byte offset in the sidecar; arrays are stored row-major. Spinors are stored as
four real arrays ``(Re psi1, Re psi2, Im psi1, Im psi2)``.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import Domain, Grid
from .fields import ScalarField, SpinorField

FORMAT = "superl-fields/1"


def grid_from_json(d):
    return Grid(Domain.from_json(d), float(d["h"]), float(d["x0"]), float(d["y0"]), int(d["nx"]), int(d["ny"]))


def save_fields(path, grid, u=None, psi=None, extra=None):
    """Write ``path`` (JSON header) and ``path`` with suffix ``.bin``.

    ``extra`` maps names to arrays of shape ``grid.shape``. Returns the pair of
    paths written.
    """
    path = Path(path)
    arrays = []
    meta = {}
    if u is not None:
        meta["u_vanished"] = bool(u.vanished)
        arrays.append(("u", u.values))
    if psi is not None:
        arrays.append(("psi", psi.as_real()))
    for name, arr in (extra or {}).items():
        arrays.append((name, np.asarray(arr, dtype=float)))
    bin_path = path.with_suffix(".bin")
    entries = []
    offset = 0
    with open(bin_path, "wb") as fh:
        for name, arr in arrays:
            data = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(data.tobytes())
            entries.append({"name": name, "shape": list(data.shape), "offset": offset})
            offset += data.nbytes
    header = {"format": FORMAT, "grid": grid.to_json(), "binary": bin_path.name,
              "arrays": entries, **meta}
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path, bin_path


def load_fields(path):
    """Read a field file; returns a dict with ``grid`` and the stored fields
    (``u`` as ScalarField, ``psi`` as SpinorField, others as arrays)."""
    path = Path(path)
    header = json.loads(path.read_text(encoding="utf-8"))
    if header.get("format") != FORMAT:
        raise ValueError(f"{path}: not a field file")
    grid = grid_from_json(header["grid"])
    raw = (path.parent / header["binary"]).read_bytes()
    out = {"grid": grid}
    for e in header["arrays"]:
        n = int(np.prod(e["shape"]))
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=e["offset"]).reshape(e["shape"]).astype(float)
        if e["name"] == "u":
            out["u"] = ScalarField(grid, arr, vanished=header.get("u_vanished", False))
        elif e["name"] == "psi":
            out["psi"] = SpinorField.from_real(grid, arr)
        else:
            out[e["name"]] = arr
    return out


def export_csv(path, grid, u=None, psi=None, max_nodes=100_000):
    """Node table ``x, y, inside, u, re1, re2, im1, im2`` for small grids."""
    if grid.nx * grid.ny > max_nodes:
        raise ValueError(f"grid has {grid.nx * grid.ny} nodes; CSV export is limited to {max_nodes}")
    cols = {"x": grid.x.ravel(), "y": grid.y.ravel(), "inside": grid.inside.ravel().astype(int)}
    if u is not None and not u.vanished:
        cols["u"] = u.values.ravel()
    if psi is not None:
        for name, arr in zip(("re1", "re2", "im1", "im2"), psi.as_real()):
            cols[name] = arr.ravel()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in zip(*cols.values()):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else int(v) for v in row])
    return Path(path)
