"""Versioned binary serialization for fitted projections.

Layout: magic ``THSPROJ1`` (8 bytes), version (u32 LE), header length
(u32 LE), JSON header (dims, seed, ids, fingerprints, array shapes), then
the arrays as little-endian float64 in header order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..embedding import VectorSet
from .pca import PcaModel, ProjectionError

MAGIC = b"THSPROJ1"
VERSION = 1


def save_projection(path, pca: PcaModel, reduced: VectorSet,
                    plot2d: VectorSet | None = None, seed: int = 0) -> None:
    arrays = {
        "pca_mean": pca.mean,
        "pca_basis": pca.basis,
        "pca_explained_variance": pca.explained_variance,
        "reduced": reduced.matrix,
    }
    if plot2d is not None:
        arrays["plot2d"] = plot2d.matrix
    header = {
        "dims": {
            "input": int(pca.basis.shape[0]),
            "pca": int(pca.basis.shape[1]),
            "reduced": int(reduced.matrix.shape[1]),
        },
        "seed": int(seed),
        "ids": list(reduced.ids),
        "fingerprint": reduced.provider_fingerprint,
        "arrays": {k: list(v.shape) for k, v in arrays.items()},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for key in sorted(arrays):
            fh.write(np.ascontiguousarray(arrays[key], dtype="<f8").tobytes())


def load_projection(path):
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ProjectionError(f"{path}: not a projection file")
    (version,) = struct.unpack_from("<I", raw, 8)
    if version != VERSION:
        raise ProjectionError(f"{path}: unsupported version {version}")
    (hlen,) = struct.unpack_from("<I", raw, 12)
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    off = 16 + hlen
    arrays = {}
    for key in sorted(header["arrays"]):
        shape = tuple(header["arrays"][key])
        count = int(np.prod(shape)) if shape else 1
        arrays[key] = np.frombuffer(
            raw, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += 8 * count
    pca = PcaModel(mean=arrays["pca_mean"], basis=arrays["pca_basis"],
                   explained_variance=arrays["pca_explained_variance"])
    ids = tuple(header["ids"])
    reduced = VectorSet(ids, arrays["reduced"], header["fingerprint"])
    plot2d = None
    if "plot2d" in arrays:
        plot2d = VectorSet(ids, arrays["plot2d"], header["fingerprint"] + "|2d")
    return pca, reduced, plot2d, header["seed"]
