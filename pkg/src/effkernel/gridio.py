"""File formats: binary grids, CSV tables, PGM heatmaps, run manifests.

Binary grid layout (little-endian throughout)::

    8 bytes   magic b"EKGRID1\\0"
    uint32    ndim (1 or 2)
    uint32    ncomp
    uint64    shape[ndim]
    float64   spacing
    float64   time
    uint64    count (= ncomp * prod(shape))
    float64   payload[count], component-major, C order
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .eigenflow import LambdaH
from .reduction import CutoffSpec, EffectiveSystem
from .simulate import Field

MAGIC = b"EKGRID1\0"


def atomic_write(path, data: bytes) -> Path:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def grid_bytes(f: Field) -> bytes:
    head = MAGIC + struct.pack("<II", f.dimension, f.ncomp)
    head += struct.pack(f"<{f.dimension}Q", *f.shape)
    head += struct.pack("<ddQ", f.spacing, f.time, f.values.size)
    return head + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def write_grid(path, f: Field) -> Path:
    return atomic_write(path, grid_bytes(f))


def read_grid(path) -> Field:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a grid file")
    ndim, ncomp = struct.unpack_from("<II", data, 8)
    if ndim not in (1, 2):
        raise ValueError(f"{path}: unsupported dimension {ndim}")
    off = 16
    shape = struct.unpack_from(f"<{ndim}Q", data, off)
    off += 8 * ndim
    spacing, time, count = struct.unpack_from("<ddQ", data, off)
    off += 24
    if count != ncomp * int(np.prod(shape)) or len(data) != off + 8 * count:
        raise ValueError(f"{path}: payload size does not match the header")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(float)
    return Field(values.reshape((ncomp,) + tuple(shape)), spacing, time)


def csv_text(header, columns) -> str:
    columns = np.asarray(columns, dtype=float)
    if columns.ndim == 1:
        columns = columns[:, None]
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in columns]
    return "\n".join(lines) + "\n"


def write_csv(path, header, columns) -> Path:
    return atomic_write(path, csv_text(header, columns).encode())


def read_csv(path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    return header, np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln])


def pgm_bytes(image: np.ndarray) -> bytes:
    """8-bit binary PGM with a linear [min, max] -> [0, 255] map."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("PGM needs a 2D array")
    lo, hi = float(img.min()), float(img.max())
    scaled = np.zeros(img.shape) if hi == lo else (img - lo) / (hi - lo)
    pix = np.rint(scaled * 255).astype(np.uint8)
    return f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode() + pix.tobytes()


def write_pgm(path, image) -> Path:
    return atomic_write(path, pgm_bytes(image))


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, manifest: dict) -> Path:
    text = json.dumps(manifest, indent=2, sort_keys=True, default=_json_default)
    return atomic_write(path, (text + "\n").encode())


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def save_system(directory, system: EffectiveSystem) -> list[Path]:
    """Write kernels as grid files plus a system.json descriptor."""
    directory = Path(directory)
    written = []
    files = {}
    for name, kern in sorted(system.kernels.items()):
        p = write_grid(directory / f"kernel_{name}.grid", Field(kern[None], system.spacing))
        files[name] = p.name
        written.append(p)
    desc = {
        "kind": system.kind,
        "dimension": system.dimension,
        "lambda_h": {"degree": system.lambda_h.degree, "coefficient": system.lambda_h.coefficient},
        "n": system.n,
        "spacing": system.spacing,
        "l_identity": system.l_identity,
        "method": system.method,
        "u_star": None if system.cutoff is None else system.cutoff.u_star,
        "kernels": files,
    }
    written.append(write_manifest(directory / "system.json", desc))
    return written


def load_system(directory) -> EffectiveSystem:
    directory = Path(directory)
    desc = json.loads((directory / "system.json").read_text())
    kernels = {k: read_grid(directory / f).values[0] for k, f in desc["kernels"].items()}
    lam = LambdaH(desc["lambda_h"]["degree"], desc["lambda_h"]["coefficient"])
    cut = None if desc["u_star"] is None else CutoffSpec(desc["u_star"])
    return EffectiveSystem(
        desc["kind"], desc["dimension"], lam, desc["n"], desc["spacing"], kernels, {},
        desc["l_identity"], cut, desc["method"],
    )
