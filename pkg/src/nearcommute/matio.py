"""Matrix file formats: JSON (diffable, round-trip exact for finite doubles)
and an optional raw little-endian binary sidecar for large outputs.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .matcore import as_matrix, op_norm

__all__ = ["save_matrix", "load_matrix", "save_cbin", "load_cbin", "atomic_write_text"]

FORMAT_VERSION = 1
TAG_TOL = 1e-8


class MatrixFileError(ValueError):
    """Malformed matrix file."""


def atomic_write_text(path, text: str) -> None:
    """Write a text file via temp-and-rename so readers never see a partial
    file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_matrix(path, m, *, hermitian: bool | None = None,
                unitary: bool | None = None) -> None:
    """Write a matrix as JSON with entries [re, im] row-major.

    Floats are serialized by repr, which round-trips binary64 exactly.
    """
    mm = as_matrix(m)
    n = mm.shape[0]
    doc = {
        "format": FORMAT_VERSION,
        "dim": n,
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in mm],
    }
    if hermitian is not None:
        doc["hermitian"] = bool(hermitian)
    if unitary is not None:
        doc["unitary"] = bool(unitary)
    atomic_write_text(path, json.dumps(doc))


def load_matrix(path) -> np.ndarray:
    """Read a JSON matrix file, verifying declared tags to 1e-8."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MatrixFileError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict) or "entries" not in doc or "dim" not in doc:
        raise MatrixFileError(f"{path}: missing dim/entries")
    n = int(doc["dim"])
    rows = doc["entries"]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise MatrixFileError(f"{path}: entries do not form a {n}x{n} matrix")
    try:
        m = np.array([[complex(c[0], c[1]) for c in row] for row in rows])
    except (TypeError, IndexError) as exc:
        raise MatrixFileError(f"{path}: bad entry encoding") from exc
    if not np.all(np.isfinite(m)):
        raise MatrixFileError(f"{path}: non-finite entries")
    if doc.get("hermitian") and op_norm(m - m.conj().T) > TAG_TOL * max(1.0, op_norm(m)):
        raise MatrixFileError(f"{path}: tagged hermitian but is not")
    if doc.get("unitary") and op_norm(m.conj().T @ m - np.eye(n)) > TAG_TOL:
        raise MatrixFileError(f"{path}: tagged unitary but is not")
    return m


def save_cbin(path, m) -> None:
    """Raw sidecar: dim as little-endian u64, then 2*dim^2 little-endian
    doubles (re, im interleaved, row-major)."""
    mm = as_matrix(m)
    n = mm.shape[0]
    buf = bytearray(struct.pack("<Q", n))
    flat = np.empty(2 * n * n)
    flat[0::2] = mm.real.ravel()
    flat[1::2] = mm.imag.ravel()
    buf += flat.astype("<f8").tobytes()
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(buf))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_cbin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise MatrixFileError(f"{path}: truncated header")
    n = struct.unpack("<Q", raw[:8])[0]
    need = 8 + 16 * n * n
    if len(raw) != need:
        raise MatrixFileError(f"{path}: expected {need} bytes, found {len(raw)}")
    flat = np.frombuffer(raw[8:], dtype="<f8")
    return (flat[0::2] + 1j * flat[1::2]).reshape(n, n)
