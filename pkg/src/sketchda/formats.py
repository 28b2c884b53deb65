"""Labeled feature files.

Two formats are accepted and detected from the first bytes:

* CSV, one sample per line: ``label[,camera],f1,...,fd``. An optional header
  row is recognized by a non-numeric first token; a second header column
  named ``camera`` (or ``cam``/``camid``/``view``) announces camera IDs.
* Binary: magic ``SODF``, ``u32 N``, ``u32 d``, ``u8 has_camera``, then per
  record ``i32 label`` [``i32 camera``] and ``d`` little-endian ``f64``.

Readers are generators that make a single sequential pass over the file.
"""

import io
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import StreamFormatError

BINARY_MAGIC = b"SODF"
_BIN_HEADER = struct.Struct("<4sIIB")
_CAMERA_COLUMNS = {"camera", "cam", "camid", "view"}


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    label: int
    camera: Optional[int] = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 1:
            raise StreamFormatError(f"features must be a vector, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise StreamFormatError("features contain non-finite values")
        object.__setattr__(self, "features", feats)


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def _parse_int(token, what, lineno):
    try:
        return int(token)
    except ValueError:
        raise StreamFormatError(f"line {lineno}: {what} {token!r} is not an integer") from None


def _iter_csv(text, has_camera):
    dim = None
    first = True
    for lineno, line in enumerate(text, start=1):
        line = line.strip()
        if not line:
            continue
        tokens = [t.strip() for t in line.split(",")]
        if first:
            first = False
            if not _is_number(tokens[0]):
                if has_camera is None:
                    has_camera = len(tokens) > 1 and tokens[1].lower() in _CAMERA_COLUMNS
                continue
        if has_camera is None:
            has_camera = False
        n_meta = 2 if has_camera else 1
        if len(tokens) <= n_meta:
            raise StreamFormatError(f"line {lineno}: no feature columns")
        label = _parse_int(tokens[0], "label", lineno)
        camera = _parse_int(tokens[1], "camera", lineno) if has_camera else None
        try:
            feats = np.array([float(t) for t in tokens[n_meta:]])
        except ValueError as exc:
            raise StreamFormatError(f"line {lineno}: {exc}") from None
        if dim is None:
            dim = feats.size
        elif feats.size != dim:
            raise StreamFormatError(f"line {lineno}: expected {dim} features, got {feats.size}")
        if not np.all(np.isfinite(feats)):
            raise StreamFormatError(f"line {lineno}: non-finite feature value")
        yield LabeledSample(feats, label, camera)


def _iter_binary(fh):
    head = fh.read(_BIN_HEADER.size)
    if len(head) != _BIN_HEADER.size:
        raise StreamFormatError("binary header truncated")
    magic, n, dim, has_camera = _BIN_HEADER.unpack(head)
    if magic != BINARY_MAGIC:
        raise StreamFormatError(f"bad magic {magic!r}")
    if has_camera not in (0, 1):
        raise StreamFormatError(f"has-camera flag must be 0 or 1, got {has_camera}")
    meta = struct.Struct("<ii" if has_camera else "<i")
    size = meta.size + 8 * dim
    for i in range(n):
        rec = fh.read(size)
        if len(rec) != size:
            raise StreamFormatError(f"record {i}: truncated ({len(rec)} of {size} bytes)")
        ids = meta.unpack_from(rec)
        feats = np.frombuffer(rec, dtype="<f8", offset=meta.size).astype(float)
        if not np.all(np.isfinite(feats)):
            raise StreamFormatError(f"record {i}: non-finite feature value")
        yield LabeledSample(feats, ids[0], ids[1] if has_camera else None)
    if fh.read(1):
        raise StreamFormatError(f"trailing bytes after {n} records")


def read_samples(path, has_camera=None):
    """Yield :class:`LabeledSample` records from a CSV or binary file."""
    with open(path, "rb") as fh:
        if fh.peek(len(BINARY_MAGIC))[: len(BINARY_MAGIC)] == BINARY_MAGIC:
            yield from _iter_binary(fh)
        else:
            text = io.TextIOWrapper(fh, encoding="utf-8", newline="")
            try:
                yield from _iter_csv(text, has_camera)
            finally:
                text.detach()


def load_arrays(path, has_camera=None):
    """Read a whole file into ``(X, labels, cameras)``; cameras may be None."""
    feats, labels, cams = [], [], []
    for s in read_samples(path, has_camera):
        feats.append(s.features)
        labels.append(s.label)
        cams.append(s.camera)
    if not feats:
        raise StreamFormatError(f"{path}: no samples")
    X = np.vstack(feats)
    cameras = None if cams[0] is None else np.array(cams, dtype=int)
    return X, np.array(labels, dtype=int), cameras


def _fmt(x):
    return repr(float(x))


def write_csv(path, X, labels, cameras=None):
    X = np.asarray(X, dtype=float)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        head = ["label"] + (["camera"] if cameras is not None else [])
        fh.write(",".join(head + [f"f{j}" for j in range(X.shape[1])]) + "\n")
        for i, row in enumerate(X):
            meta = [str(int(labels[i]))]
            if cameras is not None:
                meta.append(str(int(cameras[i])))
            fh.write(",".join(meta + [_fmt(v) for v in row]) + "\n")


def write_binary(path, X, labels, cameras=None):
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise StreamFormatError("refusing to write non-finite features")
    has_camera = cameras is not None
    meta = struct.Struct("<ii" if has_camera else "<i")
    with open(path, "wb") as fh:
        fh.write(_BIN_HEADER.pack(BINARY_MAGIC, X.shape[0], X.shape[1], int(has_camera)))
        for i, row in enumerate(X):
            ids = (int(labels[i]), int(cameras[i])) if has_camera else (int(labels[i]),)
            fh.write(meta.pack(*ids))
            fh.write(row.astype("<f8").tobytes())
