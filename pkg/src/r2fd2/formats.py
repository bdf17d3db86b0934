"""On-disk formats for interest points, descriptors and matches."""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .detector import InterestPoint
from .errors import ImageFormatError
from .imaging import ProjectiveTransform
from .matcher import MatchPair

DESCRIPTOR_MAGIC = b"RMLG"
DESCRIPTOR_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def _f(v: float) -> str:
    # repr round-trips exactly and is stable across runs
    return repr(float(v))


def points_csv(ips: list[InterestPoint]) -> str:
    """``x,y,response`` lines, strongest first."""
    ordered = sorted(ips, key=lambda ip: -ip.response)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "response"])
    for ip in ordered:
        w.writerow([_f(ip.x), _f(ip.y), _f(ip.response)])
    return buf.getvalue()


def read_points_csv(path) -> list[InterestPoint]:
    with Path(path).open(newline="") as fh:
        return [InterestPoint(float(r["x"]), float(r["y"]), float(r["response"])) for r in csv.DictReader(fh)]


def write_descriptors(path, xy: np.ndarray, desc: np.ndarray) -> None:
    """Binary dump: little-endian header then ``x f64, y f64, dim x f32`` records."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    desc = np.asarray(desc, dtype=np.float64)
    n, dim = desc.shape if desc.ndim == 2 else (0, 0)
    if len(xy) != n:
        raise ValueError("point and descriptor counts differ")
    record = np.dtype([("xy", "<f8", (2,)), ("d", "<f4", (dim,))])
    rec = np.empty(n, dtype=record)
    rec["xy"] = xy
    rec["d"] = desc
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(DESCRIPTOR_MAGIC, DESCRIPTOR_VERSION, n, dim))
        fh.write(rec.tobytes())


def read_descriptors(path) -> tuple[np.ndarray, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ImageFormatError(f"{path}: truncated descriptor file")
    magic, version, n, dim = _HEADER.unpack_from(data)
    if magic != DESCRIPTOR_MAGIC or version != DESCRIPTOR_VERSION:
        raise ImageFormatError(f"{path}: not a version-{DESCRIPTOR_VERSION} descriptor file")
    record = np.dtype([("xy", "<f8", (2,)), ("d", "<f4", (dim,))])
    if len(data) != _HEADER.size + n * record.itemsize:
        raise ImageFormatError(f"{path}: size does not match header")
    rec = np.frombuffer(data, dtype=record, count=n, offset=_HEADER.size)
    return rec["xy"].astype(np.float64), rec["d"].astype(np.float64)


def descriptors_csv(xy: np.ndarray, desc: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    dim = desc.shape[1] if desc.ndim == 2 else 0
    w.writerow(["x", "y"] + [f"d{k}" for k in range(dim)])
    for (x, y), d in zip(xy, desc):
        w.writerow([_f(x), _f(y)] + [f"{v:.7g}" for v in np.float32(d)])
    return buf.getvalue()


def matches_csv(pairs: list[MatchPair]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x_ref", "y_ref", "x_sen", "y_sen", "distance", "inlier"])
    for m in pairs:
        w.writerow([_f(m.ref_pt[0]), _f(m.ref_pt[1]), _f(m.sen_pt[0]), _f(m.sen_pt[1]), _f(m.distance), int(m.inlier)])
    return buf.getvalue()


def match_summary(n_candidates: int, n_inliers: int, success: bool, transform: ProjectiveTransform | None, rmse: float | None = None) -> dict:
    """JSON-ready summary; ``transform`` is row-major, sensed onto reference."""
    out = {
        "n_candidates": int(n_candidates),
        "n_inliers": int(n_inliers),
        "success": bool(success),
        "transform": None if transform is None else [float(v) for v in transform.h.ravel()],
    }
    if rmse is not None:
        out["rmse"] = float(rmse)
    return out
