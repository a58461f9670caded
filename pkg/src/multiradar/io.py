"""File formats: the RadarCube binary and the CSV tables.

RadarCube layout, all little-endian::

    b"RCUB" | u16 version | u32 header length | header JSON (UTF-8) | payload

The header carries the radar configuration, ``fast_time_rate`` and
``dims = [M, fast, slow]``. The payload is float32 interleaved I, Q in
``(m, fast, slow)`` C order.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct

import numpy as np

from .errors import InvalidInput, ParseError
from .mvmd import MultiChannelSeries
from .radar import RadarConfig, RadarCube

__all__ = [
    "CUBE_MAGIC",
    "CUBE_VERSION",
    "write_cube",
    "read_cube",
    "write_table",
    "read_table",
    "write_displacements",
    "read_displacements",
    "write_peaks",
    "read_peaks",
    "write_json",
]

CUBE_MAGIC = b"RCUB"
CUBE_VERSION = 1
_PREFIX = struct.Struct("<4sHI")


def write_cube(path, cube: RadarCube, cfg: RadarConfig, extra=None):
    """Write ``cube`` with its configuration; ``extra`` is stored under ``"extra"`` in the header."""
    M, nf, nt = cube.shape
    header = {
        "config": cfg.to_dict(),
        "fast_time_rate": cube.fast_time_rate,
        "dims": [M, nf, nt],
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(cube.iq, dtype="<c8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(CUBE_MAGIC, CUBE_VERSION, len(blob)))
        fh.write(blob)
        fh.write(payload.tobytes())


def read_cube(path):
    """Read a cube file; returns ``(cube, config, header)``.

    Raises
    ------
    ParseError
        With the byte offset of the first violation.
    """
    path = os.fspath(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _PREFIX.size:
        raise ParseError(f"file holds {len(raw)} bytes, too short for the cube preamble", 0, path)
    magic, version, hlen = _PREFIX.unpack_from(raw, 0)
    if magic != CUBE_MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {CUBE_MAGIC!r}", 0, path)
    if version != CUBE_VERSION:
        raise ParseError(f"unsupported version {version}", 4, path)
    start = _PREFIX.size
    if start + hlen > len(raw):
        raise ParseError(f"header length {hlen} runs past end of file", 6, path)
    try:
        header = json.loads(raw[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"header is not valid UTF-8 JSON: {exc}", start, path) from None
    try:
        cfg = RadarConfig.from_dict(header["config"])
        M, nf, nt = (int(v) for v in header["dims"])
        rate = float(header["fast_time_rate"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid header: {exc}", start, path) from None
    if min(M, nf, nt) < 1:
        raise ParseError(f"invalid dims {[M, nf, nt]}", start, path)
    offset = start + hlen
    expected = M * nf * nt * 8
    if len(raw) - offset != expected:
        raise ParseError(
            f"payload holds {len(raw) - offset} bytes, dims {[M, nf, nt]} need {expected}", offset, path
        )
    iq = np.frombuffer(raw, dtype="<c8", offset=offset).reshape(M, nf, nt)
    bad = ~np.isfinite(iq)
    if bad.any():
        first = int(np.flatnonzero(bad.ravel())[0])
        raise ParseError("non-finite sample", offset + 8 * first, path)
    try:
        cube = RadarCube(iq.copy(), rate)
    except InvalidInput as exc:
        raise ParseError(str(exc), start, path) from None
    return cube, cfg, header


def write_table(path, columns, names):
    """Write equal-length numeric columns as CSV with full float precision."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if columns else np.empty((0, 0))
    buf = io.StringIO()
    np.savetxt(buf, data, fmt="%.17g", delimiter=",", header=",".join(names), comments="")
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_table(path):
    """Read a numeric CSV with a header row; returns ``(names, array of shape (rows, cols))``."""
    path = os.fspath(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty CSV", 0, path)
    names = [n.strip() for n in rows[0]]
    body = [r for r in rows[1:] if r]
    out = np.empty((len(body), len(names)))
    for i, r in enumerate(body):
        if len(r) != len(names):
            raise ParseError(f"line {i + 2}: {len(r)} fields, header has {len(names)}", None, path)
        try:
            out[i] = [float(v) for v in r]
        except ValueError as exc:
            raise ParseError(f"line {i + 2}: {exc}", None, path) from None
    if not np.all(np.isfinite(out)):
        raise ParseError("non-finite value in table", None, path)
    return names, out


def write_displacements(path, series: MultiChannelSeries):
    names = ["time_s"] + [f"radar_{cid}" for cid in series.channel_ids]
    write_table(path, [series.times, *series.data], names)


def _uniform_rate(t, path):
    if t.size < 2:
        raise ParseError("need at least 2 rows", None, path)
    dt = np.diff(t)
    step = float(np.median(dt))
    if not step > 0 or not np.allclose(dt, step, rtol=1e-6, atol=1e-9):
        raise ParseError("time column is not uniformly sampled", None, path)
    return 1.0 / step


def read_displacements(path, prefix="radar_") -> MultiChannelSeries:
    """Read a ``time_s,<prefix><id>...`` CSV into a :class:`MultiChannelSeries`."""
    path = os.fspath(path)
    names, a = read_table(path)
    if not names or names[0] != "time_s":
        raise ParseError("first column must be time_s", 0, path)
    if len(names) < 2:
        raise ParseError("no data columns", 0, path)
    fs = _uniform_rate(a[:, 0], path)
    ids = [n[len(prefix):] if n.startswith(prefix) else n for n in names[1:]]
    return MultiChannelSeries(a[:, 1:].T, fs, ids, float(a[0, 0]))


def write_peaks(path, peak_times, name="peak_time_s"):
    write_table(path, [np.asarray(peak_times, dtype=float)], [name])


def read_peaks(path):
    names, a = read_table(path)
    if names != ["peak_time_s"]:
        raise ParseError("peak file must have the single column peak_time_s", 0, os.fspath(path))
    return a[:, 0]


def write_json(obj, path=None):
    """Dump ``obj`` as indented JSON to ``path``, or return the text when ``path`` is None."""
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if path is None:
        return text
    with open(path, "w") as fh:
        fh.write(text + "\n")
    return text


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and not np.isfinite(o):
        return None
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
