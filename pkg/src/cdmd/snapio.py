"""Reading and writing snapshot data.

Two on-disk formats are supported.

CSV (``.csv``)
    Plain text, one matrix row per line, comma-separated decimal floats.
    Comment lines start with ``#`` and carry ``key=value`` metadata:

    ``# dt=<float>``
        sampling interval (default 1.0).
    ``# layout=sequence`` (default)
        the rows form one snapshot sequence ``Z`` (m x (n+1)), and
        ``Xtilde = Z[:, :-1]``, ``Ytilde = Z[:, 1:]``.
    ``# layout=pairs``
        the file holds ``2m`` rows: ``Xtilde`` stacked on top of ``Ytilde``.

    ``save_snapshots`` always writes the ``pairs`` layout with shortest
    round-trip float formatting, so save followed by load is bit-exact.

Binary (``.bin``)
    Little-endian. A 40-byte header

    ========  ======  =====================================
    offset    type    field
    ========  ======  =====================================
    0         8s      magic ``b"CDMDSNAP"``
    8         u32     format version (1)
    12        u32     layout (0 = pairs, 1 = sequence)
    16        u64     rows
    24        u64     cols
    32        f64     dt
    ========  ======  =====================================

    followed by float64 payload in column-major order: ``Xtilde`` then
    ``Ytilde`` for the pairs layout, or the single ``rows x cols`` sequence.
"""

import csv
import io
import math
import struct
from pathlib import Path

import numpy as np

from .dmd import SnapshotData
from .errors import SnapshotFormatError

MAGIC = b"CDMDSNAP"
VERSION = 1
HEADER = struct.Struct("<8sIIQQd")
LAYOUTS = {"pairs": 0, "sequence": 1}
FORMATS = ("csv", "bin")


def infer_format(path):
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix in FORMATS:
        return suffix
    raise ValueError(f"cannot infer snapshot format from {str(path)!r}; use a .csv or .bin suffix")


def _from_layout(M, layout, dt, rows=None):
    if layout == "sequence":
        if M.shape[1] < 2:
            raise SnapshotFormatError("a snapshot sequence needs at least 2 columns")
        return SnapshotData(M[:, :-1], M[:, 1:], dt)
    m = M.shape[0] // 2
    return SnapshotData(M[:m], M[m:], dt)


def _check_finite(M, path):
    if not np.all(np.isfinite(M)):
        i, j = np.argwhere(~np.isfinite(M))[0]
        raise ValueError(f"{path}: non-finite entry at row {i}, column {j}")


# ---------------------------------------------------------------- CSV


def _read_csv(path):
    text = Path(path).read_text()
    meta = {"dt": "1.0", "layout": "sequence"}
    rows = []
    width = None
    offset = 0
    for lineno, line in enumerate(text.splitlines(keepends=True), start=1):
        start, offset = offset, offset + len(line.encode())
        body = line.strip()
        if not body:
            continue
        if body.startswith("#"):
            for token in body[1:].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    meta[key.strip()] = value.strip()
            continue
        cells = next(csv.reader([body]))
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise SnapshotFormatError(f"{path}: unparseable number ({exc})", offset=start, row=lineno) from exc
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise SnapshotFormatError(
                f"{path}: row has {len(values)} entries, expected {width}", offset=start, row=lineno
            )
        rows.append(values)
    if not rows:
        raise SnapshotFormatError(f"{path}: no data rows", offset=0)
    layout = meta["layout"]
    if layout not in LAYOUTS:
        raise SnapshotFormatError(f"{path}: unknown layout {layout!r}", offset=0)
    try:
        dt = float(meta["dt"])
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: bad dt value {meta['dt']!r}", offset=0) from exc
    M = np.array(rows, dtype=float)
    if layout == "pairs" and M.shape[0] % 2:
        raise SnapshotFormatError(f"{path}: pairs layout needs an even number of rows, got {M.shape[0]}")
    _check_finite(M, path)
    return _from_layout(M, layout, dt)


def _write_csv(data, path):
    buf = io.StringIO()
    buf.write(f"# dt={data.dt!r}\n# layout=pairs\n")
    for row in np.vstack([data.Xtilde, data.Ytilde]):
        buf.write(",".join(repr(float(v)) for v in row))
        buf.write("\n")
    Path(path).write_text(buf.getvalue())


# ------------------------------------------------------------- binary


def _read_bin(path):
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise SnapshotFormatError(f"{path}: file shorter than the {HEADER.size}-byte header", offset=len(raw))
    magic, version, layout_code, rows, cols, dt = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}", offset=8)
    names = {v: k for k, v in LAYOUTS.items()}
    if layout_code not in names:
        raise SnapshotFormatError(f"{path}: unknown layout code {layout_code}", offset=12)
    layout = names[layout_code]
    if rows == 0 or cols == 0:
        raise SnapshotFormatError(f"{path}: empty dimensions {rows}x{cols}", offset=16)
    if not (math.isfinite(dt) and dt > 0):
        raise SnapshotFormatError(f"{path}: dt must be positive, got {dt}", offset=32)
    count = rows * cols * (2 if layout == "pairs" else 1)
    payload = len(raw) - HEADER.size
    if payload != 8 * count:
        raise SnapshotFormatError(
            f"{path}: payload holds {payload} bytes but {rows}x{cols} ({layout}) needs {8 * count}",
            offset=HEADER.size,
        )
    flat = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).astype(float)
    if layout == "pairs":
        X = flat[: rows * cols].reshape((rows, cols), order="F")
        Y = flat[rows * cols:].reshape((rows, cols), order="F")
        M = np.vstack([X, Y])
    else:
        M = flat.reshape((rows, cols), order="F")
    _check_finite(M, path)
    return _from_layout(M, layout, dt)


def _write_bin(data, path):
    rows, cols = data.shape
    head = HEADER.pack(MAGIC, VERSION, LAYOUTS["pairs"], rows, cols, data.dt)
    body = np.concatenate([data.Xtilde.ravel(order="F"), data.Ytilde.ravel(order="F")]).astype("<f8")
    Path(path).write_bytes(head + body.tobytes())


def load_snapshots(path, fmt=None):
    """Load ``SnapshotData`` from a CSV or binary file.

    Parameters
    ----------
    path : str or Path
    fmt : {"csv", "bin"}, optional
        Inferred from the file suffix when omitted.

    Raises
    ------
    FileNotFoundError
        The file does not exist.
    SnapshotFormatError
        Malformed header, ragged rows or a payload whose size disagrees with
        the header; the message carries the row and/or byte offset.
    ValueError
        Non-finite entries.
    """
    fmt = fmt or infer_format(path)
    if not Path(path).is_file():
        raise FileNotFoundError(f"snapshot file not found: {path}")
    if fmt == "csv":
        return _read_csv(path)
    if fmt == "bin":
        return _read_bin(path)
    raise ValueError(f"unknown snapshot format {fmt!r}; expected one of {FORMATS}")


def save_snapshots(data, path, fmt=None):
    fmt = fmt or infer_format(path)
    if fmt == "csv":
        _write_csv(data, path)
    elif fmt == "bin":
        _write_bin(data, path)
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}; expected one of {FORMATS}")
