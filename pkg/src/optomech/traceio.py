"""CSV + JSON-sidecar storage for :class:`SpectrumTrace`.

Values are written with 17 significant digits, so grids and values survive a
write/read cycle bit-exactly.  Absent components are written as ``nan``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .spectra import COMPONENTS, SpectrumTrace

HEADER = ("freq_hz", "total") + COMPONENTS


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dump_json(obj, path):
    """Deterministic JSON (sorted keys, fixed indent) with a trailing newline."""
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=True)
    Path(path).write_text(text + "\n")


def sidecar_path(csv_path):
    return Path(csv_path).with_suffix(".json")


def write_trace(trace: SpectrumTrace, csv_path):
    csv_path = Path(csv_path)
    cols = [trace.freq_hz, trace.total]
    nan = np.full_like(trace.total, np.nan)
    cols += [trace.components.get(name, nan) for name in COMPONENTS]
    np.savetxt(csv_path, np.column_stack(cols), fmt="%.17g", delimiter=",",
               header=",".join(HEADER), comments="")
    dump_json({"frame": trace.frame, "components": sorted(trace.components),
               "metadata": trace.metadata}, sidecar_path(csv_path))


def read_trace(csv_path) -> SpectrumTrace:
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise DataFormatError(csv_path, "trace file not found")
    try:
        with open(csv_path) as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != HEADER:
                raise ValueError(f"unexpected header {header}")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if data.shape[1] != len(HEADER):
            raise ValueError(f"expected {len(HEADER)} columns, found {data.shape[1]}")
        if not np.all(np.isfinite(data[:, :2])):
            raise ValueError("non-finite frequency or total")
    except (ValueError, OSError) as exc:
        raise DataFormatError(csv_path, f"cannot parse trace ({exc})") from None

    side = sidecar_path(csv_path)
    frame, metadata, names = "rotating", {}, None
    if side.is_file():
        try:
            info = json.loads(side.read_text())
        except json.JSONDecodeError as exc:
            raise DataFormatError(side, f"bad JSON ({exc})") from None
        frame = info.get("frame", frame)
        metadata = info.get("metadata", {})
        names = info.get("components")
    comps = {}
    for j, name in enumerate(COMPONENTS, start=2):
        col = data[:, j]
        if (names is not None and name in names) or (names is None and not np.all(np.isnan(col))):
            comps[name] = col
    try:
        return SpectrumTrace(data[:, 0], data[:, 1], comps, frame, metadata)
    except ValueError as exc:
        raise DataFormatError(csv_path, str(exc)) from None
