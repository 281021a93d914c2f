"""
Persistence for traces (CSV) and run manifests (JSON).
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Union

import pandas as pd

from errors import DataError, DataFormatError, EmptyInputError, OutputError
from export import emit_csv
from formatting import parse_real
from models import RunManifest, Trace, TraceKind

logger = logging.getLogger(__name__)

TRACE_HEADER = "value"


def _parse_comment(line: str, origin: Dict[str, Any], line_no: int):
    """Read a `# key=value` comment into origin; other comments are ignored."""
    key, sep, value = line[1:].strip().partition("=")
    if not sep:
        return
    key, value = key.strip(), value.strip()
    if key == "seed":
        try:
            origin["seed"] = int(value)
        except ValueError:
            raise DataFormatError(f"seed comment must hold an integer, got {value!r}", line=line_no)
    else:
        origin[key] = value


def load_trace(path: Union[str, Path], kind: TraceKind = TraceKind.INCREMENTS) -> Trace:
    """
    Load a trace CSV: optional `value` header, one real per line.

    Args:
        path: CSV file
        kind: increments or waits

    Returns:
        Trace with origin {'source': 'external', 'path': ...} plus any
        `# key=value` comments (seed kept as an integer)
    """
    kind = TraceKind(kind)
    trace_file = Path(path)
    if not trace_file.exists():
        raise DataError(f"Trace file {path} not found")

    origin: Dict[str, Any] = {"source": "external", "path": str(path)}
    values = []
    try:
        with open(trace_file, 'r', encoding='utf-8') as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    _parse_comment(line, origin, line_no)
                    continue
                if not values and line.lower() == TRACE_HEADER:
                    continue
                try:
                    value = parse_real(line)
                except ValueError:
                    raise DataFormatError(f"cannot parse {line!r} as a real number", line=line_no)
                if not math.isfinite(value):
                    raise DataFormatError(f"trace values must be finite, got {line!r}", line=line_no)
                if kind == TraceKind.WAITS and value < 0:
                    raise DataFormatError(f"waiting times must be nonnegative, got {line!r}", line=line_no)
                values.append(value)
    except UnicodeDecodeError as e:
        raise DataFormatError(f"{path} is not UTF-8 text: {e}")

    if not values:
        raise EmptyInputError(f"Trace file {path} holds no values")
    logger.debug("loaded %d %s from %s", len(values), kind.value, path)
    return Trace(values, kind, origin)


def save_trace(trace: Trace, path: Union[str, Path, None]) -> None:
    """
    Write a trace as CSV with `# key=value` lines for its scalar origin fields.

    Args:
        trace: the trace to save
        path: output file, or None / '-' for stdout
    """
    metadata = {}
    if trace.seed is not None:
        metadata["seed"] = trace.seed
    for key in sorted(trace.origin):
        value = trace.origin[key]
        if key in ("seed", "source", "path") or value is None:
            continue
        if isinstance(value, (int, float, str)):
            metadata[key] = value
    metadata["kind"] = trace.kind.value
    table = pd.DataFrame({TRACE_HEADER: trace.values.astype(float)})
    emit_csv(table, None if path is None else str(path), metadata)


def save_manifest(manifest: RunManifest, path: Union[str, Path]) -> None:
    """Save a run manifest as JSON."""
    try:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(manifest.to_dict(), f, indent=2, ensure_ascii=False, sort_keys=True)
            f.write("\n")
    except (IOError, TypeError) as e:
        raise OutputError(f"Error writing manifest {path}: {e}")
    logger.info("wrote manifest %s", path)


def load_manifest(path: Union[str, Path]) -> RunManifest:
    """Load a run manifest written by save_manifest."""
    manifest_file = Path(path)
    if not manifest_file.exists():
        raise DataError(f"Manifest {path} not found")
    try:
        with open(manifest_file, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (json.JSONDecodeError, IOError) as e:
        raise DataFormatError(f"Error reading manifest {path}: {e}")
    if not isinstance(data, dict):
        raise DataFormatError(f"Manifest {path} must hold a JSON object")
    return RunManifest.from_dict(data)
