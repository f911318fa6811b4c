"""JSON and CSV artifacts written atomically"""

import csv
import json
import logging
import math
import os
import tempfile
from enum import Enum
from pathlib import Path

import numpy as np

from isoblock.config import JSON_FLOAT_FORMAT

logger = logging.getLogger(__name__)

VOLATILE_KEYS = ("timestamp", "started", "duration_s")


def to_plain(value):
    """Convert numpy scalars and arrays, enums and tuples to JSON types"""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if hasattr(value, "to_dict"):
        return to_plain(value.to_dict())
    return value


def format_float(x):
    if not math.isfinite(x):
        return "null"
    text = format(x, JSON_FLOAT_FORMAT)
    # keep floats recognisable as floats
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def _encode(value, level, indent):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{pad}{json.dumps(k)}: {_encode(value[k], level + 1, indent)}" for k in sorted(value)
        ]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return "[" + ", ".join(_encode(v, level + 1, indent) for v in value) + "]"
        items = [f"{pad}{_encode(v, level + 1, indent)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, int):
        return str(value)
    return json.dumps(str(value) if not isinstance(value, str) else value)


def dumps(payload, indent=2):
    """Sorted-key JSON with every float written with 17 significant digits"""
    return _encode(to_plain(payload), 0, indent) + "\n"


def strip_volatile(payload):
    """Drop wall-clock fields so reruns are byte-identical"""
    if isinstance(payload, dict):
        return {k: strip_volatile(v) for k, v in payload.items() if k not in VOLATILE_KEYS}
    if isinstance(payload, list):
        return [strip_volatile(v) for v in payload]
    return payload


def _atomic_write(path, write):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    logger.debug("wrote %s", path)
    return path


def write_json(path, payload, deterministic=False):
    """Write payload as JSON; with deterministic, volatile fields are removed"""
    plain = to_plain(payload)
    if deterministic:
        plain = strip_volatile(plain)
    text = dumps(plain)
    return _atomic_write(path, lambda fh: fh.write(text))


def write_csv(path, header, rows):
    """Write a header and rows; floats use the JSON float format"""

    def write(fh):
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format(v, JSON_FLOAT_FORMAT) if isinstance(v, float) else v for v in row]
            )

    return _atomic_write(path, write)
