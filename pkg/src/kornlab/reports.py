"""Deterministic report serialization.

Floats are printed with 17 significant digits, which round-trips every
IEEE double exactly; dict insertion order is preserved, so two runs with
the same configuration emit byte-identical files.
"""

import numpy as np


def format_float(x):
    if isinstance(x, float) and (np.isnan(x) or np.isinf(x)):
        return '"nan"' if np.isnan(x) else ('"inf"' if x > 0 else '"-inf"')
    return f"{x:.17g}"


def _json_value(obj, parts, indent, level):
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if obj is None:
        parts.append("null")
    elif isinstance(obj, bool):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(format_float(float(obj)))
    elif isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        parts.append(f'"{escaped}"')
    elif isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            parts.append(f'{pad_in}"{k}": ')
            _json_value(v, parts, indent, level + 1)
            parts.append(",\n" if i + 1 < len(obj) else "\n")
        parts.append(pad + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            parts.append("[]")
            return
        parts.append("[\n")
        for i, v in enumerate(seq):
            parts.append(pad_in)
            _json_value(v, parts, indent, level + 1)
            parts.append(",\n" if i + 1 < len(seq) else "\n")
        parts.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps_json(obj, indent=2):
    parts = []
    _json_value(obj, parts, indent, 0)
    return "".join(parts) + "\n"


def emit_report(report, path, fmt="json"):
    """Write a report dict as JSON or as a flattened CSV table."""
    if fmt == "json":
        text = dumps_json(report)
    elif fmt == "csv":
        rows = ["key,value"]
        for key, value in _flatten(report):
            rows.append(f"{key},{value}")
        text = "\n".join(rows) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}{k}." if prefix else f"{k}.")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        for i, v in enumerate(seq):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        key = prefix[:-1]
        if obj is None:
            yield key, ""
        elif isinstance(obj, bool):
            yield key, "true" if obj else "false"
        elif isinstance(obj, (float, np.floating)):
            yield key, format_float(float(obj))
        else:
            yield key, str(obj)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        cells = [
            format_float(x) if isinstance(x, (float, np.floating)) else str(x)
            for x in row
        ]
        lines.append(",".join(cells))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_json(text):
    """Inverse of dumps_json for round-trip checks (standard JSON)."""
    import json

    return json.loads(text)
