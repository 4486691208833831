"""CSV / JSON-lines emission and the run manifest."""
import csv
import io
import json
import math
import os
import platform

import numpy as np
import scipy

from . import __version__


class OutputExists(FileExistsError):
    pass


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def parse_value(s):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    return v


def csv_text(rows, columns, timing=True):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if (c == "wall_time" and not timing) else format_value(r.get(c)) for c in columns])
    return buf.getvalue()


def read_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        return [{c: parse_value(v) for c, v in zip(header, line)} for line in rd]


def _check_free(paths, overwrite):
    taken = [p for p in paths if os.path.exists(p)]
    if taken and not overwrite:
        raise OutputExists(f"refusing to overwrite {taken[0]} (pass --overwrite)")


def emit_reports(rows, columns, out_dir, stem, overwrite=False, timing=True):
    """Write <stem>.csv and <stem>.jsonl; returns the two paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, stem + ext) for ext in (".csv", ".jsonl")]
    _check_free(paths, overwrite)
    with open(paths[0], "w", newline="") as fh:
        fh.write(csv_text(rows, columns, timing))
    with open(paths[1], "w") as fh:
        for r in rows:
            rec = {c: json_value(r.get(c)) for c in columns if r.get(c) is not None}
            if not timing:
                rec.pop("wall_time", None)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return paths


def write_manifest(out_dir, stem, info, overwrite=False):
    path = os.path.join(out_dir, stem + ".manifest.json")
    _check_free([path], overwrite)
    data = dict(info)
    data["versions"] = {"python": platform.python_version(), "numpy": np.__version__,
                        "scipy": scipy.__version__, "qpsolve": __version__}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
