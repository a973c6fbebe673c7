"""CSV / JSON writers with a reproducibility header."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from . import configfile

RESULT_COLUMNS = ("policy", "n_ues", "slots", "runs", "seed", "beta", "epsilon",
                  "time_avg_peak_aoi", "stderr", "analytic_lambda", "ue1_throughput",
                  "objective_eq7")
TAIL_COLUMNS = ("k", "empirical", "lower_bound", "upper_bound")
CHECK_COLUMNS = ("name", "value", "threshold", "passed")


# settings that do not influence results stay out of the header
HEADER_SKIP = ("output", "workers")


def header_block(spec, meta: dict) -> str:
    items = {k: v for k, v in spec.config_items().items() if k not in HEADER_SKIP}
    lines = [f"{configfile.HEADER_PREFIX} {spec.subcommand}\n",
             configfile.dump(items, prefix=configfile.CONFIG_PREFIX + " ")]
    lines.extend(f"# meta: {k} = {v}\n" for k, v in meta.items())
    return "".join(lines)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def tail_path(path) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}_tail{p.suffix or '.csv'}")


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def _write(path, text: str):
    Path(path).write_text(text, encoding="utf-8")


def _json_doc(spec, meta, **sections) -> str:
    doc = {"subcommand": spec.subcommand, "config": spec.config_items(), "meta": meta}
    doc.update({k: v for k, v in sections.items() if v is not None})
    return json.dumps(_json_safe(doc), indent=2, sort_keys=False) + "\n"


def write_result(spec, rows, tail, meta, replications=None):
    """Result table (+ companion tail table); no-op without ``spec.output``."""
    if spec.output is None:
        return
    if spec.format == "json":
        _write(spec.output, _json_doc(spec, meta, rows=rows, tail=tail,
                                      replications=replications))
        return
    head = header_block(spec, meta)
    _write(spec.output, head + csv_text(RESULT_COLUMNS, rows))
    if tail is not None:
        _write(tail_path(spec.output), head + csv_text(TAIL_COLUMNS, tail))


def write_checks(spec, checks, meta, tail=None):
    if spec.output is None:
        return
    if spec.format == "json":
        _write(spec.output, _json_doc(spec, meta, checks=checks, tail=tail))
        return
    head = header_block(spec, meta)
    _write(spec.output, head + csv_text(CHECK_COLUMNS, checks))
    if tail is not None:
        _write(tail_path(spec.output), head + csv_text(TAIL_COLUMNS, tail))
