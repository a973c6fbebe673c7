"""Line-oriented ``key = value`` experiment files.

Blank lines and ``#`` comments are skipped. Lines of the form
``# config: key = value`` are also read, so an output file can be fed back
in with ``--config``: when the text starts with the ``# peakaoi`` header,
only its ``# config:`` lines are used and the table body is ignored.
"""
from __future__ import annotations

CONFIG_PREFIX = "# config:"
HEADER_PREFIX = "# peakaoi"


def _fmt_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt_scalar(x) for x in v)
    return _fmt_scalar(v)


def dump(items: dict, prefix: str = "") -> str:
    return "".join(f"{prefix}{k} = {format_value(v)}\n" for k, v in items.items())


def parse(text: str) -> dict:
    out = {}
    header = text.startswith(HEADER_PREFIX)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if header and not line.startswith("#"):
            break
        if line.startswith(CONFIG_PREFIX):
            line = line[len(CONFIG_PREFIX):].strip()
        elif not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
