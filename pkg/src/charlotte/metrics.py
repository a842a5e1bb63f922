"""Metrics files: ``# key=value`` header lines, then one record per line.

Records are tab-separated ``key=value`` fields.  Floats are written with
``repr``-free fixed formatting so reruns are byte-identical.
"""
from __future__ import annotations

SCHEMA = "charlotte-metrics/1"


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.6f" % v
    if isinstance(v, (list, tuple)):
        return ",".join(fmt(x) for x in v)
    return str(v)


class Metrics:
    def __init__(self, name: str, **header):
        self.header = {"schema": SCHEMA, "experiment": name}
        self.header.update(header)
        self.records: list = []

    def note(self, **kv):
        self.header.update(kv)

    def add(self, kind: str, **fields):
        self.records.append((kind, fields))

    def render(self) -> str:
        lines = ["# %s=%s" % (k, fmt(v)) for k, v in self.header.items()]
        for kind, fields in self.records:
            lines.append("\t".join([kind] + ["%s=%s" % (k, fmt(v)) for k, v in fields.items()]))
        return "\n".join(lines) + "\n"

    def write(self, path: str):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())


def parse(text: str):
    """Inverse of render: (header dict, list of (kind, {k: str}))."""
    header, records = {}, []
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            header[k] = v
            continue
        kind, *parts = line.split("\t")
        records.append((kind, dict(p.split("=", 1) for p in parts)))
    return header, records


def percentile(xs, q: float) -> float:
    """Linear-interpolated percentile, q in [0, 100]."""
    s = sorted(xs)
    if not s:
        return float("nan")
    pos = (len(s) - 1) * q / 100.0
    lo = int(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)
