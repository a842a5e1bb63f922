"""The scaled experiment suite.  Each experiment takes a parameter dict, a
seed and a backend and returns a Metrics document."""
from __future__ import annotations

from . import agreement, hetcons, nakamoto, timestamp
from .base import Cluster, summary

EXPERIMENTS = {
    "nakamoto-scaling": (nakamoto.scaling, nakamoto.DEFAULTS),
    "agreement-latency": (agreement.latency, agreement.LATENCY_DEFAULTS),
    "agreement-bandwidth": (agreement.bandwidth, agreement.BANDWIDTH_DEFAULTS),
    "hetcons-parallel": (hetcons.parallel, hetcons.PARALLEL_DEFAULTS),
    "hetcons-multichain": (hetcons.multichain, hetcons.MULTICHAIN_DEFAULTS),
    "hetcons-contention": (hetcons.contention, hetcons.CONTENTION_DEFAULTS),
    "hetcons-mixed": (hetcons.mixed, hetcons.MIXED_DEFAULTS),
    "timestamp-accrual": (timestamp.accrual, timestamp.DEFAULTS),
}


def parse_value(text: str, like):
    """Parse ``text`` into the type of the default ``like``.  Lists take
    comma-separated items or an inclusive ``lo..hi`` range."""
    if isinstance(like, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected a boolean, got %r" % text)
    if isinstance(like, list):
        item = like[0] if like else 0
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [parse_value(x, item) for x in text.split(",") if x]
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def params_for(name: str, overrides: dict | None = None) -> dict:
    if name not in EXPERIMENTS:
        raise KeyError("unknown experiment %r (known: %s)" % (name, ", ".join(EXPERIMENTS)))
    p = dict(EXPERIMENTS[name][1])
    for k, v in (overrides or {}).items():
        if k not in p:
            raise KeyError("experiment %s has no parameter %r (has: %s)" % (name, k, ", ".join(p)))
        p[k] = parse_value(v, p[k]) if isinstance(v, str) else v
    return p


def run_experiment(name: str, overrides: dict | None = None, seed: int = 0, backend: str = "sim"):
    p = params_for(name, overrides)
    fn = EXPERIMENTS[name][0]
    m = fn(p, seed, backend)
    head = {"schema": m.header.pop("schema"), "experiment": m.header.pop("experiment"),
            "seed": seed, "backend": backend}
    head.update(("param_" + k, v) for k, v in p.items())
    head.update(m.header)
    m.header = head
    return m


__all__ = ["Cluster", "EXPERIMENTS", "params_for", "parse_value", "run_experiment", "summary"]
