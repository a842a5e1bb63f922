"""Converter stub for flattened blockchain exports.

Expects one CSV row per txn input or output, with a header naming at least
``tx_hash,direction,prev_tx_hash,prev_index,value,address``.  ``direction``
is ``input`` or ``output``; input rows fill the ``prev_*`` columns, output
rows fill ``value`` and ``address``.  Output rows of one txn are kept in
file order, which is taken to be the output index order.
"""
from __future__ import annotations

import csv
import re

from .model import PaygraphError, Txn, UtxoRef

NEED = ("tx_hash", "direction", "prev_tx_hash", "prev_index", "value", "address")
_SAFE = re.compile(r"[^A-Za-z0-9_.@~-]")


def _clean(s: str) -> str:
    return _SAFE.sub("_", s.strip())


def from_csv(fh) -> list:
    rows = csv.DictReader(fh)
    missing = [c for c in NEED if c not in (rows.fieldnames or ())]
    if missing:
        raise PaygraphError("csv missing columns: %s" % ", ".join(missing))
    ins, outs, order = {}, {}, []
    for row in rows:
        tid = _clean(row["tx_hash"])
        if tid not in ins:
            ins[tid], outs[tid] = [], []
            order.append(tid)
        kind = row["direction"].strip().lower()
        if kind == "input":
            ins[tid].append(UtxoRef(_clean(row["prev_tx_hash"]), int(row["prev_index"])))
        elif kind == "output":
            outs[tid].append((int(row["value"]), row["address"].replace(",", ";").replace("|", ";")))
        else:
            raise PaygraphError("unknown direction %r" % row["direction"], [tid])
    return [Txn(t, tuple(ins[t]), tuple(outs[t])) for t in order]
