"""Refactoring a many-account txn into a butterfly of 2-in/2-out txns.

With d = ceil(log2(max(inputs, outputs))) and n = 2**d there are n chains
of d txns.  Chain i's first txn spends input i (both halves).  At stage k
chain i pays stage k+1 of chains i and (i + 2**k) mod n; the last stage
of chain i pays outputs i and (i + n/2) mod n, so each original output is
carried by two UTXOs.  Every stage-k node reaches each original output by
exactly one path, which is what makes proportional splitting exact.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import PaygraphError, Txn, TxnGraph, UtxoRef

MID_OWNER = "*"


def depth_for(n_in: int, n_out: int) -> int:
    m = max(n_in, n_out)
    return (m - 1).bit_length() if m > 1 else 0


def apportion(total: int, weights) -> list:
    """Largest-remainder split of ``total`` by ``weights``; ties go to the
    lower index.  All-zero weights split evenly."""
    weights = list(weights)
    if not weights:
        return []
    if sum(weights) == 0:
        weights = [1] * len(weights)
    W = sum(weights)
    base = [total * w // W for w in weights]
    rem = [(total * w % W, -i) for i, w in enumerate(weights)]
    left = total - sum(base)
    for _, neg in sorted(rem, reverse=True)[:left]:
        base[-neg] += 1
    return base


def _reach(d: int, n: int, n_out: int):
    """reach[k][i]: (outputs via slot 0, outputs via slot 1) of node (k, i),
    restricted to outputs that exist."""
    reach = [[None] * n for _ in range(d)]
    half = n >> 1
    for i in range(n):
        reach[d - 1][i] = tuple(frozenset({j}) if j < n_out else frozenset()
                                for j in (i, (i + half) % n))
    for k in range(d - 2, -1, -1):
        for i in range(n):
            reach[k][i] = tuple(reach[k + 1][m][0] | reach[k + 1][m][1]
                                for m in (i, (i + (1 << k)) % n))
    return reach


@dataclass
class Transformed:
    txns: list
    depth: int
    outputs: dict  # original output index -> UtxoRefs carrying it


def node_id(tid: str, k: int, i: int) -> str:
    return "%s@%d.%d" % (tid, k, i)


def two_account_transform(txn: Txn, input_values=None, resolve=None) -> Transformed:
    """``input_values`` (ints, one per input) bound what flows on; without
    them the inputs are taken to cover the outputs exactly.  ``resolve``
    maps an original input ref to the refs now carrying it."""
    n_in, n_out = len(txn.inputs), len(txn.outputs)
    if n_in == 0 or n_out == 0:
        raise PaygraphError("transform needs at least one input and one output", [txn.id])
    resolve = resolve or (lambda r: [r])
    d = depth_for(n_in, n_out)
    if d == 0:
        ins = tuple(x for r in txn.inputs for x in resolve(r))
        return Transformed([Txn(txn.id, ins, txn.outputs)], 0, {0: [UtxoRef(txn.id, 0)]})

    n = 1 << d
    vals = [v for v, _ in txn.outputs]
    V = sum(vals)
    if input_values is not None and None not in input_values:
        flow, weights = min(V, sum(input_values)), list(input_values)
    else:
        flow, weights = V, [1] * n_in
    reach = _reach(d, n, n_out)
    worth = lambda js: sum(vals[j] for j in js)  # noqa: E731

    value = {(0, i): v for i, v in enumerate(apportion(flow, weights))}
    feeds = {(0, i): [x for x in resolve(txn.inputs[i])] for i in range(n_in)}
    txns, outputs = [], {}
    for k in range(d):
        for i in range(n):
            if (k, i) not in value:
                continue
            me = node_id(txn.id, k, i)
            slots = [s for s in (0, 1) if reach[k][i][s]]
            split = apportion(value[(k, i)], [worth(reach[k][i][s]) for s in slots])
            outs = []
            for idx, (s, amt) in enumerate(zip(slots, split)):
                ref = UtxoRef(me, idx)
                if k == d - 1:
                    j = (i, (i + (n >> 1)) % n)[s]
                    outs.append((amt, txn.outputs[j][1]))
                    outputs.setdefault(j, []).append(ref)
                else:
                    m = (i, (i + (1 << k)) % n)[s]
                    outs.append((amt, MID_OWNER))
                    value[(k + 1, m)] = value.get((k + 1, m), 0) + amt
                    feeds.setdefault((k + 1, m), []).append(ref)
            txns.append(Txn(me, tuple(feeds[(k, i)]), tuple(outs)))
    for j in outputs:
        outputs[j].sort()
    return Transformed(txns, d, outputs)


def transform_graph(g: TxnGraph) -> TxnGraph:
    """Apply the transform to every txn that has inputs and outputs;
    coinbase-like txns stay as they are."""
    carried = {}  # original UtxoRef -> refs in the new graph
    out = []
    resolve = lambda r: carried.get(r, [r])  # noqa: E731
    for tid in g.order:
        t = g.by_id[tid]
        if not t.inputs or not t.outputs:
            out.append(Txn(t.id, tuple(x for r in t.inputs for x in resolve(r)), t.outputs))
            continue
        res = two_account_transform(t, [g.value_of(r) for r in t.inputs], resolve)
        out.extend(res.txns)
        if res.depth:
            for j, refs in res.outputs.items():
                carried[UtxoRef(t.id, j)] = refs
    return TxnGraph(out)
