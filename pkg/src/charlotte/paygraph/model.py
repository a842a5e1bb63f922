"""Transactions, the text format, and the UTXO graph they induce."""
from __future__ import annotations

import heapq
import random
import re
from dataclasses import dataclass, field
from typing import NamedTuple

ID_RE = re.compile(r"^[A-Za-z0-9_.@~-]+$")


class PaygraphError(ValueError):
    def __init__(self, msg, txids=()):
        self.txids = tuple(txids)
        super().__init__(msg + (" [%s]" % ", ".join(self.txids) if self.txids else ""))


class UtxoRef(NamedTuple):
    txid: str
    index: int

    def __str__(self):
        return "%s:%d" % (self.txid, self.index)

    @classmethod
    def parse(cls, s: str) -> "UtxoRef":
        txid, sep, idx = s.strip().rpartition(":")
        if not sep or not ID_RE.match(txid) or not idx.isdigit():
            raise PaygraphError("bad utxo reference %r" % s)
        return cls(txid, int(idx))


@dataclass(frozen=True)
class Txn:
    id: str
    inputs: tuple = ()   # UtxoRef
    outputs: tuple = ()  # (value, owner)

    def line(self) -> str:
        return "%s | in=%s | out=%s" % (
            self.id, ",".join(map(str, self.inputs)),
            ",".join("%d:%s" % (v, o) for v, o in self.outputs))


def parse_line(line: str, lineno: int = 0) -> Txn:
    parts = [p.strip() for p in line.split("|")]
    where = "line %d: " % lineno if lineno else ""
    if len(parts) != 3 or not parts[1].startswith("in=") or not parts[2].startswith("out="):
        raise PaygraphError(where + "expected 'id | in=... | out=...'")
    tid = parts[0]
    if not ID_RE.match(tid):
        raise PaygraphError(where + "bad txn id %r" % tid)
    ins = parts[1][3:].strip()
    outs = parts[2][4:].strip()
    try:
        inputs = tuple(UtxoRef.parse(r) for r in ins.split(",")) if ins else ()
    except PaygraphError as e:
        raise PaygraphError(where + str(e), [tid]) from None
    outputs = []
    for o in (outs.split(",") if outs else ()):
        v, sep, owner = o.strip().partition(":")
        if not sep or not v.isdigit():
            raise PaygraphError(where + "bad output %r" % o, [tid])
        outputs.append((int(v), owner))
    return Txn(tid, inputs, tuple(outputs))


def parse(text: str) -> list:
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s and not s.startswith("#"):
            out.append(parse_line(s, n))
    return out


def load(path: str) -> "TxnGraph":
    with open(path, encoding="utf-8") as fh:
        return TxnGraph(parse(fh.read()))


def dump(txns) -> str:
    return "".join(t.line() + "\n" for t in txns)


@dataclass
class TxnGraph:
    """Txns as vertices, spent outputs as edges.  Validates on construction:
    unique ids, in-range references, every output spent at most once, no
    cycles.  References to txids not in the graph are external inputs."""

    txns: list
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.by_id = {}
        for t in self.txns:
            if t.id in self.by_id:
                raise PaygraphError("duplicate txn id", [t.id])
            self.by_id[t.id] = t
        spent = {}
        self.preds = {t.id: [] for t in self.txns}
        self.succs = {t.id: [] for t in self.txns}
        for t in self.txns:
            for r in t.inputs:
                if r in spent:
                    raise PaygraphError("output %s spent twice" % (r,), [spent[r], t.id])
                spent[r] = t.id
                src = self.by_id.get(r.txid)
                if src is None:
                    continue
                if r.index >= len(src.outputs):
                    raise PaygraphError("%s has no output %d" % (r.txid, r.index), [t.id])
                if r.txid not in self.preds[t.id]:
                    self.preds[t.id].append(r.txid)
                    self.succs[r.txid].append(t.id)
        self.order = self._topo()
        for t in self.txns:
            iv = self.input_value(t)
            if iv is not None and t.inputs and sum(v for v, _ in t.outputs) > iv:
                self.warnings.append("%s: outputs exceed inputs" % t.id)

    def __len__(self):
        return len(self.txns)

    def _topo(self) -> list:
        indeg = {k: len(v) for k, v in self.preds.items()}
        heap = [k for k, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        out = []
        while heap:
            k = heapq.heappop(heap)
            out.append(k)
            for s in self.succs[k]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    heapq.heappush(heap, s)
        if len(out) != len(self.txns):
            stuck = sorted(k for k, d in indeg.items() if d > 0)
            raise PaygraphError("cycle in transaction graph", stuck[:10])
        return out

    def value_of(self, r: UtxoRef):
        src = self.by_id.get(r.txid)
        return None if src is None else src.outputs[r.index][0]

    def input_value(self, t: Txn):
        vals = [self.value_of(r) for r in t.inputs]
        return None if None in vals else sum(vals)


def longest_chain(g: TxnGraph):
    """(vertex count, witness) of a longest directed path.  Among longest
    paths the witness is the lexicographically smallest id sequence."""
    if not g.txns:
        return 0, []
    length, nxt = {}, {}
    for k in reversed(g.order):
        best, pick = 0, None
        for s in g.succs[k]:
            if length[s] > best or (length[s] == best and s < pick):
                best, pick = length[s], s
        length[k], nxt[k] = best + 1, pick
    top = max(length.values())
    cur = min(k for k, v in length.items() if v == top)
    path = []
    while cur is not None:
        path.append(cur)
        cur = nxt[cur]
    return top, path


def synthetic(n: int, seed: int = 0, coinbase_rate: float = 0.02, wide_rate: float = 0.03) -> list:
    """A spendable-looking random txn DAG.  Inputs are drawn from recent
    unspent outputs so chains form; a few txns fan in or out widely."""
    rng = random.Random(seed)
    unspent, txns = [], []
    for i in range(n):
        tid = "t%06d" % i
        if not unspent or rng.random() < coinbase_rate:
            txns.append(Txn(tid, (), ((5_000_000_000, "miner%d" % rng.randrange(50)),)))
            unspent.append((UtxoRef(tid, 0), 5_000_000_000))
            continue
        wide = rng.random() < wide_rate
        k = min(len(unspent), rng.randint(1, 24) if wide else rng.choice((1, 1, 1, 2, 2, 3)))
        window = max(k, min(len(unspent), 64))
        picks = sorted(rng.sample(range(len(unspent) - window, len(unspent)), k), reverse=True)
        ins = [unspent.pop(p) for p in picks]
        total = sum(v for _, v in ins)
        fee = min(total, rng.randrange(0, 10_000))
        m = rng.randint(1, 24) if wide and rng.random() < 0.5 else rng.choice((1, 2, 2, 2, 3))
        cuts = sorted(rng.randrange(total - fee + 1) for _ in range(m - 1))
        vals = [b - a for a, b in zip([0] + cuts, cuts + [total - fee])]
        outs = tuple((v, "a%d" % rng.randrange(10_000)) for v in vals)
        txns.append(Txn(tid, tuple(r for r, _ in ins), outs))
        unspent.extend((UtxoRef(tid, j), v) for j, (v, _) in enumerate(outs))
    return txns
