"""Consensus-round counts: one round per txn when everything is linearized,
one round per level of the longest chain when independent txns commit in
parallel."""
from __future__ import annotations

from dataclasses import dataclass

from .model import TxnGraph, longest_chain
from .transform import transform_graph


@dataclass
class Report:
    txns: int
    linearized_rounds: int
    parallel_rounds: int
    speedup: float
    witness: list
    transformed: bool = False
    txns_after: int = 0

    def text(self) -> str:
        lines = [
            "txns                %d" % self.txns,
            "two-account         %s" % ("yes" if self.transformed else "no"),
        ]
        if self.transformed:
            lines.append("txns after         %d" % self.txns_after)
        lines += [
            "linearized rounds   %d" % self.linearized_rounds,
            "parallel rounds     %d" % self.parallel_rounds,
            "speedup             %.3f" % self.speedup,
            "longest chain       %s" % " -> ".join(self.witness[:12])
            + (" ... (%d more)" % (len(self.witness) - 12) if len(self.witness) > 12 else ""),
        ]
        return "\n".join(lines) + "\n"


def parallelization_report(g: TxnGraph, transform: bool = False) -> Report:
    h = transform_graph(g) if transform else g
    par, witness = longest_chain(h)
    lin = len(g)
    return Report(txns=len(g), linearized_rounds=lin, parallel_rounds=par,
                  speedup=(lin / par) if par else 0.0, witness=witness,
                  transformed=transform, txns_after=len(h))
