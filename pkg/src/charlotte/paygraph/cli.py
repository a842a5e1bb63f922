"""paygraph analyze | generate | convert"""
from __future__ import annotations

import argparse
import sys

from ..metrics import Metrics
from .csvconv import from_csv
from .model import PaygraphError, TxnGraph, dump, load, synthetic
from .report import parallelization_report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="paygraph")
    sub = ap.add_subparsers(dest="cmd", required=True)
    a = sub.add_parser("analyze", help="round counts for a txn file")
    a.add_argument("file")
    a.add_argument("--two-account", action="store_true")
    a.add_argument("--metrics", help="write a metrics file here")
    g = sub.add_parser("generate", help="write a synthetic txn file")
    g.add_argument("--txns", type=int, default=10_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    c = sub.add_parser("convert", help="flattened blockchain CSV to txn file")
    c.add_argument("csv")
    c.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    try:
        if args.cmd == "generate":
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(dump(synthetic(args.txns, args.seed)))
            return 0
        if args.cmd == "convert":
            with open(args.csv, newline="", encoding="utf-8") as fh:
                txns = from_csv(fh)
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(dump(txns))
            return 0
        g = load(args.file)
        rep = parallelization_report(g, args.two_account)
    except (OSError, PaygraphError) as e:
        print("paygraph: %s" % e, file=sys.stderr)
        return 2
    sys.stdout.write(rep.text())
    for w in g.warnings[:20]:
        print("warning: %s" % w)
    if args.metrics:
        m = Metrics("paygraph-analyze", source=args.file, two_account=args.two_account)
        m.add("report", txns=rep.txns, txns_after=rep.txns_after,
              linearized_rounds=rep.linearized_rounds, parallel_rounds=rep.parallel_rounds,
              speedup=rep.speedup, warnings=len(g.warnings))
        m.write(args.metrics)
    return 0


if __name__ == "__main__":
    sys.exit(main())
