from .model import (PaygraphError, Txn, TxnGraph, UtxoRef, dump, load, longest_chain, parse,
                    parse_line, synthetic)
from .report import Report, parallelization_report
from .transform import Transformed, apportion, depth_for, transform_graph, two_account_transform

__all__ = [
    "PaygraphError", "Report", "Transformed", "Txn", "TxnGraph", "UtxoRef", "apportion",
    "depth_for", "dump", "load", "longest_chain", "parallelization_report", "parse",
    "parse_line", "synthetic", "transform_graph", "two_account_transform",
]
