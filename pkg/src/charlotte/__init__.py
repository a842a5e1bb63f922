"""Composable authenticated distributed data structures over a block DAG."""

__version__ = "0.1.0"
