"""Availability servers."""
from ..store import BlockStore
from .service import DEFAULT_QUERY_TIMEOUT, Wilbur, referenced_attestations

__all__ = ["BlockStore", "Wilbur", "DEFAULT_QUERY_TIMEOUT", "referenced_attestations"]
