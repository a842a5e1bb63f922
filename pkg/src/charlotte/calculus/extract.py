"""Turn blocks recorded from a live run into a finite model for post-hoc checks.

The mapping from block variants to attestation interpretations is a table;
variants absent from the table become plain blocks.
"""
from __future__ import annotations

from ..core import ChainSlot, HetconsDecision, StoreForever
from .interpret import COMMIT, STORE, Attestation, Model


def _store(b: StoreForever, label):
    return Attestation(STORE, b.issuer.short(), frozenset(label(h) for h in sorted(b.covers())))


def _slot(b: ChainSlot, label):
    return Attestation(COMMIT, b.issuer.short(), frozenset([label(b.block.hash)]),
                       "%s/%d" % (label(b.root.hash), b.slot))


def _decision(b: HetconsDecision, label, proposals):
    prop = proposals.get(b.proposal.hash)
    if prop is None:
        return None
    keys = frozenset("%s/%d" % (label(r.hash), s) for r, s in prop.chains)
    return Attestation(COMMIT, b.issuer.short(), frozenset([label(prop.block.hash)]), keys)


DEFAULT_TABLE = {StoreForever: _store, ChainSlot: _slot}


def extract_model(blocks, table=None, label_len: int = 8) -> tuple:
    """Returns (model, labels) where labels maps Hash -> block id string."""
    from ..core import HetconsProposal
    table = DEFAULT_TABLE if table is None else table
    blocks = sorted(blocks, key=lambda b: b.hash)
    labels = {}

    def label(h):
        if h not in labels:
            labels[h] = h.hex()[:label_len]
        return labels[h]

    for b in blocks:
        label(b.hash)
    proposals = {b.hash: b for b in blocks if isinstance(b, HetconsProposal)}
    m = Model(blocks=[labels[b.hash] for b in blocks])
    for b in blocks:
        if isinstance(b, HetconsDecision):
            att = _decision(b, label, proposals)
        else:
            fn = table.get(type(b))
            att = fn(b, label) if fn else None
        if att is not None:
            m.attestations[labels[b.hash]] = att
    # attestation subjects not among the recorded blocks still need ids
    extra = sorted(set(labels.values()) - set(m.blocks))
    m.blocks.extend(extra)
    return m, labels
