"""Blocks, references, canonical encoding and signatures."""
from .blocks import (
    Block,
    ChainSlot,
    DataBlock,
    GitBranch,
    GitCommit,
    HetconsDecision,
    HetconsMessage,
    HetconsProposal,
    NakamotoPoW,
    Opaque,
    Pattern,
    QuorumConfig,
    REGISTRY,
    StoreForever,
    TimestampBatch,
    TypeDescription,
    ONE_A,
    ONE_B,
    TWO_A,
    TWO_B,
    canonical_encode,
    decode_block,
    hash_block,
    make_ref,
    verify_reference,
)
from .keys import IdentityError, SigningKey, load_key_file, sign, verify_signature
from .types import ED25519, SHA3_256, CryptoId, Hash, Reference, Signature
from .wire import BLANK, DecodeError

__all__ = [n for n in dir() if not n.startswith("_")]
