from .agreement import (AgreementConfig, AgreementFern, conflicting_quorums, equivocations,
                        quorum_size, slot_key)
from .gitsim import GitFern, GitPolicy, is_ancestor, linearity_violations, make_commit
from .hetcons import (HetconsFern, chain_config, lead_chain, make_chain, proposer_of,
                      verify_decision)
from .hetcons_core import AcceptorCore, ChainSpec, check_safety
from .ledger import Ledger
from .nakamoto import (NakamotoFern, PowChainConfig, best_chain, leading_zero_bits, mine,
                       pow_ok, search)
from .policy import EvidenceError, Requirement, availability_shortfall
from .timestamp import EntanglementConfig, TimestampFern, coverage_all, ref_edges, stamp_coverage

__all__ = [n for n in dir() if not n.startswith("_")]
