"""Executable observer/belief/view model."""
from .interpret import (
    COMMIT,
    STORE,
    Attestation,
    Model,
    availability_monotonicity_violations,
    interpret_exclusive_commit,
    interpret_store_forever,
    main_chain_ordered,
    meet,
    quorum_belief,
)
from .model import (
    Adds,
    Belief,
    NotAState,
    Universe,
    adds,
    adds_intersection,
    adds_union,
    all_universes,
    is_available,
    is_incontrovertible,
    refine,
    state,
    view,
)
