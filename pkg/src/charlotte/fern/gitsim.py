"""Version control: commit blocks and branch-head attestations that only move
forward along the commit DAG."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..core import GitBranch, GitCommit, Hash, SigningKey
from ..node import Service
from ..transport import Result
from .ledger import Ledger
from .policy import EvidenceError, Requirement, availability_shortfall

DEFAULT_BUDGET = 10_000


def make_commit(key: SigningKey, comment: str, content: bytes, parents=()) -> GitCommit:
    """``parents`` is a list of (Reference, diff bytes); none means an initial commit."""
    return GitCommit.signed(
        key, comment=comment, content_hash=Hash.of(content),
        initial=None if parents else content, parents=list(parents))


def is_ancestor(a: Hash, b: Hash, store, budget: int = DEFAULT_BUDGET) -> bool:
    """True iff ``a`` is reachable from ``b`` via parent references (reflexive)."""
    if a == b:
        return True
    seen = {b}
    todo = deque([b])
    while todo:
        h = todo.popleft()
        c = store.get(h)
        if c is None:
            raise EvidenceError("commit %s is not available" % h.short())
        if not isinstance(c, GitCommit):
            raise EvidenceError("block %s is not a commit" % h.short())
        for ref, _diff in c.parents:
            p = ref.hash
            if p == a:
                return True
            if p not in seen:
                if len(seen) >= budget:
                    raise EvidenceError("ancestry search exceeded %d commits" % budget)
                seen.add(p)
                todo.append(p)
    return False


@dataclass
class GitPolicy:
    allowed_authors: frozenset = field(default_factory=frozenset)  # empty: anyone
    required_availability: Requirement = field(default_factory=Requirement)
    budget: int = DEFAULT_BUDGET
    evidence_wait: float = 0.0


class GitFern(Service):
    integrity_types = (GitBranch,)

    def __init__(self, key: SigningKey, policy: GitPolicy | None = None, ledger: str | None = None):
        self.key = key
        self.policy = policy or GitPolicy()
        self.heads = Ledger(ledger)  # branch name -> head commit hash
        self.issued: list = []

    def head(self, branch: str) -> Hash | None:
        v = self.heads.get(branch.encode())
        return Hash.decode(v) if v is not None else None

    async def on_integrity(self, req, sender) -> Result:
        req.require("branch_name", "commit")
        name, ref = req.get("branch_name"), req.get("commit")
        pol = self.policy
        store = self.node.store
        commit = await store.wait_for(ref.hash, pol.evidence_wait)
        if not isinstance(commit, GitCommit):
            return Result(error="evidence: commit %s not available" % ref.hash.short())
        if not commit.signature_ok:
            return Result(error="policy: commit signature does not verify")
        if pol.allowed_authors and commit.author not in pol.allowed_authors:
            return Result(error="policy: author not allowed")
        err = await availability_shortfall(store, ref, pol.required_availability, pol.evidence_wait)
        if err:
            return Result(error="policy: " + err)
        cur = self.head(name)
        if cur is not None:
            try:
                ok = is_ancestor(cur, ref.hash, store, pol.budget)
            except EvidenceError as e:
                return Result(error="evidence: %s" % e)
            if not ok:
                return Result(error="refused: %s is not a descendant of head %s of branch %r"
                              % (ref.hash.short(), cur.short(), name))
        # no awaits between the ancestry check and the update
        self.heads.put(name.encode(), ref.hash.encode())
        att = GitBranch.signed(self.key, time=self.node.clock_ms(), branch_name=name, commit=ref)
        self.node.accept_local(att)
        self.issued.append(att)
        return Result(refs=(att.ref(),), blocks=(att,))


def linearity_violations(attestations, store) -> list:
    """Per issuer and branch, consecutive heads (in issue order) that are not
    ancestry-ordered."""
    seqs: dict = {}
    for a in attestations:
        seqs.setdefault((a.issuer, a.branch_name), []).append(a.commit.hash)
    bad = []
    for key, heads in seqs.items():
        for x, y in zip(heads, heads[1:]):
            if not is_ancestor(x, y, store):
                bad.append((key, x, y))
    return bad
