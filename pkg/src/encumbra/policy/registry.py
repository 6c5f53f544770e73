"""Wallet-level policy objects the manager dispatches to.

A wallet points at exactly one policy object.  Two degenerate policies
exist for bootstrapping and for the recovery sentinel (approve-all,
approve-none); real wallets use a delegation tree.  Policy objects are
compiled into the engine and addressed by a registry name, so a policy
update is a transition between registered behaviors, never the arrival
of foreign code.
"""

from __future__ import annotations

from typing import Optional, Tuple

from ..state import StateTriple
from .tree import PolicyTree


class WalletPolicy:
    kind = "abstract"

    def approves(
        self, player: str, message, st: StateTriple, t: int
    ) -> Tuple[bool, Optional[str]]:
        """Return (approved, node id that vouched or None)."""
        raise NotImplementedError

    def snapshot(self) -> dict:
        raise NotImplementedError


class AllowAllPolicy(WalletPolicy):
    """Approves every well-formed message for every player."""

    kind = "allow-all"

    def approves(self, player, message, st, t):
        return True, None

    def snapshot(self):
        return {"kind": self.kind}


class DenyAllPolicy(WalletPolicy):
    """Approves nothing; the initial posture of every new wallet."""

    kind = "deny-all"

    def approves(self, player, message, st, t):
        return False, None

    def snapshot(self):
        return {"kind": self.kind}


class TreeWalletPolicy(WalletPolicy):
    """Delegation-tree policy; approval comes from the first node that
    vouches for the player, in node creation order."""

    kind = "tree"

    def __init__(self, tree: PolicyTree):
        self.tree = tree

    def approves(self, player, message, st, t):
        for node in self.tree.nodes_for_player(player):
            if self.tree.evaluate(node.node_id, player, message, st, t):
                return True, node.node_id
        return False, None

    def snapshot(self):
        return {"kind": self.kind, "tree": self.tree.snapshot()}


REGISTRY_POLICIES = {
    "allow": AllowAllPolicy,
    "deny": DenyAllPolicy,
}

UPDATE_RULES = ("frozen", "any", "tree")
