"""Delegation-tree policies with asset-time segmentation.

A wallet's signing authority is organized as a tree of sub-policies.
The root represents the wallet's residual self-ownership and never
signs; every other node holds grants carved out of its parent's
capacity for a bounded time window.  At any instant each unit asset
has at most one unexpired holder, and the fungible balance caps of
concurrent grants partition the available balance.

Grants are the single source of truth: what a parent has delegated
away is derived from its children's grants, never double-booked.  A
child's active grant shadows the parent's use of the covered asset for
the child's window; a fungible carve reserves the parent's capacity
from the moment it exists until the child window ends, so conservation
holds at every instant even for windows that start in the future.

Spending is likewise derived: a node's spent amount is computed from
the wallet's signing log (every logged signature is presumed
realizable), and a unit asset is sealed while the log holds a
signature touching it whose nonce has not yet been passed by the
recognized account nonce.  Sealed assets cannot be carved away; this
is what blocks the pre-sign-then-transfer double spend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple, Union

from .. import crypto
from ..assets import AssetId, AssetKind, Demands, UnitDemand, demands_of
from ..errors import (
    ConflictingGrant,
    ExpiredPolicy,
    ExpiryExceedsParent,
    SealedAsset,
    UnknownNode,
    UpdateRefused,
)
from ..messages import ChainTx
from ..state import StateTriple

INFINITE_EXPIRY = 2**62
ROOT_ID = "root"


@dataclass(frozen=True)
class PlayerController:
    player: str


@dataclass(frozen=True)
class ProgramController:
    """Controller decided by engine code rather than a single player.

    The name resolves through the tree's program table at evaluation
    time; snapshots record only the name.
    """

    name: str


Controller = Union[PlayerController, ProgramController]


@dataclass(frozen=True)
class Grant:
    """Authority over one asset for one inclusive time window.

    ``cap`` is a wei amount for the fungible asset and exactly 1 for
    unit assets.  ``platform`` declares, for a capability key, which
    platform key covers it; carving a specific key requires holding
    its declared platform (or the key itself).
    """

    asset: AssetId
    cap: int
    start: int
    expiry: int
    platform: Optional[bytes] = None

    def active_at(self, t: int) -> bool:
        return self.start <= t <= self.expiry

    def overlaps(self, other: "Grant") -> bool:
        return self.start <= other.expiry and other.start <= self.expiry

    def conflicts_with(self, other: "Grant") -> bool:
        """Two grants cannot coexist on overlapping windows."""
        if not self.overlaps(other):
            return False
        a, b = self.asset, other.asset
        if a.kind is AssetKind.NATIVE_BALANCE or b.kind is AssetKind.NATIVE_BALANCE:
            return False  # fungible slices partition, they do not conflict
        if a == b:
            return True
        if a.kind is AssetKind.VOTE_CAPABILITY and b.kind is AssetKind.VOTE_CAPABILITY:
            # A platform grant overlaps every key declared under it.
            if self.platform is not None and self.platform == b.key:
                return True
            if other.platform is not None and other.platform == a.key:
                return True
            if self.platform is not None and self.platform == other.platform:
                return a.key == b.key  # already covered by equality; explicit
        return False


@dataclass
class Node:
    node_id: str
    parent: Optional[str]
    controller: Controller
    expiry: int
    created_at: int
    grants: List[Grant] = field(default_factory=list)

    def active_at(self, t: int) -> bool:
        return t <= self.expiry


class ControllerProgram:
    """Interface for contract-like node controllers."""

    def allows(self, tree: "PolicyTree", node: Node, player: str, message, st: StateTriple, t: int) -> bool:
        raise NotImplementedError


class LedgerHook:
    """Interface the transaction-encumbrance ledger plugs into the tree.

    When attached, chain-transaction spending power comes from the
    ledger (deposit-attributed sub-balances, nonce freshness, request
    commitments) instead of fungible grants.
    """

    def approves_chain_tx(self, node_id: str, tx: ChainTx, st: StateTriple) -> bool:
        raise NotImplementedError


class PolicyTree:
    """Mutable delegation tree for one wallet."""

    def __init__(
        self,
        root_controller: str,
        root_expiry: int = INFINITE_EXPIRY,
        native_capacity: Optional[int] = None,
    ):
        self.nodes: Dict[str, Node] = {
            ROOT_ID: Node(
                node_id=ROOT_ID,
                parent=None,
                controller=PlayerController(root_controller),
                expiry=root_expiry,
                created_at=0,
            )
        }
        self.native_capacity = native_capacity
        self.programs: Dict[str, ControllerProgram] = {}
        self.ledger: Optional[LedgerHook] = None
        self.manual_seals: Dict[bytes, str] = {}  # asset encoding -> sealing node

    # ------------------------------------------------------------------
    # structure helpers

    def node(self, node_id: str) -> Node:
        found = self.nodes.get(node_id)
        if found is None:
            raise UnknownNode(node_id)
        return found

    def children(self, node_id: str) -> List[Node]:
        return [n for n in self.nodes.values() if n.parent == node_id]

    def controller_of(self, node_id: str) -> Controller:
        return self.node(node_id).controller

    def nodes_for_player(self, player: str) -> List[Node]:
        """Nodes the player might sign through, in creation order.

        Program-controlled nodes are included; the program decides at
        evaluation time whether this player may act through them.
        """
        out = []
        for node in self.nodes.values():
            if node.node_id == ROOT_ID:
                continue
            if isinstance(node.controller, PlayerController):
                if node.controller.player == player:
                    out.append(node)
            else:
                out.append(node)
        out.sort(key=lambda n: (n.created_at, n.node_id))
        return out

    def clone(self) -> "PolicyTree":
        twin = PolicyTree.__new__(PolicyTree)
        twin.nodes = {
            nid: Node(
                node_id=n.node_id,
                parent=n.parent,
                controller=n.controller,
                expiry=n.expiry,
                created_at=n.created_at,
                grants=list(n.grants),
            )
            for nid, n in self.nodes.items()
        }
        twin.native_capacity = self.native_capacity
        twin.programs = self.programs
        twin.ledger = self.ledger
        twin.manual_seals = dict(self.manual_seals)
        return twin

    # ------------------------------------------------------------------
    # derived accounting

    def spent_native(self, node_id: str, st: StateTriple) -> int:
        total = 0
        for entry in st.intst:
            if entry.node_id == node_id and isinstance(entry.message, ChainTx):
                total += entry.message.value + entry.message.fee_cap
        return total

    def reserved_native(self, node_id: str, t: int) -> int:
        """Capacity promised to children, held until each window ends."""
        total = 0
        for child in self.children(node_id):
            for grant in child.grants:
                if grant.asset.kind is AssetKind.NATIVE_BALANCE and grant.expiry >= t:
                    total += grant.cap
        return total

    def native_grant(self, node_id: str) -> Optional[Grant]:
        for grant in self.node(node_id).grants:
            if grant.asset.kind is AssetKind.NATIVE_BALANCE:
                return grant
        return None

    def available_native(self, node_id: str, t: int, st: StateTriple) -> int:
        if node_id == ROOT_ID:
            if self.native_capacity is None:
                return 0
            return self.native_capacity - self.reserved_native(ROOT_ID, t)
        grant = self.native_grant(node_id)
        if grant is None or not grant.active_at(t):
            return 0
        return grant.cap - self.spent_native(node_id, st) - self.reserved_native(node_id, t)

    def sealed_assets(self, st: StateTriple) -> Dict[bytes, str]:
        """Unit assets with an outstanding signature, keyed by encoding.

        A chain-transaction signature is outstanding while its nonce is
        not below the recognized nonce; it seals its destination for the
        node that produced it.  Manual seals (application semantics) are
        merged in.
        """
        sealed: Dict[bytes, str] = dict(self.manual_seals)
        for entry in st.intst:
            message = entry.message
            if not isinstance(message, ChainTx):
                continue
            if message.nonce < st.ost.recognized_nonce:
                continue
            asset = AssetId(AssetKind.DESTINATION_ADDRESS, address=message.to)
            sealed.setdefault(asset.encode(), entry.node_id or "")
        return sealed

    def seal(self, node_id: str, asset: AssetId) -> None:
        self.node(node_id)
        self.manual_seals[asset.encode()] = node_id

    def unseal(self, asset: AssetId) -> None:
        self.manual_seals.pop(asset.encode(), None)

    # ------------------------------------------------------------------
    # evaluation

    def _shadowed(self, node_id: str, grant: Grant, options: Tuple[AssetId, ...], t: int) -> bool:
        for child in self.children(node_id):
            for g in child.grants:
                if not g.active_at(t):
                    continue
                if g.asset in options or g.asset == grant.asset:
                    return True
        return False

    def _unit_satisfied(
        self,
        node_id: str,
        demand: UnitDemand,
        t: int,
        sealed: Dict[bytes, str],
    ) -> bool:
        node = self.nodes[node_id]
        for grant in node.grants:
            if grant.asset not in demand.options:
                continue
            if not grant.active_at(t):
                continue
            if self._shadowed(node_id, grant, demand.options, t):
                continue
            for option in demand.options:
                sealer = sealed.get(option.encode())
                if sealer is not None and sealer != node_id:
                    return False
            return True
        return False

    def evaluate(self, node_id: str, player: str, message, st: StateTriple, t: int) -> bool:
        """Decide whether ``player`` may sign ``message`` through the node.

        Total over well-formed inputs: every reason to say no returns
        False rather than raising, except an unknown node id.
        """
        node = self.node(node_id)
        if node_id == ROOT_ID:
            return False  # residual ownership never signs
        if not node.active_at(t):
            return False
        controller = node.controller
        if isinstance(controller, PlayerController):
            if controller.player != player:
                return False
        else:
            program = self.programs.get(controller.name)
            if program is None or not program.allows(self, node, player, message, st, t):
                return False
        demands = demands_of(message, st.extst)
        if demands is None:
            return False
        sealed = self.sealed_assets(st)
        for unit in demands.units:
            if not self._unit_satisfied(node_id, unit, t, sealed):
                return False
        if isinstance(message, ChainTx) and self.ledger is not None:
            if not self.ledger.approves_chain_tx(node_id, message, st):
                return False
        elif demands.native > 0:
            if demands.native > self.available_native(node_id, t, st):
                return False
        return True

    # ------------------------------------------------------------------
    # structural validation

    def validate_structure(self, t: int) -> None:
        """Check segmentation invariants; raise on the first violation."""
        root = self.nodes.get(ROOT_ID)
        if root is None or root.parent is not None:
            raise UpdateRefused("missing root")
        for node in self.nodes.values():
            if node.node_id == ROOT_ID:
                if node.grants:
                    raise UpdateRefused("root holds no grants")
                continue
            if node.parent not in self.nodes:
                raise UpdateRefused(f"dangling parent for {node.node_id}")
            parent = self.nodes[node.parent]
            if node.expiry > parent.expiry:
                raise ExpiryExceedsParent(node.node_id)
            native_seen = False
            for grant in node.grants:
                if grant.cap < 1:
                    raise UpdateRefused("non-positive grant cap")
                if grant.start > grant.expiry:
                    raise UpdateRefused("inverted grant window")
                if grant.expiry > node.expiry:
                    raise ExpiryExceedsParent(node.node_id)
                if grant.asset.kind is AssetKind.NATIVE_BALANCE:
                    if grant.cap < 1:
                        raise UpdateRefused("empty fungible grant")
                    if native_seen:
                        raise UpdateRefused("one fungible grant per node")
                    native_seen = True
                    if grant.platform is not None:
                        raise UpdateRefused("platform on fungible grant")
                else:
                    if grant.cap != 1:
                        raise UpdateRefused("unit grant cap must be 1")
                    if grant.platform is not None and grant.asset.kind is not AssetKind.VOTE_CAPABILITY:
                        raise UpdateRefused("platform on non-capability grant")
                    if grant.platform is not None and grant.platform == grant.asset.key:
                        raise UpdateRefused("grant cannot be its own platform")
                if node.parent != ROOT_ID and not self._covered_by_parent(parent, grant):
                    raise ConflictingGrant(
                        f"{node.node_id} grant on {grant.asset.label()} has no source"
                    )
        # sibling disjointness per carve source
        for node in self.nodes.values():
            kids = self.children(node.node_id)
            flat = [(k.node_id, g) for k in kids for g in k.grants]
            for i in range(len(flat)):
                for j in range(i + 1, len(flat)):
                    id_a, a = flat[i]
                    id_b, b = flat[j]
                    if id_a != id_b and a.conflicts_with(b):
                        raise ConflictingGrant(
                            f"{id_a} and {id_b} overlap on {a.asset.label()}"
                        )
        # fungible conservation, pointwise at t
        if self.native_capacity is not None:
            if self.reserved_native(ROOT_ID, t) > self.native_capacity:
                raise ConflictingGrant("root fungible capacity exceeded")
        for node in self.nodes.values():
            if node.node_id == ROOT_ID:
                continue
            grant = self.native_grant(node.node_id)
            reserved = self.reserved_native(node.node_id, t)
            if grant is None:
                if reserved > 0:
                    raise ConflictingGrant(f"{node.node_id} delegates absent balance")
            elif reserved > grant.cap:
                raise ConflictingGrant(f"{node.node_id} over-delegates balance")

    @staticmethod
    def _covered_by_parent(parent: Node, grant: Grant) -> bool:
        for source in parent.grants:
            if source.start > grant.start or source.expiry < grant.expiry:
                continue
            if source.asset == grant.asset:
                return True
            if (
                grant.asset.kind is AssetKind.VOTE_CAPABILITY
                and source.asset.kind is AssetKind.VOTE_CAPABILITY
                and grant.platform is not None
                and source.asset.key == grant.platform
            ):
                return True
        return False

    # ------------------------------------------------------------------
    # snapshots

    def snapshot(self) -> dict:
        """Deterministic structural summary, stable across runs."""
        nodes = []
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            if isinstance(node.controller, PlayerController):
                controller = {"type": "player", "id": node.controller.player}
            else:
                controller = {"type": "program", "id": node.controller.name}
            grants = sorted(
                (
                    {
                        "asset": g.asset.label(),
                        "cap": g.cap,
                        "start": g.start,
                        "expiry": g.expiry,
                        "platform": g.platform.hex() if g.platform else None,
                    }
                    for g in node.grants
                ),
                key=lambda d: (d["asset"], d["start"], d["expiry"]),
            )
            nodes.append(
                {
                    "id": node.node_id,
                    "parent": node.parent,
                    "controller": controller,
                    "expiry": node.expiry,
                    "created_at": node.created_at,
                    "grants": grants,
                }
            )
        return {
            "native_capacity": self.native_capacity,
            "nodes": nodes,
            "seals": sorted(
                (enc.hex(), owner) for enc, owner in self.manual_seals.items()
            ),
        }

    def snapshot_digest(self) -> bytes:
        blob = json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))
        return crypto.digest(blob.encode())
