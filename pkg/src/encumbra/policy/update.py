"""The update predicate: which policy transitions are admissible.

``check_update`` validates a proposed tree against the current one and
refuses anything that is not a clean spawn of new capacity out of the
actor's own holdings, a re-grant of a node whose every holding has
expired, or garbage collection of expired parts:

* the new tree must itself be asset-time segmented;
* nothing another player currently holds may shrink or vanish;
* every added grant must carve from a node the actor controls (the
  root's residual capacity counts as the root controller's);
* carved capacity must be unsealed — no outstanding signature may be
  able to spend what is being handed over.

The checker is deliberately structural and at least as strict as those
bullets: it refuses some semantically harmless edits (such as revoking
a grant whose window has not started) rather than risk admitting a
harmful one.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

from ..assets import AssetKind
from ..errors import (
    ConflictingGrant,
    ExpiredPolicy,
    SealedAsset,
    UnknownNode,
    UpdateRefused,
)
from ..state import StateTriple
from .tree import Controller, Grant, Node, PlayerController, PolicyTree, ROOT_ID


def _grant_key(grant: Grant) -> tuple:
    return (grant.asset.encode(), grant.cap, grant.start, grant.expiry, grant.platform)


def _controlling_ancestor(old: PolicyTree, new: PolicyTree, node_id: str) -> Optional[Node]:
    """Nearest ancestor of ``node_id`` that already exists in the old tree."""
    cursor = new.nodes[node_id].parent
    while cursor is not None:
        if cursor in old.nodes:
            return old.nodes[cursor]
        cursor = new.nodes[cursor].parent
    return None


def check_update(
    actor: str,
    old: PolicyTree,
    new: PolicyTree,
    st: StateTriple,
    t: int,
) -> None:
    """Raise unless ``old -> new`` is an admissible transition by ``actor``."""
    new.validate_structure(t)

    old_root = old.nodes[ROOT_ID]
    new_root = new.nodes.get(ROOT_ID)
    if (
        new_root is None
        or new_root.controller != old_root.controller
        or new_root.expiry != old_root.expiry
        or new.native_capacity != old.native_capacity
    ):
        raise UpdateRefused("root is immutable")

    added: List[Tuple[str, Grant]] = []

    for node_id, old_node in old.nodes.items():
        new_node = new.nodes.get(node_id)
        if new_node is None:
            if t <= old_node.expiry:
                raise UpdateRefused(f"removal of live node {node_id}")
            continue
        if (
            new_node.parent != old_node.parent
            or new_node.controller != old_node.controller
            or new_node.expiry != old_node.expiry
        ):
            raise UpdateRefused(f"mutation of node {node_id}")
        old_grants: Dict[tuple, int] = {}
        for grant in old_node.grants:
            old_grants[_grant_key(grant)] = old_grants.get(_grant_key(grant), 0) + 1
        for grant in new_node.grants:
            key = _grant_key(grant)
            if old_grants.get(key, 0) > 0:
                old_grants[key] -= 1
            else:
                added.append((node_id, grant))
        for (_, _, _, expiry, _), remaining in list(old_grants.items()):
            if remaining > 0 and t <= expiry:
                raise UpdateRefused(f"revocation of live grant on {node_id}")

    for node_id, new_node in new.nodes.items():
        if node_id in old.nodes:
            continue
        for grant in new_node.grants:
            added.append((node_id, grant))

    if not added:
        return

    sealed = old.sealed_assets(st)
    native_drawn: Dict[str, int] = {}
    for node_id, grant in added:
        if node_id in old.nodes:
            # A node may be re-granted only once everything it held has
            # expired.  Topping up a node that still holds live grants
            # would let separately carved resources combine into
            # approvals the actor never held in one piece.
            for prior in old.nodes[node_id].grants:
                if t <= prior.expiry:
                    raise UpdateRefused(f"regrant of active node {node_id}")
            source_id = new.nodes[node_id].parent
            source = old.nodes.get(source_id)
            if source is None:
                raise UpdateRefused("grant added under a new parent")
        else:
            source = _controlling_ancestor(old, new, node_id)
            if source is None:
                raise UpdateRefused("added subtree has no anchored ancestor")
        if t > source.expiry:
            raise ExpiredPolicy(source.node_id)
        controller = source.controller
        if not isinstance(controller, PlayerController) or controller.player != actor:
            raise UpdateRefused("actor does not control the capacity source")
        if grant.asset.kind is not AssetKind.NATIVE_BALANCE:
            owner = sealed.get(grant.asset.encode())
            if owner is not None:
                raise SealedAsset(grant.asset.label())
        elif grant.expiry >= t and new.nodes[node_id].parent == source.node_id:
            # Direct carves draw on the source's unspent, unreserved
            # balance; cap alone is not enough once the source has spent.
            # Nested new levels are funded by their new parent, which the
            # structural pass already bounds.
            native_drawn[source.node_id] = (
                native_drawn.get(source.node_id, 0) + grant.cap
            )

    for source_id, amount in native_drawn.items():
        if amount > old.available_native(source_id, t, st):
            raise ConflictingGrant(f"carve exceeds {source_id} available balance")


def spawn(
    tree: PolicyTree,
    actor: str,
    parent_id: str,
    node_id: str,
    controller: Controller,
    expiry: int,
    grants: Sequence[Grant],
    st: StateTriple,
    t: int,
) -> PolicyTree:
    """Validated spawn; returns the successor tree, original untouched."""
    parent = tree.node(parent_id)
    if t > parent.expiry:
        raise ExpiredPolicy(parent_id)
    if node_id in tree.nodes:
        raise UpdateRefused(f"node id {node_id} already in use")
    candidate = tree.clone()
    candidate.nodes[node_id] = Node(
        node_id=node_id,
        parent=parent_id,
        controller=controller,
        expiry=expiry,
        created_at=t,
        grants=list(grants),
    )
    check_update(actor, tree, candidate, st, t)
    return candidate


def add_grants(
    tree: PolicyTree,
    actor: str,
    node_id: str,
    grants: Sequence[Grant],
    st: StateTriple,
    t: int,
) -> PolicyTree:
    """Re-grant a live node whose previous holdings have all expired."""
    node = tree.node(node_id)
    if t > node.expiry:
        raise ExpiredPolicy(node_id)
    candidate = tree.clone()
    candidate.nodes[node_id].grants.extend(grants)
    check_update(actor, tree, candidate, st, t)
    return candidate
