"""Binary Merkle commitments over transaction digests.

Leaves are domain-separated from interior nodes (0x00 / 0x01 prefixes)
so a proof for a leaf can never be replayed as a proof for an interior
node.  Odd levels duplicate their last element.  Proof siblings carry a
side bit: True when the sibling sits to the right of the running hash.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from . import crypto

EMPTY_ROOT = crypto.digest(b"merkle-empty-v1")


def _leaf(value: bytes) -> bytes:
    return crypto.digest(b"\x00" + value)


def _interior(left: bytes, right: bytes) -> bytes:
    return crypto.digest(b"\x01" + left + right)


def merkle_root(values: Sequence[bytes]) -> bytes:
    if not values:
        return EMPTY_ROOT
    level = [_leaf(v) for v in values]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [_interior(level[i], level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


@dataclass(frozen=True)
class MerklePath:
    """Sibling hashes from leaf to root with side bits."""

    index: int
    siblings: Tuple[Tuple[bytes, bool], ...]


def merkle_path(values: Sequence[bytes], index: int) -> MerklePath:
    if not 0 <= index < len(values):
        raise IndexError("leaf index out of range")
    level = [_leaf(v) for v in values]
    position = index
    siblings: List[Tuple[bytes, bool]] = []
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        mate = position ^ 1
        siblings.append((level[mate], mate > position))
        level = [_interior(level[i], level[i + 1]) for i in range(0, len(level), 2)]
        position //= 2
    return MerklePath(index=index, siblings=tuple(siblings))


def verify_path(value: bytes, path: MerklePath, root: bytes) -> bool:
    running = _leaf(value)
    for sibling, is_right in path.siblings:
        if is_right:
            running = _interior(running, sibling)
        else:
            running = _interior(sibling, running)
    return running == root
